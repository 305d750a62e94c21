"""Alternating SDP optimization of the CGLMP4 value over preparations and measurements."""

from __future__ import annotations

import functools
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .inequalities import CGLMP4, InequalityFunctional, behavior_from
from .quantum import Assemblage, Povm, partial_transpose, random_projective_povm
from .sdp import SdpProblem, SolverOptions, solve

log = logging.getLogger(__name__)

DIM = 4
LOCAL_DIMS = (2, 2)
RECORD_FORMAT = "ctxdim-seesaw-record v1"


class SeesawError(RuntimeError):
    pass


def hermitian_basis(d: int) -> list[np.ndarray]:
    basis = []
    for i in range(d):
        e = np.zeros((d, d), complex)
        e[i, i] = 1
        basis.append(e)
    for i in range(d):
        for j in range(i + 1, d):
            e = np.zeros((d, d), complex)
            e[i, j] = e[j, i] = 1
            basis.append(e)
            f = np.zeros((d, d), complex)
            f[i, j] = -1j
            f[j, i] = 1j
            basis.append(f)
    return basis


def _solver_opts() -> SolverOptions:
    return SolverOptions()


def _check(sol, what):
    if sol.status != "optimal":
        raise SeesawError(
            f"{what} SDP ended with status {sol.status!r} after {sol.iterations} iterations "
            f"(gap {sol.gap:.3e}, residuals {sol.primal_residual:.3e}/{sol.dual_residual:.3e})"
        )


def _polish_assemblage(sig: np.ndarray) -> Assemblage:
    sig = 0.5 * (sig + sig.conj().transpose(0, 1, 3, 2))
    n_x, n_a = sig.shape[:2]
    star = sig.sum(axis=1).mean(axis=0)
    star = star / np.trace(star).real
    for x in range(n_x):
        sig[x] += (star - sig[x].sum(axis=0)) / n_a
    return Assemblage(sig)


def _polish_povms(eff: np.ndarray) -> list[Povm]:
    eff = 0.5 * (eff + eff.conj().transpose(0, 1, 3, 2))
    n_b = eff.shape[1]
    out = []
    for e in eff:
        e = e + (np.eye(e.shape[-1]) - e.sum(axis=0)) / n_b
        out.append(Povm(e))
    return out


@functools.lru_cache(maxsize=None)
def _preparation_template(ppt: bool, n_a: int, n_x: int) -> SdpProblem:
    blocks = [(f"s{x}{a}", DIM) for x in range(n_x) for a in range(n_a)]
    if ppt:
        blocks += [(f"t{x}{a}", DIM) for x in range(n_x) for a in range(n_a)]
    prob = SdpProblem(blocks, {})
    basis = hermitian_basis(DIM)
    # common marginal across settings
    for x in range(1, n_x):
        for bk in basis:
            coeffs = {f"s0{a}": bk for a in range(n_a)}
            coeffs.update({f"s{x}{a}": -bk for a in range(n_a)})
            prob.add_constraint(coeffs, 0.0)
    prob.add_constraint({f"s0{a}": np.eye(DIM) for a in range(n_a)}, 1.0)
    if ppt:
        # t_{a|x} equals the partial transpose of s_{a|x}: Tr(B t) = Tr(B^T1 s)
        for x in range(n_x):
            for a in range(n_a):
                for bk in basis:
                    prob.add_constraint(
                        {f"t{x}{a}": bk, f"s{x}{a}": -partial_transpose(bk, "first", LOCAL_DIMS)}, 0.0
                    )
    return prob


def preparation_problem(povms: Sequence[Povm], ppt: bool,
                        functional: InequalityFunctional = CGLMP4) -> SdpProblem:
    n_a, n_b, n_x, n_y = functional.coefficients.shape
    c = functional.coefficients
    objective = {}
    for x in range(n_x):
        for a in range(n_a):
            objective[f"s{x}{a}"] = sum(c[a, b, x, y] * povms[y].effects[b] for b in range(n_b) for y in range(n_y))
    return _preparation_template(ppt, n_a, n_x).with_objective(objective)


def optimize_preparations(povms: Sequence[Povm], ppt: bool,
                          functional: InequalityFunctional = CGLMP4) -> tuple[Assemblage, float]:
    """Best assemblage for fixed measurements (PPT-constrained if ``ppt``)."""
    if any(p.dim != DIM for p in povms):
        raise ValueError("preparation optimization is defined on 2x2 = 4 dimensional systems")
    prob = preparation_problem(povms, ppt, functional)
    sol = solve(prob, _solver_opts())
    _check(sol, "preparation")
    n_a, _, n_x, _ = functional.coefficients.shape
    sig = np.array([[sol.X[f"s{x}{a}"] for a in range(n_a)] for x in range(n_x)])
    assemblage = _polish_assemblage(sig)
    return assemblage, functional(behavior_from(assemblage, povms))


@functools.lru_cache(maxsize=None)
def _measurement_template(d: int, n_b: int, n_y: int) -> SdpProblem:
    prob = SdpProblem([(f"m{y}{b}", d) for y in range(n_y) for b in range(n_b)], {})
    for y in range(n_y):
        for bk in hermitian_basis(d):
            prob.add_constraint({f"m{y}{b}": bk for b in range(n_b)}, float(np.trace(bk).real))
    return prob


def measurement_problem(assemblage: Assemblage, functional: InequalityFunctional = CGLMP4) -> SdpProblem:
    n_a, n_b, n_x, n_y = functional.coefficients.shape
    c = functional.coefficients
    objective = {
        f"m{y}{b}": sum(c[a, b, x, y] * assemblage.sigmas[x, a] for a in range(n_a) for x in range(n_x))
        for y in range(n_y)
        for b in range(n_b)
    }
    return _measurement_template(assemblage.dim, n_b, n_y).with_objective(objective)


def optimize_measurements(assemblage: Assemblage,
                          functional: InequalityFunctional = CGLMP4) -> tuple[list[Povm], float]:
    prob = measurement_problem(assemblage, functional)
    sol = solve(prob, _solver_opts())
    _check(sol, "measurement")
    _, n_b, _, n_y = functional.coefficients.shape
    eff = np.array([[sol.X[f"m{y}{b}"] for b in range(n_b)] for y in range(n_y)])
    povms = _polish_povms(eff)
    return povms, functional(behavior_from(assemblage, povms))


# --------------------------------------------------------------------------
# driver


@dataclass(frozen=True)
class SeesawConfig:
    restarts: int = 50
    convergence_window: int = 10
    value_tol: float = 1e-7
    master_seed: int = 0
    max_alternations: int = 500

    def __post_init__(self):
        if self.convergence_window < 2:
            raise ValueError("convergence_window must be at least 2")
        if self.restarts < 1:
            raise ValueError("restarts must be at least 1")


@dataclass
class SeesawRecord:
    restart: int
    seed: int
    trace: list[float]
    final_value: float
    assemblage: Assemblage | None
    povms: list[Povm] | None
    termination: str

    def to_dict(self) -> dict:
        return {
            "format": RECORD_FORMAT,
            "restart": self.restart,
            "seed": self.seed,
            "trace": list(self.trace),
            "final_value": self.final_value,
            "termination": self.termination,
            "assemblage": None if self.assemblage is None else _ops_to_lists(self.assemblage.sigmas),
            "povms": None if self.povms is None else _ops_to_lists(np.stack([p.effects for p in self.povms])),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SeesawRecord":
        if data.get("format") != RECORD_FORMAT:
            raise ValueError(f"not a see-saw record: format {data.get('format')!r}")
        asm = None if data["assemblage"] is None else Assemblage(_lists_to_ops(data["assemblage"]))
        povms = None if data["povms"] is None else [Povm(e) for e in _lists_to_ops(data["povms"])]
        return cls(data["restart"], data["seed"], list(data["trace"]), data["final_value"],
                   asm, povms, data["termination"])


def _ops_to_lists(arr: np.ndarray) -> dict:
    return {"shape": list(arr.shape), "real": arr.real.ravel().tolist(), "imag": arr.imag.ravel().tolist()}


def _lists_to_ops(d: dict) -> np.ndarray:
    return (np.array(d["real"]) + 1j * np.array(d["imag"])).reshape(d["shape"])


def restart_seed(master_seed: int, restart: int) -> int:
    return int(np.random.SeedSequence([master_seed, restart]).generate_state(1, np.uint64)[0])


def initial_povms(seed: int, n_settings: int = 2) -> list[Povm]:
    children = np.random.SeedSequence(seed).spawn(n_settings)
    return [random_projective_povm(DIM, DIM, c) for c in children]


def _converged(values: list[float], window: int, tol: float) -> bool:
    if len(values) < window:
        return False
    tail = values[-window:]
    return max(tail) - min(tail) <= tol


def run_restart(povms: Sequence[Povm], ppt: bool, config: SeesawConfig, restart: int = 0,
                seed: int = 0, functional: InequalityFunctional = CGLMP4) -> SeesawRecord:
    """Alternate the two SDPs from the given starting measurements."""
    trace: list[float] = []
    finals: list[float] = []
    assemblage = None
    povms = list(povms)
    termination = "max-alternations"
    for _ in range(config.max_alternations):
        assemblage, v_prep = optimize_preparations(povms, ppt, functional)
        povms, v_meas = optimize_measurements(assemblage, functional)
        trace += [v_prep, v_meas]
        finals.append(v_meas)
        if _converged(finals, config.convergence_window, config.value_tol):
            termination = "converged"
            break
    return SeesawRecord(restart, seed, trace, finals[-1], assemblage, povms, termination)


def run(config: SeesawConfig, ppt: bool,
        functional: InequalityFunctional = CGLMP4) -> tuple[SeesawRecord, list[SeesawRecord]]:
    records: list[SeesawRecord] = []
    for r in range(config.restarts):
        seed = restart_seed(config.master_seed, r)
        try:
            rec = run_restart(initial_povms(seed), ppt, config, r, seed, functional)
        except Exception as exc:  # a failed restart is recorded, not fatal
            log.warning("restart %d failed: %s", r, exc)
            rec = SeesawRecord(r, seed, [], float("-inf"), None, None, f"failed: {exc}")
        log.info("restart %d: %.8f (%s, %d half-steps)", r, rec.final_value, rec.termination, len(rec.trace))
        records.append(rec)
    ok = [rec for rec in records if rec.assemblage is not None]
    if not ok:
        raise SeesawError("all see-saw restarts failed")
    best = max(ok, key=lambda rec: (rec.final_value, -rec.restart))
    return best, records


def save_records(records: Sequence[SeesawRecord], out_dir) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for rec in records:
        p = out / f"restart_{rec.restart:04d}.json"
        tmp = p.with_suffix(".json.tmp")
        tmp.write_text(json.dumps(rec.to_dict(), indent=1))
        tmp.replace(p)
        paths.append(p)
    return paths


def load_record(path) -> SeesawRecord:
    return SeesawRecord.from_dict(json.loads(Path(path).read_text()))
