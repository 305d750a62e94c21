"""Dense primal-dual interior-point solver for small block SDPs.

The public problem is stated over complex Hermitian blocks::

    maximize    sum_i Tr(C_i X_i)
    subject to  sum_i Tr(A_ji X_i) = b_j,    X_i >= 0.

Its dual is ``minimize b.y  s.t.  S_i = sum_j y_j A_ji - C_i >= 0``.

Internally each n x n Hermitian block is replaced by the real symmetric
2n x 2n matrix ``[[Re, -Im], [Im, Re]]`` and the problem is solved in
minimization form with an infeasible-start Mehrotra predictor-corrector using
the HKM search direction.
"""

from __future__ import annotations

import io
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import scipy.linalg

log = logging.getLogger(__name__)

FORMAT_HEADER = "# ctxdim-sdp v1"


class SdpFormatError(ValueError):
    pass


@dataclass(frozen=True)
class Constraint:
    """``sum_i Tr(coeffs[i] X_i) = rhs``; missing blocks have zero coefficient."""

    coeffs: Mapping[str, np.ndarray]
    rhs: float


@dataclass
class SdpProblem:
    blocks: list[tuple[str, int]]
    objective: dict[str, np.ndarray]
    constraints: list[Constraint] = field(default_factory=list)
    # compiled constraint data, shared by problems made with with_objective
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        names = [n for n, _ in self.blocks]
        if len(set(names)) != len(names):
            raise ValueError("block names must be unique")
        dims = dict(self.blocks)
        for n, c in self.objective.items():
            _check_coeff(n, c, dims)
        for j, con in enumerate(self.constraints):
            for n, a in con.coeffs.items():
                _check_coeff(n, a, dims, f"constraint {j}")

    @property
    def block_dims(self) -> dict[str, int]:
        return dict(self.blocks)

    def add_constraint(self, coeffs: Mapping[str, np.ndarray], rhs: float) -> None:
        dims = self.block_dims
        for n, a in coeffs.items():
            _check_coeff(n, a, dims, f"constraint {len(self.constraints)}")
        self.constraints.append(Constraint(dict(coeffs), float(rhs)))
        self._cache.clear()

    def with_objective(self, objective: dict[str, np.ndarray]) -> "SdpProblem":
        """Same blocks and constraints, new objective; constraint compilation is reused."""
        out = SdpProblem(self.blocks, objective)
        out.constraints = self.constraints
        out._cache = self._cache
        return out


def _check_coeff(name, mat, dims, where="objective"):
    if name not in dims:
        raise ValueError(f"{where}: unknown block {name!r}")
    m = np.asarray(mat)
    if m.shape != (dims[name], dims[name]):
        raise ValueError(f"{where}: block {name!r} expects {dims[name]}x{dims[name]}, got {m.shape}")
    if np.max(np.abs(m - m.conj().T), initial=0.0) > 1e-10:
        raise ValueError(f"{where}: coefficient for block {name!r} is not Hermitian")


@dataclass
class SdpSolution:
    status: str  # optimal | infeasible | unbounded | max-iterations | numerical-error
    X: dict[str, np.ndarray]
    y: np.ndarray
    S: dict[str, np.ndarray]
    objective: float
    dual_objective: float
    gap: float
    primal_residual: float
    dual_residual: float
    iterations: int
    history: list[dict] = field(default_factory=list)
    # Farkas ray for infeasible / unbounded problems, in public max-form terms
    certificate: dict | None = None
    dropped_constraints: tuple[int, ...] = ()


@dataclass(frozen=True)
class SolverOptions:
    max_iter: int = 200
    gap_tol: float = 1e-8
    feas_tol: float = 1e-8
    infeas_tol: float = 1e-8
    step_fraction: float = 0.98
    rank_tol: float = 1e-10
    stall_iterations: int = 8


# --------------------------------------------------------------------------
# real embedding


def embed(h: np.ndarray) -> np.ndarray:
    h = np.asarray(h)
    n = h.shape[-1]
    out = np.empty(h.shape[:-2] + (2 * n, 2 * n))
    out[..., :n, :n] = out[..., n:, n:] = h.real
    out[..., :n, n:] = -h.imag
    out[..., n:, :n] = h.imag
    return out


def unembed(x: np.ndarray) -> np.ndarray:
    n = x.shape[-1] // 2
    re = 0.5 * (x[..., :n, :n] + x[..., n:, n:])
    im = 0.5 * (x[..., n:, :n] - x[..., :n, n:])
    return re + 1j * im


class _Group:
    """Blocks of one size stacked for batched linear algebra."""

    def __init__(self, n: int, names: list[str]):
        self.n = n
        self.names = names

    @property
    def k(self) -> int:
        return len(self.names)


class _Compiled:
    def __init__(self, problem: SdpProblem, opts: SolverOptions):
        dims = problem.block_dims
        sizes = sorted({2 * d for d in dims.values()})
        self.groups = [_Group(s, [n for n, d in problem.blocks if 2 * d == s]) for s in sizes]
        self.where = {}
        for gi, g in enumerate(self.groups):
            for bi, n in enumerate(g.names):
                self.where[n] = (gi, bi)
        key = ("rows", opts.rank_tol, len(problem.constraints))
        if key not in problem._cache:
            problem._cache.clear()
            problem._cache[key] = self._compile_rows(problem, opts)
        (self.keep, self.dropped, self.inconsistent, self.row_scale, self.b,
         self.a, self.a_flat) = problem._cache[key]
        self.m = len(self.b)
        # minimization form
        self.c = [np.zeros((g.k, g.n, g.n)) for g in self.groups]
        for name, coeff in problem.objective.items():
            gi, bi = self.where[name]
            self.c[gi][bi] = -0.5 * embed(np.asarray(coeff, dtype=complex))
        self.n_total = sum(g.k * g.n for g in self.groups)

    def _compile_rows(self, problem: SdpProblem, opts: SolverOptions):
        m = len(problem.constraints)
        a_full = [np.zeros((m, g.k, g.n, g.n)) for g in self.groups]
        b = np.array([c.rhs for c in problem.constraints], dtype=float)
        for j, con in enumerate(problem.constraints):
            for name, coeff in con.coeffs.items():
                gi, bi = self.where[name]
                a_full[gi][j, bi] = 0.5 * embed(np.asarray(coeff, dtype=complex))
        flat = np.concatenate([a.reshape(m, -1) for a in a_full], axis=1) if m else np.zeros((0, 1))
        keep, dropped, inconsistent = _independent_rows(flat, b, opts.rank_tol)
        flat = flat[keep]
        b = b[keep]
        # unit-norm rows; the stored scale maps internal multipliers back
        norms = np.linalg.norm(flat, axis=1)
        norms[norms == 0] = 1.0
        m = len(b)
        a, off = [], 0
        for g in self.groups:
            width = g.k * g.n * g.n
            a.append((flat[:, off : off + width] / norms[:, None]).reshape(m, g.k, g.n, g.n))
            off += width
        a_flat = np.concatenate([x.reshape(m, -1) for x in a], axis=1)
        return keep, dropped, inconsistent, norms, b / norms, a, a_flat

    def op(self, xs) -> np.ndarray:
        return self.a_flat @ np.concatenate([x.reshape(-1) for x in xs])

    def adj(self, y) -> list[np.ndarray]:
        v = y @ self.a_flat
        out, off = [], 0
        for g in self.groups:
            width = g.k * g.n * g.n
            out.append(v[off : off + width].reshape(g.k, g.n, g.n))
            off += width
        return out


def _independent_rows(flat, b, tol):
    m = flat.shape[0]
    if m == 0:
        return np.arange(0), (), False
    # pivot on unit rows so that among parallel rows the earliest is kept
    norms = np.linalg.norm(flat, axis=1)
    unit = flat / np.where(norms > 0, norms, 1.0)[:, None]
    _, r, piv = scipy.linalg.qr(unit.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    rank = int(np.sum(diag > tol))
    keep = np.sort(piv[:rank])
    dropped = tuple(int(j) for j in sorted(set(range(m)) - set(keep.tolist())))
    inconsistent = False
    if dropped:
        coef, *_ = np.linalg.lstsq(flat[keep].T, flat[list(dropped)].T, rcond=None)
        pred = coef.T @ b[keep]
        inconsistent = bool(np.max(np.abs(pred - b[list(dropped)])) > 1e-8 * (1 + np.max(np.abs(b))))
        log.info("removed %d linearly dependent constraint rows: %s", len(dropped), dropped)
    return keep, dropped, inconsistent


def _sym(x):
    return 0.5 * (x + np.swapaxes(x, -1, -2))


def _inner(xs, ss) -> float:
    return float(sum(np.sum(x * s) for x, s in zip(xs, ss)))


def _max_step(xs, dxs) -> float:
    """Largest alpha with X + alpha dX >= 0 (inf if unbounded)."""
    worst = 0.0
    for x, dx in zip(xs, dxs):
        ch = np.linalg.cholesky(x)
        inv = np.linalg.inv(ch)
        w = inv @ dx @ np.swapaxes(inv, -1, -2)
        lam = np.linalg.eigvalsh(_sym(w))[:, 0].min()
        worst = min(worst, lam)
    return np.inf if worst >= 0 else -1.0 / worst


def _is_pd(xs) -> bool:
    try:
        for x in xs:
            np.linalg.cholesky(x)
    except np.linalg.LinAlgError:
        return False
    return True


def solve(problem: SdpProblem, options: SolverOptions | None = None, **kw) -> SdpSolution:
    opts = options or SolverOptions(**kw)
    cp = _Compiled(problem, opts)
    groups = cp.groups

    if cp.inconsistent:
        return _finish(problem, cp, None, None, None, "infeasible", 0, [])

    # starting point scaled to the data, X = xi I, S = eta I
    n_tot = cp.n_total
    a_norms = np.linalg.norm(cp.a_flat, axis=1) if cp.m else np.array([1.0])
    c_norm = max(np.linalg.norm(np.concatenate([c.reshape(-1) for c in cp.c])), 1.0)
    xi = max(10.0, np.sqrt(n_tot), n_tot * np.max((1 + np.abs(cp.b)) / (1 + a_norms), initial=1.0))
    eta = max(10.0, np.sqrt(n_tot), c_norm, np.max(a_norms, initial=1.0))
    xs = [xi * np.broadcast_to(np.eye(g.n), (g.k, g.n, g.n)).copy() for g in groups]
    ss = [eta * np.broadcast_to(np.eye(g.n), (g.k, g.n, g.n)).copy() for g in groups]
    y = np.zeros(cp.m)

    b_norm = 1 + np.linalg.norm(cp.b)
    # rows are unit-norm and independent, so A A^T is well conditioned
    gram = scipy.linalg.cho_factor(cp.a_flat @ cp.a_flat.T) if cp.m else None
    history: list[dict] = []
    status = "max-iterations"
    best = None  # (merit, iteration, xs, y, ss)
    it = 0
    for it in range(1, opts.max_iter + 1):
        rp = cp.b - cp.op(xs)
        aty = cp.adj(y)
        rd = [c - s - t for c, s, t in zip(cp.c, ss, aty)]
        mu = _inner(xs, ss) / n_tot
        pobj = _inner(cp.c, xs)
        dobj = float(cp.b @ y)
        pres = np.linalg.norm(rp) / b_norm
        dres = np.sqrt(sum(np.sum(r * r) for r in rd)) / (1 + c_norm)
        rel_gap = abs(pobj - dobj) / (1 + abs(pobj) + abs(dobj))
        history.append(
            dict(iteration=it - 1, primal_objective=-pobj, dual_objective=-dobj,
                 primal_residual=float(np.linalg.norm(rp)), dual_residual=float(dres * (1 + c_norm)),
                 mu=mu)
        )
        merit = max(rel_gap / opts.gap_tol, pres / opts.feas_tol, dres / opts.feas_tol)
        if best is None or merit < best[0]:
            best = (merit, it, xs, y, ss)
        if merit <= 1.0:
            status = "optimal"
            break
        cert = _infeasibility(cp, xs, y, ss, opts)
        if cert is not None:
            status = cert
            break
        if it - best[1] > opts.stall_iterations:
            status = "stalled"
            break

        try:
            sinv = [np.linalg.inv(s) for s in ss]
            # Schur complement M_jl = Tr(A_j X A_l S^-1)
            gm = []
            for a, x, si in zip(cp.a, xs, sinv):
                gm.append((x[None] @ a @ si[None]).reshape(cp.m, -1))
            g_flat = np.concatenate(gm, axis=1)
            schur = cp.a_flat @ g_flat.T
            schur = 0.5 * (schur + schur.T)
            factor = scipy.linalg.cho_factor(schur)

            solve_m = lambda r: scipy.linalg.cho_solve(factor, r)
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgError):
            try:
                schur_pinv = np.linalg.pinv(schur)
                solve_m = lambda r: schur_pinv @ r
            except Exception:
                status = "numerical-error"
                break

        def direction(rc):
            # dX = Rc - X dS S^-1, dS = Rd - A^T dy
            xrds = [x @ r @ si for x, r, si in zip(xs, rd, sinv)]
            rhs = rp - cp.op(rc) + cp.op(xrds)
            dy = solve_m(rhs)
            atdy = cp.adj(dy)
            ds = [r - t for r, t in zip(rd, atdy)]
            dx = [_sym(r - x @ d @ si) for r, x, d, si in zip(rc, xs, ds, sinv)]
            for _ in range(2):
                # refine against the exact operator; the Schur matrix loses
                # accuracy as X and S approach complementary singular limits
                err = rp - cp.op(dx)
                if np.linalg.norm(err) <= 1e-14 * b_norm:
                    break
                corr = solve_m(err)
                atc = cp.adj(corr)
                dy = dy + corr
                ds = [d - t for d, t in zip(ds, atc)]
                dx = [d + _sym(x @ t @ si) for d, x, t, si in zip(dx, xs, atc, sinv)]
            if gram is not None:
                # whatever the Schur solve left over, A(dX) = rp holds exactly
                # afterwards, so a feasible X stays feasible for any step
                fix = cp.adj(scipy.linalg.cho_solve(gram, rp - cp.op(dx)))
                dx = [d + _sym(t) for d, t in zip(dx, fix)]
            return dx, dy, ds

        # predictor
        rc_aff = [-x for x in xs]
        dx_a, dy_a, ds_a = direction(rc_aff)
        ap = min(1.0, _max_step(xs, dx_a))
        ad = min(1.0, _max_step(ss, ds_a))
        mu_aff = _inner([x + ap * d for x, d in zip(xs, dx_a)], [s + ad * d for s, d in zip(ss, ds_a)]) / n_tot
        sigma = min(1.0, max(0.0, (mu_aff / mu) ** 3)) if mu > 0 else 0.0

        # corrector
        rc = [sigma * mu * si - x - dxa @ dsa @ si for si, x, dxa, dsa in zip(sinv, xs, dx_a, ds_a)]
        dx, dy, ds = direction(rc)
        ap = min(1.0, opts.step_fraction * _max_step(xs, dx))
        ad = min(1.0, opts.step_fraction * _max_step(ss, ds))
        for _ in range(30):
            new_xs = [x + ap * d for x, d in zip(xs, dx)]
            new_ss = [s + ad * d for s, d in zip(ss, ds)]
            if _is_pd(new_xs) and _is_pd(new_ss):
                break
            ap *= 0.5
            ad *= 0.5
        else:
            status = "numerical-error"
            break
        xs, ss = new_xs, new_ss
        y = y + ad * dy
    if status in ("max-iterations", "stalled", "numerical-error") and best is not None:
        # fall back to the best iterate; it is accepted when it meets the
        # public optimality thresholds even if the internal ones were missed
        _, it_best, xs, y, ss = best
        sol = _finish(problem, cp, xs, y, ss, "optimal", it_best - 1, history)
        if _meets_public_thresholds(sol):
            return sol
        sol.status = "max-iterations" if status == "stalled" else status
        return sol
    return _finish(problem, cp, xs, y, ss, status, it - 1, history)


def _meets_public_thresholds(sol: "SdpSolution") -> bool:
    return (
        abs(sol.gap) <= 1e-7 * (1 + abs(sol.objective))
        and sol.primal_residual <= 1e-8
        and sol.dual_residual <= 1e-8
    )


def _infeasibility(cp: _Compiled, xs, y, ss, opts: SolverOptions) -> str | None:
    by = float(cp.b @ y)
    if by > 0:
        # primal infeasible: A^T y <= 0 with b.y > 0
        aty = cp.adj(y / by)
        lam = max(np.linalg.eigvalsh(_sym(t))[:, -1].max() for t in aty)
        if lam < opts.infeas_tol:
            return "infeasible"
    cx = _inner(cp.c, xs)
    if cx < 0:
        # dual infeasible: A(X) = 0, X >= 0, C.X < 0
        res = np.linalg.norm(cp.op([x / -cx for x in xs]))
        if res < opts.infeas_tol:
            return "unbounded"
    return None


def _finish(problem, cp: _Compiled, xs, y, ss, status, iterations, history):
    names = [n for n, _ in problem.blocks]
    dims = problem.block_dims
    m_orig = len(problem.constraints)
    if xs is None:
        empty = {n: np.zeros((dims[n], dims[n]), complex) for n in names}
        return SdpSolution(status, empty, np.zeros(m_orig), dict(empty), np.nan, np.nan, np.nan,
                           np.nan, np.nan, iterations, history, None, cp.dropped)
    X, S = {}, {}
    for gi, g in enumerate(cp.groups):
        for bi, n in enumerate(g.names):
            X[n] = unembed(xs[gi][bi])
            # the embedded objective and rows carry a factor 1/2
            S[n] = 2.0 * unembed(ss[gi][bi])
    # back to public max-form multipliers on the original rows
    y_pub = np.zeros(m_orig)
    y_pub[cp.keep] = -y / cp.row_scale
    certificate = None
    if status == "infeasible":
        by = float(cp.b @ y)
        certificate = {"kind": "primal-infeasible", "y": y_pub / by}
    elif status == "unbounded":
        cx = -_inner(cp.c, xs)
        certificate = {"kind": "dual-infeasible", "X": {n: v / cx for n, v in X.items()}}
    pobj = objective_value(problem, X)
    dobj = float(np.dot([c.rhs for c in problem.constraints], y_pub)) if m_orig else 0.0
    rep = residuals(problem, X, y_pub, S)
    return SdpSolution(
        status=status, X=X, y=y_pub, S=S, objective=pobj, dual_objective=dobj,
        gap=dobj - pobj, primal_residual=rep["primal_residual"], dual_residual=rep["dual_residual"],
        iterations=iterations, history=history, certificate=certificate, dropped_constraints=cp.dropped,
    )


# --------------------------------------------------------------------------
# independent checks


def _tr(a, x) -> float:
    return float(np.real(np.sum(np.asarray(a) * np.asarray(x).T)))


def objective_value(problem: SdpProblem, X: Mapping[str, np.ndarray]) -> float:
    return sum(_tr(c, X[n]) for n, c in problem.objective.items())


def _block_rows(problem: SdpProblem) -> dict:
    """Per block: constraint indices touching it and their stacked coefficients."""
    key = ("block-rows", len(problem.constraints))
    if key not in problem._cache:
        rows: dict = {n: ([], []) for n, _ in problem.blocks}
        for j, con in enumerate(problem.constraints):
            for n, a in con.coeffs.items():
                rows[n][0].append(j)
                rows[n][1].append(np.asarray(a, dtype=complex))
        problem._cache[key] = {
            n: (np.array(idx, dtype=int), np.array(mats) if mats else None) for n, (idx, mats) in rows.items()
        }
    return problem._cache[key]


def residuals(problem: SdpProblem, X, y, S) -> dict:
    dims = problem.block_dims
    m = len(problem.constraints)
    lhs = np.zeros(m)
    dres = 0.0
    y = np.asarray(y, dtype=float)
    for n, (idx, mats) in _block_rows(problem).items():
        d = dims[n]
        z = -np.asarray(problem.objective.get(n, np.zeros((d, d))), dtype=complex)
        if mats is not None:
            np.add.at(lhs, idx, np.einsum("kij,ji->k", mats, np.asarray(X[n])).real)
            z = z + np.einsum("k,kij->ij", y[idx], mats)
        dres = max(dres, float(np.max(np.abs(z - S[n]))))
    rhs = np.array([c.rhs for c in problem.constraints])
    pres = float(np.max(np.abs(lhs - rhs), initial=0.0))
    return {"primal_residual": pres, "dual_residual": dres}


def validate_solution(problem: SdpProblem, solution: SdpSolution) -> dict:
    """Recompute feasibility, PSD margins and complementarity from scratch."""
    report: dict = {"status": solution.status}
    if solution.status == "infeasible" and solution.certificate:
        y = solution.certificate["y"]
        worst = np.inf
        for n, d in problem.blocks:
            z = np.zeros((d, d), complex)
            for yj, con in zip(y, problem.constraints):
                if n in con.coeffs:
                    z = z + yj * np.asarray(con.coeffs[n])
            worst = min(worst, np.linalg.eigvalsh(0.5 * (z + z.conj().T))[0])
        by = float(np.dot([c.rhs for c in problem.constraints], y))
        report.update(certificate_min_eig=float(worst), certificate_rhs=by,
                      farkas_ok=bool(worst >= -1e-7 and by < 0))
        return report
    if solution.status == "unbounded" and solution.certificate:
        X = solution.certificate["X"]
        res = max((abs(sum(_tr(a, X[n]) for n, a in con.coeffs.items())) for con in problem.constraints), default=0.0)
        lam = min(np.linalg.eigvalsh(0.5 * (x + x.conj().T))[0] for x in X.values())
        report.update(certificate_residual=res, certificate_min_eig=float(lam),
                      certificate_objective=objective_value(problem, X),
                      farkas_ok=bool(res < 1e-6 and lam >= -1e-7 and objective_value(problem, X) > 0))
        return report
    X, S, y = solution.X, solution.S, solution.y
    report.update(residuals(problem, X, y, S))
    report["min_eig_X"] = {n: float(np.linalg.eigvalsh(0.5 * (v + v.conj().T))[0]) for n, v in X.items()}
    report["min_eig_S"] = {n: float(np.linalg.eigvalsh(0.5 * (v + v.conj().T))[0]) for n, v in S.items()}
    report["complementarity"] = {n: _tr(X[n], S[n]) for n in X}
    pobj = objective_value(problem, X)
    dobj = float(np.dot([c.rhs for c in problem.constraints], y))
    report["objective"] = pobj
    report["dual_objective"] = dobj
    report["gap"] = dobj - pobj
    report["ok"] = bool(
        report["primal_residual"] <= 1e-8
        and report["dual_residual"] <= 1e-8
        and min(report["min_eig_X"].values()) >= -1e-8
        and min(report["min_eig_S"].values()) >= -1e-8
        and abs(report["gap"]) <= 1e-7 * (1 + abs(pobj))
    )
    return report


# --------------------------------------------------------------------------
# plain-text problem format


def _fmt(v: float) -> str:
    return repr(float(v))


def _write_matrix(out, name, mat):
    mat = np.asarray(mat, dtype=complex)
    for i in range(mat.shape[0]):
        for j in range(i, mat.shape[1]):
            v = mat[i, j]
            if v != 0:
                out.write(f"{name} {i} {j} {_fmt(v.real)} {_fmt(v.imag)}\n")


def dumps(problem: SdpProblem) -> str:
    out = io.StringIO()
    out.write(FORMAT_HEADER + "\n")
    out.write(f"blocks {len(problem.blocks)}\n")
    for n, d in problem.blocks:
        out.write(f"block {n} {d}\n")
    out.write("objective\n")
    for n, c in problem.objective.items():
        _write_matrix(out, n, c)
    out.write(f"constraints {len(problem.constraints)}\n")
    for j, con in enumerate(problem.constraints):
        out.write(f"constraint {j} rhs {_fmt(con.rhs)}\n")
        for n, a in con.coeffs.items():
            _write_matrix(out, n, a)
    out.write("end\n")
    return out.getvalue()


def loads(text: str) -> SdpProblem:
    lines = text.splitlines()
    if not lines or lines[0].strip() != FORMAT_HEADER:
        raise SdpFormatError(f"line 1: expected header {FORMAT_HEADER!r}")
    blocks: list[tuple[str, int]] = []
    objective: dict[str, np.ndarray] = {}
    constraints: list[tuple[dict, float]] = []
    target = None
    dims: dict[str, int] = {}
    for lineno, raw in enumerate(lines[1:], start=2):
        tok = raw.split()
        if not tok or tok[0].startswith("#"):
            continue
        try:
            if tok[0] == "blocks":
                continue
            if tok[0] == "block":
                blocks.append((tok[1], int(tok[2])))
                dims[tok[1]] = int(tok[2])
            elif tok[0] == "objective":
                target = objective
            elif tok[0] == "constraints":
                target = None
            elif tok[0] == "constraint":
                if tok[2] != "rhs":
                    raise SdpFormatError(f"line {lineno}: expected 'constraint <j> rhs <value>'")
                constraints.append(({}, float(tok[3])))
                target = constraints[-1][0]
            elif tok[0] == "end":
                break
            else:
                if target is None:
                    raise SdpFormatError(f"line {lineno}: entry outside objective/constraint section")
                name, i, j, re, im = tok[0], int(tok[1]), int(tok[2]), float(tok[3]), float(tok[4])
                if name not in dims:
                    raise SdpFormatError(f"line {lineno}: unknown block {name!r}")
                mat = target.setdefault(name, np.zeros((dims[name], dims[name]), complex))
                mat[i, j] = re + 1j * im
                mat[j, i] = re - 1j * im
                if i == j and im != 0:
                    raise SdpFormatError(f"line {lineno}: diagonal entry must be real")
        except (IndexError, ValueError) as exc:
            if isinstance(exc, SdpFormatError):
                raise
            raise SdpFormatError(f"line {lineno}: malformed entry {raw!r} ({exc})") from exc
    return SdpProblem(blocks, objective, [Constraint(c, r) for c, r in constraints])


def dump(problem: SdpProblem, path) -> None:
    Path(path).write_text(dumps(problem))


def load(path) -> SdpProblem:
    return loads(Path(path).read_text())
