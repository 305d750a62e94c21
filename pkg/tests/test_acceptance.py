"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The lines are also collected and repeated in the terminal summary.
"""

import json
import time

import numpy as np
import pytest

from ctxdim import tables
from ctxdim.formats import dump_montecarlo, ingest_behavior, ingest_chsh_terms
from ctxdim.inequalities import (
    CGLMP4,
    CHSH,
    Behavior,
    behavior_from,
    canonical_cglmp4_optimal_setup,
    canonical_cglmp4_separable_setup,
    cglmp4_measurements,
    chsh_value,
    classical_max,
)
from ctxdim.photonics import (
    CGLMP4_STATIONS,
    NoiseModel,
    canonical_photonic_setup,
    fitted_cglmp4_preparations,
    monte_carlo,
    experimental_noise,
    predict_behavior,
    station_povm,
)
from ctxdim.quantum import (
    Povm,
    ghjw_dilation,
    partial_transpose,
    random_density_matrix,
    random_povm,
    steer,
)
from ctxdim.seesaw import SeesawConfig, optimize_preparations, run
from ctxdim.sdp import SdpProblem, solve, validate_solution

from oracles import random_trace_sdp, smoothed_dual_value

MASTER_SEED = 0
MC_SAMPLES = 10_000
MC_SEED = 0

OPTIMAL_DISTINCT = (0.7833, 0.1050, 0.0547, 0.0569)
SEPARABLE_DISTINCT = (0.8211, 0.0453, 0.0324, 0.1012)


def timed(fn, *args, **kw):
    t = time.perf_counter()
    out = fn(*args, **kw)
    return out, time.perf_counter() - t


# --------------------------------------------------------------------------
# shared runs for criteria 7, 11 and 12


def seesaw_reports():
    """Both see-saw runs; returns (best values, records, serialized reports, seconds)."""
    out = {}
    t = time.perf_counter()
    for ppt in (True, False):
        best, records = run(SeesawConfig(restarts=50, master_seed=MASTER_SEED), ppt)
        text = json.dumps([r.to_dict() for r in records], sort_keys=True)
        out[ppt] = (best, records, text)
    return out, time.perf_counter() - t


def photonic_reports():
    t = time.perf_counter()
    setups = {name: canonical_photonic_setup(name) for name in ("optimal", "separable", "chsh")}
    res = {}
    for name in ("optimal", "chsh"):
        s = setups[name]
        res[(name, "full")] = monte_carlo(s, experimental_noise(name), MC_SAMPLES, MC_SEED)
        res[(name, "angles")] = monte_carlo(s, experimental_noise(name, poisson=False), MC_SAMPLES, MC_SEED)
        res[(name, "poisson")] = monte_carlo(s, experimental_noise(name, angles=False), MC_SAMPLES, MC_SEED)
        res[(name, "zero")] = monte_carlo(s, NoiseModel(motorized_sigma=0, manual_sigma=0), MC_SAMPLES, MC_SEED)
    texts = {k: dump_montecarlo(v, setups[k[0]].functional.name) for k, v in res.items()}
    return setups, res, texts, time.perf_counter() - t


@pytest.fixture(scope="module")
def seesaw_first():
    return seesaw_reports()


@pytest.fixture(scope="module")
def photonic_first():
    return photonic_reports()


# --------------------------------------------------------------------------


def test_criterion_01_optimal_setup(acceptance):
    (asm, povms), dt1 = timed(canonical_cglmp4_optimal_setup)
    value, dt2 = timed(lambda: CGLMP4(behavior_from(asm, povms)))
    dt = dt1 + dt2
    ok = abs(value - 0.36476) <= 5e-4 and dt < 1.0
    assert acceptance(1, ok, f"I4 = {value:.8f} (target 0.36476 +/- 5e-4), {dt:.3f} s")


def test_criterion_02_separable_setup(acceptance):
    t = time.perf_counter()
    asm, povms = canonical_cglmp4_separable_setup()
    value = CGLMP4(behavior_from(asm, povms))
    min_pt = min(
        np.linalg.eigvalsh(partial_transpose(s, "second", (2, 2)))[0] for s in asm.sigmas.reshape(-1, 4, 4)
    )
    dt = time.perf_counter() - t
    ok = abs(value - 0.33609) <= 5e-4 and min_pt >= -1e-12 and dt < 1.0
    assert acceptance(2, ok, f"I4 = {value:.8f} (target 0.33609 +/- 5e-4), min PT eigenvalue {min_pt:.2e}, {dt:.3f} s")


def _table_match(name, setup, distinct):
    ref = behavior_from(*setup())
    worst = 0.0
    seen = set()
    for ((x, y), order), rows in zip(tables.BLOCKS, tables._DATA[(name, "expected")]):
        for (a, b), printed in zip(order, rows):
            v = 4 * ref.table[a, b, x, y]  # conditional p(b|a,x,y) under the uniform prior
            worst = max(worst, abs(v - printed))
            near = [d for d in distinct if abs(v - d) <= 5e-4]
            if not near:
                return False, worst
            seen.add(near[0])
    return worst <= 5e-4 and seen == set(distinct), worst


def test_criterion_03_expected_tables(acceptance):
    t = time.perf_counter()
    ok8, w8 = _table_match("optimal", canonical_cglmp4_optimal_setup, OPTIMAL_DISTINCT)
    ok7, w7 = _table_match("separable", canonical_cglmp4_separable_setup, SEPARABLE_DISTINCT)
    dt = time.perf_counter() - t
    ok = ok8 and ok7 and dt < 1.0
    assert acceptance(3, ok, f"optimal max dev {w8:.1e}, separable max dev {w7:.1e} (tol 5e-4), {dt:.3f} s")


def test_criterion_04_measured_sums(acceptance):
    i7 = CGLMP4(ingest_behavior(tables.recorded_table("separable", "measured"), functional="cglmp4"))
    i8 = CGLMP4(ingest_behavior(tables.recorded_table("optimal", "measured"), functional="cglmp4"))
    s6 = ingest_chsh_terms(tables.CHSH_TERMS_MEASURED)
    # the CHSH terms sum to 2.8022 exactly in decimal, 1e-4 from the printed 2.8021;
    # the factor absorbs binary rounding of that decimal edge
    guard = 1e-4 * (1 + 1e-9)
    ok7 = abs(i7 - 0.3292) <= 1e-4
    ok8 = abs(i8 - 0.3631) <= 1e-4
    ok6 = abs(s6 - 2.8021) <= guard
    detail = (
        f"separable I4 = {i7:.5f} vs 0.3292 [{'ok' if ok7 else 'off'}], "
        f"optimal I4 = {i8:.5f} vs 0.3631 [{'ok' if ok8 else 'off'}], "
        f"CHSH S = {s6:.5f} vs 2.8021 [{'ok' if ok6 else 'off'}] (tol 1e-4)"
    )
    assert acceptance(4, ok7 and ok8 and ok6, detail)


def test_criterion_05_classical_bounds(acceptance):
    t = time.perf_counter()
    v4, _ = classical_max(CGLMP4)
    v2, _ = classical_max(CHSH)
    dt = time.perf_counter() - t
    n4 = 4**2 * 4**2
    n2 = 2**2 * 2**2
    ok = v4 == 0.0 and v2 == 2.0 and n4 == 256 and n2 == 16 and dt < 1.0
    assert acceptance(5, ok, f"CGLMP4 max {v4!r} over {n4} vertices, CHSH max {v2!r} over {n2}, {dt:.3f} s")


def test_criterion_06_sdp_solver(acceptance):
    t = time.perf_counter()
    worst_gap = worst_res = worst_ref = 0.0
    ok = True

    def check(prob, reference):
        nonlocal worst_gap, worst_res, worst_ref, ok
        sol = solve(prob)
        rep = validate_solution(prob, sol)
        gap = abs(rep["gap"]) / (1 + abs(rep["objective"]))
        res = max(rep["primal_residual"], rep["dual_residual"])
        dev = abs(rep["objective"] - reference)
        worst_gap, worst_res, worst_ref = max(worst_gap, gap), max(worst_res, res), max(worst_ref, dev)
        ok &= sol.status == "optimal" and gap <= 1e-7 and res <= 1e-8 and dev <= 1e-4

    rng = np.random.default_rng(20240)
    # lambda_max fixture: max Tr(CX) over density matrices
    g = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
    c = (g + g.conj().T) / 2
    fixture = SdpProblem([("X", 6)], {"X": c})
    fixture.add_constraint({"X": np.eye(6)}, 1.0)
    check(fixture, np.linalg.eigvalsh(c)[-1])
    for _ in range(50):
        prob, _ = random_trace_sdp(rng, max_block=8, max_constraints=40)
        check(prob, smoothed_dual_value(prob))
    dt = time.perf_counter() - t
    ok &= dt < 60
    assert acceptance(
        6, ok,
        f"51 problems: worst rel gap {worst_gap:.1e}, residual {worst_res:.1e}, "
        f"reference deviation {worst_ref:.1e}, {dt:.1f} s",
    )


def _seesaw_verdict(runs, dt):
    lo_ppt, hi_ppt = 0.3355, 0.33609 + 1e-5
    lo_free, hi_free = 0.364, 0.36476 + 1e-5
    b_ppt = runs[True][0].final_value
    b_free = runs[False][0].final_value
    # every half-step, measurement and preparation, may not lose value beyond solver tolerance
    dip = max(
        max((a - b for a, b in zip(r.trace, r.trace[1:])), default=0.0)
        for ppt in (True, False)
        for r in runs[ppt][1]
    )
    failed = sum(r.assemblage is None for ppt in (True, False) for r in runs[ppt][1])
    ok = lo_ppt <= b_ppt <= hi_ppt and lo_free <= b_free <= hi_free and dip <= 1e-7 and dt < 480
    detail = (
        f"ppt best {b_ppt:.8f} in [{lo_ppt}, {hi_ppt:.5f}], free best {b_free:.8f} in [{lo_free}, {hi_free:.5f}], "
        f"largest trace dip {dip:.1e}, failed restarts {failed}, {dt:.0f} s"
    )
    return ok, detail


def test_criterion_07_seesaw(acceptance, seesaw_first):
    runs, dt = seesaw_first
    ok, detail = _seesaw_verdict(runs, dt)
    assert acceptance(7, ok, detail)


def test_criterion_08_fixed_measurements(acceptance):
    t = time.perf_counter()
    povms = cglmp4_measurements()
    _, v_ppt = optimize_preparations(povms, ppt=True)
    _, v_free = optimize_preparations(povms, ppt=False)
    dt = time.perf_counter() - t
    ok = abs(v_ppt - 0.33609) <= 1e-5 and abs(v_free - 0.36476) <= 1e-5 and dt < 5
    assert acceptance(8, ok, f"ppt {v_ppt:.8f} (0.33609 +/- 1e-5), free {v_free:.8f} (0.36476 +/- 1e-5), {dt:.2f} s")


def test_criterion_09_ghjw(acceptance):
    rng = np.random.default_rng(9)
    worst = 0.0
    ranks = []
    for k in range(100):
        rank = 1 + k % 4
        # kets (G H) on A (x) B share the row space of H, so the B marginal has rank <= rank
        h = rng.normal(size=(rank, 4)) + 1j * rng.normal(size=(rank, 4))
        n_mix = 2 if k % 8 == 7 else 1
        rho = np.zeros((16, 16), complex)
        for _ in range(n_mix):
            g = rng.normal(size=(4, rank)) + 1j * rng.normal(size=(4, rank))
            psi = (g @ h).reshape(-1)
            psi /= np.linalg.norm(psi)
            rho += np.outer(psi, psi.conj()) / n_mix
        povms = [random_povm(4, 4, rng) for _ in range(2)]
        asm = steer(rho, povms)
        ranks.append(np.linalg.matrix_rank(asm.sigma_star, tol=1e-10))
        back = steer(*ghjw_dilation(asm))
        worst = max(worst, float(np.max(np.abs(back.sigmas - asm.sigmas))))
    deficient = sum(r < 4 for r in ranks)
    ok = worst <= 1e-10 and deficient > 0
    assert acceptance(9, ok, f"100 assemblages ({deficient} with rank-deficient sigma_*), max error {worst:.1e}")


def _local_behavior(rng, n_a, n_b):
    # p(ab|xy) = sum_l p(l) p(a|x,l) p(b|y,l)
    n_l = int(rng.integers(1, 12))
    w = rng.dirichlet(np.ones(n_l))
    if rng.random() < 0.5:
        pa = np.eye(n_a)[rng.integers(0, n_a, (n_l, 2))]  # deterministic responses [l, x, a]
        pb = np.eye(n_b)[rng.integers(0, n_b, (n_l, 2))]
    else:
        pa = rng.dirichlet(np.ones(n_a) * 0.3, size=(n_l, 2))
        pb = rng.dirichlet(np.ones(n_b) * 0.3, size=(n_l, 2))
    return np.einsum("l,lxa,lyb->abxy", w, pa, pb)


def _rank_one_povm(rng, d, n):
    vs = rng.normal(size=(n, d)) + 1j * rng.normal(size=(n, d))
    g = np.einsum("bi,bj->bij", vs, vs.conj())
    lam, vec = np.linalg.eigh(g.sum(0))
    r = (vec / np.sqrt(lam)) @ vec.conj().T
    eff = r @ g @ r
    return Povm(0.5 * (eff + eff.conj().transpose(0, 2, 1)))


def test_criterion_10_local_and_qubit_models(acceptance):
    rng = np.random.default_rng(10)
    worst_i4 = worst_s = -np.inf
    for _ in range(1000):
        worst_i4 = max(worst_i4, CGLMP4(_local_behavior(rng, 4, 4)))
        worst_s = max(worst_s, chsh_value(Behavior(_local_behavior(rng, 2, 2))))
    worst_q = -np.inf
    for k in range(1000):
        # qubit preparations: steer a 2 (x) 2 state with four-outcome POVMs on the other half
        if k % 2:
            rho = random_density_matrix(4, rng, rank=1)
            a_meas = [_rank_one_povm(rng, 2, 4) for _ in range(2)]
            b_meas = [_rank_one_povm(rng, 2, 4) for _ in range(2)]
        else:
            rho = random_density_matrix(4, rng)
            a_meas = [random_povm(2, 4, rng) for _ in range(2)]
            b_meas = [random_povm(2, 4, rng) for _ in range(2)]
        asm = steer(rho, a_meas)
        worst_q = max(worst_q, CGLMP4(behavior_from(asm, b_meas)))
    ok = worst_i4 <= 1e-9 and worst_s <= 2 + 1e-9 and worst_q <= 0.2071 + 1e-6
    assert acceptance(
        10, ok,
        f"local: max I4 {worst_i4:.2e}, max S {worst_s:.6f}; qubit: max I4 {worst_q:.5f} (<= 0.2071; sampled, not a proof)",
    )


def test_criterion_11_photonics(acceptance, photonic_first):
    t = time.perf_counter()
    dev = 0.0
    for name, table in (("optimal", "optimal"), ("separable", "separable")):
        preps, _ = fitted_cglmp4_preparations(name)
        pred = predict_behavior(preps, CGLMP4_STATIONS)
        for ((x, y), order), rows in zip(tables.BLOCKS, tables._DATA[(table, "expected")]):
            for (a, b), printed in zip(order, rows):
                dev = max(dev, abs(4 * pred.table[a, b, x, y] - printed))
    completeness = max(np.max(np.abs(station_povm(s).effects.sum(0) - np.eye(4))) for s in CGLMP4_STATIONS)
    _, res, _, dt_mc = photonic_first
    dt = dt_mc + time.perf_counter() - t
    std_c = res[("optimal", "full")].std
    std_h = res[("chsh", "full")].std
    zero = (res[("optimal", "zero")].std, res[("chsh", "zero")].std)
    ratio_c = res[("optimal", "angles")].std / res[("optimal", "poisson")].std
    ratio_h = res[("chsh", "angles")].std / res[("chsh", "poisson")].std
    ok = (
        dev <= 1e-3
        and completeness <= 1e-10
        and 0.005 <= std_c <= 0.02
        and 0.003 <= std_h <= 0.02
        and zero == (0.0, 0.0)
        and ratio_c >= 10
        and ratio_h >= 10
        and dt < 180
    )
    detail = (
        f"table dev {dev:.1e}, POVM completeness {completeness:.1e}, std CGLMP4 {std_c:.4f}, CHSH {std_h:.4f}, "
        f"zero-noise std {zero}, angle/Poisson std ratio {ratio_c:.0f} / {ratio_h:.0f}, {dt:.1f} s"
    )
    assert acceptance(11, ok, detail)


def test_criterion_12_determinism(acceptance, seesaw_first, photonic_first):
    runs_a, _ = seesaw_first
    runs_b, _ = seesaw_reports()
    same_seesaw = all(runs_a[p][2] == runs_b[p][2] for p in (True, False))
    _, _, texts_a, _ = photonic_first
    _, _, texts_b, _ = photonic_reports()
    same_mc = texts_a == texts_b
    ok = same_seesaw and same_mc
    n_bytes = sum(len(runs_a[p][2]) for p in (True, False)) + sum(len(t) for t in texts_a.values())
    assert acceptance(
        12, ok,
        f"see-saw records identical: {same_seesaw}, Monte-Carlo reports identical: {same_mc} ({n_bytes} bytes compared)",
    )
