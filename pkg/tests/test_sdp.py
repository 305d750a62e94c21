import numpy as np
import pytest

from ctxdim.sdp import (
    SdpFormatError,
    SdpProblem,
    SolverOptions,
    dumps,
    embed,
    loads,
    solve,
    unembed,
    validate_solution,
)

from oracles import random_trace_sdp, smoothed_dual_value


def lambda_max_problem(c):
    d = c.shape[0]
    p = SdpProblem([("X", d)], {"X": c})
    p.add_constraint({"X": np.eye(d)}, 1.0)
    return p


def test_embed_round_trip_and_spectrum():
    rng = np.random.default_rng(0)
    g = rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5))
    h = g + g.conj().T
    e = embed(h)
    assert np.allclose(e, e.T)
    assert np.allclose(unembed(e), h)
    # each eigenvalue appears twice in the real embedding
    assert np.allclose(np.sort(np.linalg.eigvalsh(e)), np.sort(np.repeat(np.linalg.eigvalsh(h), 2)))


@pytest.mark.parametrize("d", [1, 2, 5, 8])
def test_lambda_max(d):
    rng = np.random.default_rng(d)
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    c = (g + g.conj().T) / 2
    sol = solve(lambda_max_problem(c))
    assert sol.status == "optimal"
    lam = np.linalg.eigvalsh(c)[-1]
    assert sol.objective == pytest.approx(lam, abs=1e-7 * (1 + abs(lam)))
    assert validate_solution(lambda_max_problem(c), sol)["ok"]


def test_random_problems_against_smoothed_dual():
    rng = np.random.default_rng(77)
    for _ in range(8):
        prob, _x0 = random_trace_sdp(rng)
        sol = solve(prob)
        rep = validate_solution(prob, sol)
        assert sol.status == "optimal"
        assert rep["ok"], rep
        assert sol.objective == pytest.approx(smoothed_dual_value(prob), abs=1e-4)


def test_real_symmetric_and_diagonal_blocks():
    # an LP as 1x1 blocks: max x1 + 2 x2 s.t. x1 + x2 = 1
    p = SdpProblem([("a", 1), ("b", 1)], {"a": np.array([[1.0]]), "b": np.array([[2.0]])})
    p.add_constraint({"a": np.eye(1), "b": np.eye(1)}, 1.0)
    sol = solve(p)
    assert sol.objective == pytest.approx(2.0, abs=1e-8)
    assert sol.X["b"][0, 0].real == pytest.approx(1.0, abs=1e-7)


def test_redundant_constraints_are_dropped():
    p = lambda_max_problem(np.diag([1.0, 3.0]))
    p.add_constraint({"X": 2 * np.eye(2)}, 2.0)  # same row scaled
    sol = solve(p)
    assert sol.status == "optimal"
    assert sol.dropped_constraints == (1,)
    assert sol.objective == pytest.approx(3.0, abs=1e-8)


def test_inconsistent_duplicate_rows_are_infeasible():
    p = lambda_max_problem(np.diag([1.0, 3.0]))
    p.add_constraint({"X": np.eye(2)}, 2.0)
    assert solve(p).status == "infeasible"


def test_infeasible_farkas_certificate():
    # Tr X = 1 and X_00 + X_11 = -1 cannot both hold
    p = SdpProblem([("X", 2)], {"X": np.zeros((2, 2))})
    p.add_constraint({"X": np.eye(2)}, 1.0)
    p.add_constraint({"X": np.diag([1.0, 1.0]) + np.array([[0, 0.5], [0.5, 0]])}, -1.0)
    sol = solve(p)
    assert sol.status == "infeasible"
    rep = validate_solution(p, sol)
    assert rep["farkas_ok"], rep


def test_unbounded_farkas_certificate():
    # max X_00 with only X_11 pinned
    p = SdpProblem([("X", 2)], {"X": np.diag([1.0, 0.0])})
    p.add_constraint({"X": np.diag([0.0, 1.0])}, 1.0)
    sol = solve(p)
    assert sol.status == "unbounded"
    rep = validate_solution(p, sol)
    assert rep["farkas_ok"], rep


def test_max_iterations_reported():
    rng = np.random.default_rng(5)
    prob, _ = random_trace_sdp(rng)
    sol = solve(prob, SolverOptions(max_iter=2))
    # the best iterate is returned, so the reported count may be below the cap
    assert sol.status == "max-iterations"
    assert sol.iterations <= 2
    assert len(sol.history) == 2


def test_problem_validation():
    with pytest.raises(ValueError, match="unique"):
        SdpProblem([("a", 1), ("a", 2)], {})
    with pytest.raises(ValueError, match="Hermitian"):
        SdpProblem([("a", 2)], {"a": np.array([[0, 1], [0, 0]])})
    p = SdpProblem([("a", 2)], {})
    with pytest.raises(ValueError, match="unknown block"):
        p.add_constraint({"b": np.eye(2)}, 1.0)
    with pytest.raises(ValueError, match="expects"):
        p.add_constraint({"a": np.eye(3)}, 1.0)


def test_text_format_round_trip():
    rng = np.random.default_rng(9)
    prob, _ = random_trace_sdp(rng, max_block=4, max_constraints=6)
    back = loads(dumps(prob))
    assert back.blocks == prob.blocks
    assert len(back.constraints) == len(prob.constraints)
    for c1, c2 in zip(prob.constraints, back.constraints):
        assert c1.rhs == c2.rhs
        for n in c1.coeffs:
            assert np.array_equal(np.asarray(c1.coeffs[n]), c2.coeffs[n])
    assert solve(back).objective == pytest.approx(solve(prob).objective, abs=1e-10)
    assert dumps(back) == dumps(prob)


@pytest.mark.parametrize(
    "text, where",
    [
        ("# wrong\n", "line 1"),
        ("# ctxdim-sdp v1\nblock a 2\nobjective\nb 0 0 1 0\nend\n", "line 4"),
        ("# ctxdim-sdp v1\nblock a 2\nobjective\na 0 0 1 0.5\nend\n", "line 4"),
        ("# ctxdim-sdp v1\nblock a 2\nconstraints 1\nconstraint 0 rhs x\nend\n", "line 4"),
        ("# ctxdim-sdp v1\nblock a 2\na 0 0 1 0\nend\n", "line 3"),
    ],
)
def test_text_format_errors_carry_line_numbers(text, where):
    with pytest.raises(SdpFormatError, match=where):
        loads(text)
