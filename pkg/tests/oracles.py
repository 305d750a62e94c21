"""Independent reference computations used by the tests.

Nothing here calls the interior-point solver or the package's functional
definitions; values are recomputed from first principles.
"""

from __future__ import annotations

import itertools

import numpy as np
import scipy.optimize
import scipy.special

from ctxdim.sdp import SdpProblem


# --------------------------------------------------------------------------
# CGLMP4 / CHSH written out directly


def i4_direct(p) -> float:
    """I4 from a p[a, b, x, y] table by explicit comparisons."""
    tot = 0.0
    for a, b in itertools.product(range(4), repeat=2):
        if a <= b:
            tot += p[a, b, 0, 0]
        if a >= b:
            tot += p[a, b, 0, 1] + p[a, b, 1, 0] - p[a, b, 1, 1]
    return tot - 2


def chsh_direct(p) -> float:
    e = [[sum((-1) ** (a + b) * p[a, b, x, y] for a in range(2) for b in range(2)) for y in range(2)]
         for x in range(2)]
    return abs(e[0][0] + e[0][1] + e[1][0] - e[1][1])


def local_max_direct(value_fn, n_a, n_b) -> float:
    """Enumerate a = f(x), b = g(y) and evaluate ``value_fn`` on each deterministic table."""
    best = -np.inf
    for f in itertools.product(range(n_a), repeat=2):
        for g in itertools.product(range(n_b), repeat=2):
            p = np.zeros((n_a, n_b, 2, 2))
            for x, y in itertools.product(range(2), repeat=2):
                p[f[x], g[y], x, y] = 1.0
            best = max(best, value_fn(p))
    return best


# --------------------------------------------------------------------------
# SDP reference: smoothed dual of trace-normalized problems


def random_trace_sdp(rng, max_block=8, max_constraints=40) -> tuple[SdpProblem, np.ndarray]:
    """Random feasible problem with sum_i Tr X_i = 1 among its constraints.

    Right-hand sides come from a full-rank interior point, so Slater's
    condition holds.  Returns the problem and that interior point (stacked).
    """
    n_blocks = int(rng.integers(1, 4))
    dims = [int(rng.integers(1, max_block + 1)) for _ in range(n_blocks)]
    blocks = [(f"b{i}", d) for i, d in enumerate(dims)]

    def herm(d):
        g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        return (g + g.conj().T) / 2

    objective = {n: herm(d) for n, d in blocks}
    prob = SdpProblem(blocks, objective)
    x0 = {}
    for n, d in blocks:
        g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        x0[n] = g @ g.conj().T + 0.1 * np.eye(d)
    scale = sum(np.trace(v).real for v in x0.values())
    x0 = {n: v / scale for n, v in x0.items()}
    prob.add_constraint({n: np.eye(d) for n, d in blocks}, 1.0)
    n_free = sum(d * d for d in dims)
    m = int(rng.integers(0, min(max_constraints - 1, n_free - 1) + 1))
    for _ in range(m):
        coeffs = {n: herm(d) for n, d in blocks if rng.random() < 0.8}
        if not coeffs:
            n, d = blocks[0]
            coeffs = {n: herm(d)}
        rhs = sum(np.trace(a @ x0[n]).real for n, a in coeffs.items())
        prob.add_constraint(coeffs, rhs)
    return prob, x0


def smoothed_dual_value(prob: SdpProblem, mus=(1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6)) -> float:
    """min_y  b.y + lambda_max(C - sum_j y_j A_j)  for problems whose first row is sum Tr X = 1.

    lambda_max is replaced by mu * logsumexp(eig / mu) and the smooth problem
    is minimized by BFGS, with mu decreased step by step; the smoothing error
    is at most mu * log(n).  Returns the non-smooth dual value at the final y.
    """
    names = [n for n, _ in prob.blocks]
    dims = prob.block_dims
    cons = prob.constraints[1:]
    b = np.array([c.rhs for c in cons])

    def z_blocks(y):
        out = []
        for n in names:
            z = np.asarray(prob.objective.get(n, np.zeros((dims[n], dims[n]))), dtype=complex).copy()
            for yj, c in zip(y, cons):
                if n in c.coeffs:
                    z -= yj * np.asarray(c.coeffs[n])
            out.append(z)
        return out

    def smooth(y, mu):
        eigs, vecs = [], []
        for z in z_blocks(y):
            w, v = np.linalg.eigh((z + z.conj().T) / 2)
            eigs.append(w)
            vecs.append(v)
        allw = np.concatenate(eigs)
        val = mu * scipy.special.logsumexp(allw / mu)
        wts = np.exp((allw - val) / mu)
        grad = b.copy()
        off = 0
        for n, w, v in zip(names, eigs, vecs):
            k = len(w)
            # d lambda_i / d y_j = -<v_i|A_j|v_i>
            p = (v * wts[off : off + k]) @ v.conj().T
            for j, c in enumerate(cons):
                if n in c.coeffs:
                    grad[j] -= np.real(np.sum(np.asarray(c.coeffs[n]) * p.T))
            off += k
        return b @ y + val, grad

    y = np.zeros(len(b))
    for mu in mus if len(b) else ():
        res = scipy.optimize.minimize(smooth, y, args=(mu,), jac=True, method="BFGS",
                                      options={"gtol": 1e-10, "maxiter": 5000})
        y = res.x
    lam = max(np.linalg.eigvalsh((z + z.conj().T) / 2)[-1] for z in z_blocks(y))
    return float(b @ y + lam)


# --------------------------------------------------------------------------
# Jones matrices in textbook form


def hwp_textbook(theta_deg):
    t = np.deg2rad(2 * theta_deg)
    return np.array([[np.cos(t), np.sin(t)], [np.sin(t), -np.cos(t)]], dtype=complex)


def qwp_textbook(theta_deg):
    t = np.deg2rad(theta_deg)
    c, s = np.cos(t), np.sin(t)
    return np.array([[c * c + 1j * s * s, (1 - 1j) * s * c], [(1 - 1j) * s * c, s * s + 1j * c * c]])


def equal_up_to_phase(u, v, tol=1e-12) -> bool:
    k = np.argmax(np.abs(v))
    idx = np.unravel_index(k, v.shape)
    if abs(u[idx]) < 1e-15:
        return False
    ph = v[idx] / u[idx]
    return abs(abs(ph) - 1) < tol and np.max(np.abs(u * ph - v)) < tol
