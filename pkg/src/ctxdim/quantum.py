"""Dense finite-dimensional quantum linear algebra.

States, effects and assemblages are plain complex ``numpy`` arrays wrapped in
small frozen containers that validate on construction.  Conventions:

* bipartite operators use the Kronecker block convention, the first factor
  being the outer index;
* the 4-level photonic basis is ``|0>=|H,a>, |1>=|V,a>, |2>=|H,b>, |3>=|V,b>``,
  i.e. path is the outer factor and polarization the inner one;
* ``Assemblage.sigmas[x, a]`` holds sigma_{a|x}, ``Povm.effects[b]`` holds M_b.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

HERM_TOL = 1e-10
PSD_TOL = 1e-9
NORM_TOL = 1e-9


class QuantumValidationError(ValueError):
    """An operator, state, POVM or assemblage violates its invariants."""


def as_matrix(x) -> np.ndarray:
    m = np.asarray(x, dtype=complex)
    if m.ndim != 2:
        raise QuantumValidationError(f"expected a matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise QuantumValidationError("matrix has non-finite entries")
    return m


def hermiticity_error(x: np.ndarray) -> float:
    return float(np.max(np.abs(x - x.conj().T))) if x.size else 0.0


def check_hermitian(x, tol: float = HERM_TOL) -> np.ndarray:
    m = as_matrix(x)
    if m.shape[0] != m.shape[1]:
        raise QuantumValidationError(f"operator is not square: {m.shape}")
    err = hermiticity_error(m)
    if err > tol:
        raise QuantumValidationError(f"operator is not Hermitian (max |M - M^H| = {err:.3e})")
    return m


def eigh(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Hermitian eigendecomposition with ascending eigenvalues.

    LAPACK ``zheevd`` through numpy; the input is symmetrized first so that
    rounding noise in the anti-Hermitian part cannot leak into the spectrum.
    """
    h = 0.5 * (x + x.conj().T)
    return np.linalg.eigh(h)


def is_psd(x, tol: float = PSD_TOL) -> tuple[bool, float]:
    """Return ``(lambda_min >= -tol, lambda_min)`` for a Hermitian operator."""
    m = check_hermitian(x)
    lam = float(np.linalg.eigvalsh(0.5 * (m + m.conj().T))[0])
    return lam >= -tol, lam


def ket_to_dm(ket) -> np.ndarray:
    v = np.asarray(ket, dtype=complex).reshape(-1)
    return np.outer(v, v.conj())


def tensor_product(a, b) -> np.ndarray:
    return np.kron(np.asarray(a), np.asarray(b))


def _split_dims(x: np.ndarray, dims: tuple[int, int]) -> np.ndarray:
    da, db = dims
    if x.shape != (da * db, da * db):
        raise QuantumValidationError(
            f"operator of shape {x.shape} does not act on a {da}x{db} bipartite space"
        )
    return x.reshape(da, db, da, db)


def partial_trace(x, traced: str, dims: tuple[int, int]) -> np.ndarray:
    """Trace out the ``"first"`` or ``"second"`` tensor factor."""
    t = _split_dims(np.asarray(x), dims)
    if traced == "first":
        return np.einsum("ijik->jk", t)
    if traced == "second":
        return np.einsum("ijkj->ik", t)
    raise ValueError(f"traced must be 'first' or 'second', got {traced!r}")


def partial_transpose(x, subsystem: str, dims: tuple[int, int]) -> np.ndarray:
    t = _split_dims(np.asarray(x), dims)
    da, db = dims
    if subsystem == "first":
        return t.transpose(2, 1, 0, 3).reshape(da * db, da * db)
    if subsystem == "second":
        return t.transpose(0, 3, 2, 1).reshape(da * db, da * db)
    raise ValueError(f"subsystem must be 'first' or 'second', got {subsystem!r}")


def born_probability(sigma, effect, imag_tol: float = 1e-10) -> float:
    s = np.asarray(sigma)
    e = np.asarray(effect)
    if s.shape != e.shape:
        raise QuantumValidationError(f"dimension mismatch {s.shape} vs {e.shape}")
    # Tr(SE) = sum_ij S_ij E_ji
    tr = np.sum(s * e.T)
    if abs(tr.imag) > imag_tol:
        raise QuantumValidationError(
            f"Tr(sigma M) has imaginary part {tr.imag:.3e}; inputs are not Hermitian"
        )
    return float(tr.real)


def check_density_matrix(rho, tol: float = PSD_TOL) -> np.ndarray:
    m = check_hermitian(rho)
    ok, lam = is_psd(m, tol)
    if not ok:
        raise QuantumValidationError(f"density matrix has negative eigenvalue {lam:.3e}")
    tr = np.trace(m).real
    if abs(tr - 1) > NORM_TOL:
        raise QuantumValidationError(f"density matrix has trace {tr:.12g}")
    return m


@dataclass(frozen=True)
class Povm:
    """Effects ``M_b`` stacked along the first axis, shape ``(n_outcomes, d, d)``."""

    effects: np.ndarray

    def __post_init__(self):
        eff = np.array(self.effects, dtype=complex)
        if eff.ndim != 3 or eff.shape[1] != eff.shape[2]:
            raise QuantumValidationError(f"POVM effects must have shape (n, d, d), got {eff.shape}")
        for b, e in enumerate(eff):
            check_hermitian(e)
            ok, lam = is_psd(e)
            if not ok:
                raise QuantumValidationError(f"effect {b} has eigenvalue {lam:.3e}")
        dev = np.max(np.abs(eff.sum(axis=0) - np.eye(eff.shape[1])))
        if dev > NORM_TOL:
            raise QuantumValidationError(f"effects sum to identity only up to {dev:.3e}")
        eff.setflags(write=False)
        object.__setattr__(self, "effects", eff)

    @property
    def dim(self) -> int:
        return self.effects.shape[1]

    @property
    def n_outcomes(self) -> int:
        return self.effects.shape[0]

    def __len__(self):
        return self.n_outcomes

    def __getitem__(self, b):
        return self.effects[b]


@dataclass(frozen=True)
class Assemblage:
    """Subnormalized preparations ``sigmas[x, a]`` with a common marginal.

    Every ``sigma_{a|x}`` is PSD and ``sum_a sigma_{a|x}`` equals the same
    unit-trace ``sigma_star`` for every setting ``x``.
    """

    sigmas: np.ndarray

    def __post_init__(self):
        s = np.array(self.sigmas, dtype=complex)
        if s.ndim != 4 or s.shape[2] != s.shape[3]:
            raise QuantumValidationError(
                f"assemblage must have shape (n_x, n_a, d, d), got {s.shape}"
            )
        for x in range(s.shape[0]):
            for a in range(s.shape[1]):
                check_hermitian(s[x, a])
                ok, lam = is_psd(s[x, a])
                if not ok:
                    raise QuantumValidationError(f"sigma_{{{a}|{x}}} has eigenvalue {lam:.3e}")
        marg = s.sum(axis=1)
        star = marg[0]
        for x in range(1, s.shape[0]):
            dev = np.max(np.abs(marg[x] - star))
            if dev > NORM_TOL:
                raise QuantumValidationError(
                    f"sum_a sigma_{{a|{x}}} differs from sum_a sigma_{{a|0}} by {dev:.3e}"
                )
        tr = np.trace(star).real
        if abs(tr - 1) > NORM_TOL:
            raise QuantumValidationError(f"sigma_star has trace {tr:.12g}")
        s.setflags(write=False)
        object.__setattr__(self, "sigmas", s)

    @property
    def dim(self) -> int:
        return self.sigmas.shape[2]

    @property
    def n_settings(self) -> int:
        return self.sigmas.shape[0]

    @property
    def n_outcomes(self) -> int:
        return self.sigmas.shape[1]

    @property
    def sigma_star(self) -> np.ndarray:
        return self.sigmas[0].sum(axis=0)


def steer(rho, povms: Sequence[Povm], dims: tuple[int, int] | None = None) -> Assemblage:
    """sigma_{a|x} = Tr_A[rho (N_{a|x} (x) 1)] for POVMs acting on the first factor."""
    rho = check_density_matrix(rho)
    da = povms[0].dim
    if dims is None:
        if rho.shape[0] % da:
            raise QuantumValidationError(f"state of size {rho.shape[0]} is not divisible by {da}")
        dims = (da, rho.shape[0] // da)
    if dims[0] != da or any(p.dim != da for p in povms):
        raise QuantumValidationError("POVM dimension does not match the steered subsystem")
    if len({p.n_outcomes for p in povms}) != 1:
        raise QuantumValidationError("all settings need the same number of outcomes")
    r = _split_dims(rho, dims)
    # sigma[x,a]_{jl} = sum_{i,k} N[x,a]_{ki} rho_{ij,kl}
    n = np.stack([p.effects for p in povms])
    sig = np.einsum("xaki,ijkl->xajl", n, r)
    return Assemblage(sig)


def ghjw_dilation(assemblage: Assemblage, support_tol: float = 1e-12) -> tuple[np.ndarray, list[Povm]]:
    """Realize an assemblage by measuring half of a pure bipartite state.

    Returns ``(rho, povms)`` with ``rho`` a purification of ``sigma_star`` on
    ``d (x) d`` and ``povms[x]`` acting on the first factor, such that
    ``steer(rho, povms)`` reproduces the assemblage.  On a rank-deficient
    ``sigma_star`` the effects live on its support and the kernel projector is
    added to the last outcome.
    """
    d = assemblage.dim
    lam, vec = eigh(assemblage.sigma_star)
    keep = lam > support_tol
    lam_s, vec_s = lam[keep], vec[:, keep]
    root = (vec_s * np.sqrt(lam_s)) @ vec_s.conj().T
    inv_root = (vec_s / np.sqrt(lam_s)) @ vec_s.conj().T
    support = vec_s @ vec_s.conj().T

    # |psi> = sum_k |k> (x) sqrt(sigma_star)|k>; steering yields sqrt(s) N^T sqrt(s)
    omega = np.eye(d).reshape(-1)
    psi = np.kron(np.eye(d), root) @ omega
    rho = np.outer(psi, psi.conj())

    kernel_t = (np.eye(d) - support).T
    povms = []
    for x in range(assemblage.n_settings):
        eff = []
        for a in range(assemblage.n_outcomes):
            n_t = inv_root @ assemblage.sigmas[x, a] @ inv_root
            eff.append(n_t.T)
        eff[-1] = eff[-1] + kernel_t
        eff = np.array(eff)
        eff = 0.5 * (eff + eff.conj().transpose(0, 2, 1))
        povms.append(Povm(eff))
    return rho, povms


def haar_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph


def random_projective_povm(dim: int, outcomes: int, seed) -> Povm:
    """Rank-1 projective measurement from the columns of a Haar unitary.

    With ``outcomes < dim`` the remaining columns are absorbed into the last
    effect, so it is a projector of rank ``dim - outcomes + 1``.
    """
    if outcomes > dim:
        raise ValueError(f"cannot build {outcomes} orthogonal projectors in dimension {dim}")
    rng = np.random.default_rng(seed)
    u = haar_unitary(dim, rng)
    eff = [np.outer(u[:, k], u[:, k].conj()) for k in range(outcomes)]
    for k in range(outcomes, dim):
        eff[-1] = eff[-1] + np.outer(u[:, k], u[:, k].conj())
    return Povm(np.array(eff))


def random_density_matrix(dim: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    rank = dim if rank is None else rank
    g = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_povm(dim: int, outcomes: int, rng: np.random.Generator) -> Povm:
    """Generic (non-projective) POVM ``S^{-1/2} G_b S^{-1/2}`` from Wishart blocks."""
    g = [
        (lambda m: m @ m.conj().T)(rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim)))
        for _ in range(outcomes)
    ]
    lam, vec = eigh(sum(g))
    inv_root = (vec / np.sqrt(lam)) @ vec.conj().T
    eff = np.array([inv_root @ gi @ inv_root for gi in g])
    eff = 0.5 * (eff + eff.conj().transpose(0, 2, 1))
    return Povm(eff)
