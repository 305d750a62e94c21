"""Jones-calculus model of the polarization/path photonic setups.

Basis convention for the four-level experiment: ``|0> = |H,a>``, ``|1> = |V,a>``,
``|2> = |H,b>``, ``|3> = |V,b>`` (path is the outer tensor factor).
"""

from __future__ import annotations

import csv
import io
import itertools
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.optimize

from .inequalities import (
    CGLMP4,
    CHSH,
    CHSH_MEAS_HWP,
    CHSH_OUTCOME_SWAP,
    CHSH_PREP_HWP,
    Behavior,
    InequalityFunctional,
    cglmp4_optimal_kets,
    cglmp4_separable_factors,
)
from .quantum import Povm

H = np.array([1, 0], dtype=complex)
V = np.array([0, 1], dtype=complex)

# 50/50 beam splitter, i phase on reflection
BEAM_SPLITTER = np.array([[1, 1j], [1j, 1]]) / np.sqrt(2)

# detectors ordered (port a H, port a V, port b H, port b V) -> outcome b
DETECTOR_OUTCOMES = (0, 2, 1, 3)

FIT_RESIDUAL_TOL = 1e-6


# --------------------------------------------------------------------------
# wave plates


def _rotation(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


@dataclass(frozen=True)
class WavePlate:
    kind: str  # "half" | "quarter"
    angle: float  # fast axis, degrees

    def __post_init__(self):
        if self.kind not in ("half", "quarter"):
            raise ValueError(f"unknown wave plate kind {self.kind!r}")
        if not np.isfinite(self.angle):
            raise ValueError("wave plate angle must be finite")


def _jones_batch(kind: str, angle_deg) -> np.ndarray:
    """Jones matrices for an array of angles, shape ``angle.shape + (2, 2)``."""
    t = np.deg2rad(np.asarray(angle_deg, dtype=float))
    c, s = np.cos(t), np.sin(t)
    retard = -1.0 if kind == "half" else 1j
    # R(t) diag(1, r) R(-t)
    m = np.empty(t.shape + (2, 2), dtype=complex)
    m[..., 0, 0] = c * c + retard * s * s
    m[..., 0, 1] = c * s * (1 - retard)
    m[..., 1, 0] = c * s * (1 - retard)
    m[..., 1, 1] = s * s + retard * c * c
    # global phase: H-H entry real and non-negative
    h = m[..., 0, 0]
    mag = np.abs(h)
    phase = np.where(mag > 1e-15, np.conj(h) / np.where(mag > 0, mag, 1), 1.0)
    return m * phase[..., None, None]


def jones(plate: WavePlate) -> np.ndarray:
    return _jones_batch(plate.kind, plate.angle)


def hwp(angle: float) -> np.ndarray:
    return jones(WavePlate("half", angle))


def qwp(angle: float) -> np.ndarray:
    return jones(WavePlate("quarter", angle))


# --------------------------------------------------------------------------
# preparation


@dataclass(frozen=True)
class PreparationParams:
    alpha: float  # degrees
    beta: float  # degrees
    phi1: float  # radians
    phi2: float  # radians
    pp: float  # radians

    def __post_init__(self):
        if not all(np.isfinite(v) for v in self.as_array()):
            raise ValueError("preparation parameters must be finite")

    def as_array(self) -> np.ndarray:
        return np.array([self.alpha, self.beta, self.phi1, self.phi2, self.pp], dtype=float)

    @classmethod
    def from_array(cls, v) -> "PreparationParams":
        return cls(*(float(x) for x in v))


def _sagnac_batch(p: np.ndarray) -> np.ndarray:
    """States for parameter rows ``p[..., 5]`` = (alpha, beta, phi1, phi2, pp)."""
    a2 = np.deg2rad(2 * p[..., 0])
    b2 = np.deg2rad(2 * p[..., 1])
    e1, e2, epp = np.exp(1j * p[..., 2]), np.exp(1j * p[..., 3]), np.exp(1j * p[..., 4])
    psi = np.stack([np.cos(a2), e1 * np.sin(a2), epp * np.cos(b2), epp * e2 * np.sin(b2)], axis=-1)
    return psi / np.sqrt(2)


def sagnac_prepare(params: PreparationParams) -> np.ndarray:
    return _sagnac_batch(params.as_array())


@dataclass(frozen=True)
class FitResult:
    params: PreparationParams
    residual: float  # 1 - |<target|state>|^2

    @property
    def reachable(self) -> bool:
        return self.residual <= FIT_RESIDUAL_TOL


def fit_preparation(target, starts: int = 16, seed: int = 0) -> FitResult:
    """Least-squares fit of the Sagnac parameters to a target ket (global phase free)."""
    target = np.asarray(target, dtype=complex)
    nrm = np.linalg.norm(target)
    if target.shape != (4,) or nrm == 0:
        raise ValueError("target must be a nonzero 4-component ket")
    target = target / nrm

    def resid(v):
        d = np.exp(1j * v[5]) * _sagnac_batch(v[:5]) - target
        return np.concatenate([d.real, d.imag])

    rng = np.random.default_rng(seed)
    best = None
    for _ in range(starts):
        x0 = np.concatenate([rng.uniform(0, 90, 2), rng.uniform(-np.pi, np.pi, 4)])
        sol = scipy.optimize.least_squares(resid, x0, xtol=1e-15, ftol=1e-15, gtol=1e-15)
        overlap = abs(np.vdot(target, _sagnac_batch(sol.x[:5]))) ** 2
        res = max(0.0, 1.0 - overlap)
        if best is None or res < best[1]:
            best = (sol.x[:5], res)
        if res < 1e-14:
            break
    p = best[0].copy()
    # canonical ranges: angles in [0, 180), phases in (-pi, pi]
    p[:2] = np.mod(p[:2], 180.0)
    p[2:] = np.angle(np.exp(1j * p[2:]))
    return FitResult(PreparationParams.from_array(p), float(best[1]))


# --------------------------------------------------------------------------
# measurement stations


@dataclass(frozen=True)
class StationSetting:
    qwp_a: float
    hwp_a: float
    qwp_b: float
    hwp_b: float
    # phase on path b ahead of the recombining beam splitter, radians
    path_phase: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.qwp_a, self.hwp_a, self.qwp_b, self.hwp_b, self.path_phase], dtype=float)


def _station_vectors(s: np.ndarray) -> np.ndarray:
    """Detector kets pulled back to the preparation space.

    ``s[..., 5]`` = (qwp_a, hwp_a, qwp_b, hwp_b, path_phase); returns
    ``[..., outcome, 4]`` so that effect b is ``|w_b><w_b|``.
    """
    shape = s.shape[:-1]
    path = np.zeros(shape + (2, 2), dtype=complex)
    path[..., 0, 0] = 1
    path[..., 1, 1] = np.exp(1j * s[..., 4])
    path = BEAM_SPLITTER @ path  # path modes -> output ports
    out = np.zeros(shape + (4, 4), dtype=complex)
    for port in range(2):
        train = _jones_batch("half", s[..., 2 * port + 1]) @ _jones_batch("quarter", s[..., 2 * port])
        back_path = np.conj(path[..., port, :])  # row `port` of the unitary, conjugated
        for pol in range(2):
            back_pol = np.conj(train[..., pol, :])
            det = 2 * port + pol
            w = (back_path[..., :, None] * back_pol[..., None, :]).reshape(shape + (4,))
            out[..., DETECTOR_OUTCOMES[det], :] = w
    return out


def station_povm(setting: StationSetting) -> Povm:
    w = _station_vectors(setting.as_array())
    return Povm(np.einsum("bi,bj->bij", w, w.conj()))


def station_unitary(setting: StationSetting) -> np.ndarray:
    """Full optical train (path phase, beam splitter, plates) as a 4x4 unitary."""
    w = _station_vectors(setting.as_array())
    rows = np.empty((4, 4), dtype=complex)
    for det, b in enumerate(DETECTOR_OUTCOMES):
        rows[det] = w[b].conj()
    return rows


# station settings; the path phases are calibrated so that the stations
# realize the ideal four-outcome projectors of the optimal measurements
CGLMP4_STATIONS = (
    StationSetting(45.0, 22.5, 0.0, 22.5, path_phase=-np.pi / 2),
    StationSetting(45.0, 11.25, -45.0, 11.25, path_phase=np.pi),
)


def predict_behavior(preps: Sequence[Sequence[PreparationParams]],
                     stations: Sequence[StationSetting]) -> Behavior:
    """``preps[x][a]`` with uniform prior 1/n_a; ``stations[y]``."""
    p = np.array([[q.as_array() for q in row] for row in preps])  # [x, a, 5]
    st = np.array([s.as_array() for s in stations])  # [y, 5]
    cond = _cglmp_conditionals(p[:, :, None, :], st[None, None, :, :])  # [x, a, y, b]
    n_a = p.shape[1]
    return Behavior(np.transpose(cond, (1, 3, 0, 2)) / n_a)


def _cglmp_conditionals(prep: np.ndarray, station: np.ndarray) -> np.ndarray:
    psi = _sagnac_batch(prep)
    w = _station_vectors(station)
    amp = np.einsum("...bi,...i->...b", w.conj(), psi)
    return np.abs(amp) ** 2


def fitted_cglmp4_preparations(setup: str = "optimal") -> tuple[list[list[PreparationParams]], float]:
    """Fit the Sagnac family to the canonical kets; returns preps[x][a] and the worst residual."""
    if setup == "optimal":
        kets = cglmp4_optimal_kets()
    elif setup == "separable":
        u, v = cglmp4_separable_factors()
        kets = np.einsum("xai,xaj->xaij", u, v).reshape(2, 4, 4)
    else:
        raise ValueError(f"unknown CGLMP4 setup {setup!r}")
    preps, worst = [], 0.0
    for x in range(kets.shape[0]):
        row = []
        for a in range(kets.shape[1]):
            fit = fit_preparation(kets[x, a])
            worst = max(worst, fit.residual)
            row.append(fit.params)
        preps.append(row)
    return preps, worst


# --------------------------------------------------------------------------
# polarization qubit (CHSH) setup


def chsh_conditionals(prep_hwp, meas_hwp, swap) -> np.ndarray:
    """p(b | prep, meas) for |H> through a preparation HWP, a measurement HWP and a PBS."""
    psi = _jones_batch("half", prep_hwp) @ H
    out = _jones_batch("half", meas_hwp) @ psi[..., :, None]
    p_h = np.abs(out[..., 0, 0]) ** 2
    p_v = np.abs(out[..., 1, 0]) ** 2
    cond = np.stack([p_h, p_v], axis=-1)
    return np.where(np.asarray(swap)[..., None], cond[..., ::-1], cond)


# --------------------------------------------------------------------------
# Monte Carlo


@dataclass(frozen=True)
class NoiseModel:
    motorized_sigma: float = 0.1  # degrees
    manual_sigma: float = 0.5  # degrees
    device_class: str = "manual"  # which sigma applies to the plates of a setup
    distribution: str = "gaussian"  # gaussian | uniform (sigma is the half-width)
    counts_per_setting: float = 0.0  # expected coincidences per (a, x, y); 0 disables
    poisson: bool = False

    def __post_init__(self):
        if self.motorized_sigma < 0 or self.manual_sigma < 0:
            raise ValueError("noise sigmas must be non-negative")
        if self.device_class not in ("manual", "motorized"):
            raise ValueError(f"unknown device class {self.device_class!r}")
        if self.distribution not in ("gaussian", "uniform"):
            raise ValueError(f"unknown distribution {self.distribution!r}")
        if self.poisson and self.counts_per_setting <= 0:
            raise ValueError("poisson resampling needs counts_per_setting > 0")

    @property
    def sigma(self) -> float:
        return self.manual_sigma if self.device_class == "manual" else self.motorized_sigma


# degrees of plate rotation -> radians of optical phase for the phase knobs
_PHASE_PER_DEGREE = 2 * np.pi / 180


@dataclass(frozen=True)
class CglmpSetup:
    preps: tuple  # preps[x][a]
    stations: tuple  # stations[y]
    functional: InequalityFunctional = CGLMP4

    def knobs(self) -> np.ndarray:
        """Nominal controls per (a, x, y): 5 preparation + 5 station values."""
        n_x, n_a, n_y = len(self.preps), len(self.preps[0]), len(self.stations)
        k = np.zeros((n_a, n_x, n_y, 10))
        for a, x, y in itertools.product(range(n_a), range(n_x), range(n_y)):
            k[a, x, y, :5] = self.preps[x][a].as_array()
            k[a, x, y, 5:] = self.stations[y].as_array()
        return k

    @staticmethod
    def noise_scale() -> np.ndarray:
        # alpha, beta, qwp/hwp angles move 1:1 with plate error; phases are
        # set by plates (2 rad per rad of rotation); path phase is fixed
        p = _PHASE_PER_DEGREE
        return np.array([1, 1, p, p, p, 1, 1, 1, 1, 0], dtype=float)

    @staticmethod
    def conditionals(k: np.ndarray) -> np.ndarray:
        return _cglmp_conditionals(k[..., :5], k[..., 5:])

    def behavior(self) -> Behavior:
        return predict_behavior(self.preps, self.stations)


@dataclass(frozen=True)
class ChshSetup:
    prep_hwp: dict = field(default_factory=lambda: dict(CHSH_PREP_HWP))  # (a, x) -> degrees
    meas_hwp: tuple = CHSH_MEAS_HWP
    outcome_swap: tuple = CHSH_OUTCOME_SWAP
    functional: InequalityFunctional = CHSH

    def knobs(self) -> np.ndarray:
        k = np.zeros((2, 2, 2, 3))
        for a, x, y in itertools.product(range(2), repeat=3):
            k[a, x, y] = [self.prep_hwp[(a, x)], self.meas_hwp[y], float(self.outcome_swap[y])]
        return k

    @staticmethod
    def noise_scale() -> np.ndarray:
        return np.array([1.0, 1.0, 0.0])

    @staticmethod
    def conditionals(k: np.ndarray) -> np.ndarray:
        return chsh_conditionals(k[..., 0], k[..., 1], k[..., 2] > 0.5)

    def behavior(self) -> Behavior:
        cond = self.conditionals(self.knobs())  # [a, x, y, b]
        return Behavior(np.transpose(cond, (0, 3, 1, 2)) / 2)


def canonical_photonic_setup(name: str) -> CglmpSetup | ChshSetup:
    if name == "chsh":
        return ChshSetup()
    preps, worst = fitted_cglmp4_preparations(name)
    if worst > FIT_RESIDUAL_TOL:
        raise RuntimeError(f"preparation fit failed (residual {worst:.2e})")
    return CglmpSetup(tuple(tuple(r) for r in preps), CGLMP4_STATIONS)


@dataclass(frozen=True)
class MonteCarloResult:
    nominal: float
    mean: float
    std: float
    percentiles: dict  # percent -> value
    samples: int
    seed: int

    def to_dict(self) -> dict:
        return {"nominal": self.nominal, "mean": self.mean, "std": self.std,
                "percentiles": {str(k): v for k, v in self.percentiles.items()},
                "samples": self.samples, "seed": self.seed}


PERCENTILES = (2.5, 16.0, 50.0, 84.0, 97.5)


def _functional_values(setup, cond: np.ndarray) -> np.ndarray:
    # cond[n, a, x, y, b] -> behavior p(ab|xy) with uniform prior over a
    n_a = cond.shape[1]
    table = np.transpose(cond, (0, 1, 4, 2, 3)) / n_a
    vals = np.einsum("abxy,nabxy->n", setup.functional.coefficients, table) - setup.functional.offset
    return np.abs(vals) if setup.functional.name == "chsh" else vals


def monte_carlo(setup, noise: NoiseModel, samples: int = 10_000, seed: int = 0,
                chunk: int = 2000) -> MonteCarloResult:
    """Propagate plate-angle noise (and optionally count statistics) to the functional.

    Every (a, x, y) run gets its own draw of all plate angles, since each
    preparation/measurement pair is set up and recorded separately.
    """
    if samples < 100:
        raise ValueError("monte_carlo needs at least 100 samples")
    nominal_k = setup.knobs()
    scale = setup.noise_scale() * noise.sigma
    nominal = float(_functional_values(setup, setup.conditionals(nominal_k)[None])[0])
    rng = np.random.default_rng(seed)
    vals = []
    for start in range(0, samples, chunk):
        n = min(chunk, samples - start)
        shape = (n,) + nominal_k.shape
        if noise.distribution == "gaussian":
            z = rng.standard_normal(shape)
        else:
            z = rng.uniform(-1.0, 1.0, shape)
        cond = setup.conditionals(nominal_k[None] + z * scale)
        if noise.poisson:
            counts = rng.poisson(noise.counts_per_setting * cond)
            tot = counts.sum(axis=-1, keepdims=True)
            cond = counts / np.maximum(tot, 1)
        vals.append(_functional_values(setup, cond))
    v = np.concatenate(vals)
    # deviations from the first sample keep the zero-noise spread exactly 0
    d = v - v[0]
    mean = float(v[0] + d.mean())
    std = float(d.std(ddof=1))
    pct = {p: float(v[0] + q) for p, q in zip(PERCENTILES, np.percentile(d, PERCENTILES))}
    return MonteCarloResult(nominal, mean, std, pct, samples, seed)


# recorded rates: 30000 coincidences/s for 60 s per CGLMP4 setting, 1500/s for 30 min per CHSH setting
CGLMP4_COUNTS = 30_000 * 60
CHSH_COUNTS = 1_500 * 1_800


def experimental_noise(setup_name: str, angles: bool = True, poisson: bool = True) -> NoiseModel:
    if setup_name == "chsh":
        base = NoiseModel(device_class="motorized", counts_per_setting=CHSH_COUNTS, poisson=poisson)
    else:
        base = NoiseModel(device_class="manual", counts_per_setting=CGLMP4_COUNTS, poisson=poisson)
    if not angles:
        base = replace(base, motorized_sigma=0.0, manual_sigma=0.0)
    return base


# --------------------------------------------------------------------------
# plate-angle tables (archival)

PLATE_COLUMNS = ("HWP1a", "QWP1a", "HWP2a", "QWP2a", "HWP1b", "QWP1b", "HWP2b", "QWP2b", "PP")


def _pi(frac: float) -> float:
    return frac * np.pi


# rows keyed (a, x); None marks a plate the table leaves unset ("-")
SEPARABLE_PREP_PLATES = {
    (0, 0): (119.22, 307.08, None, 21.38, 188.96, 50.84, None, 355.50, _pi(0.5)),
    (1, 0): (99.94, 300.34, None, 349.54, 131.88, 358.26, None, 212.92, _pi(0.5)),
    (2, 0): (60.78, 232.94, None, 158.64, 171.04, 309.16, None, 4.50, _pi(0.5)),
    (3, 0): (260.06, 239.66, None, 190.46, 103.46, 202.42, None, 237.08, _pi(0.5)),
    (0, 1): (119.22, 217.06, None, 111.36, 98.96, 320.84, None, 265.5, 0.0),
    (1, 1): (260.06, 329.66, None, 280.46, 138.12, 271.74, None, 57.08, 0.0),
    (2, 1): (60.78, 142.94, None, 248.64, 261.04, 219.16, None, 94.50, 0.0),
    (3, 1): (239.14, 38.74, None, 169.54, 346.54, 67.58, None, 32.92, 0.0),
}

OPTIMAL_PREP_PLATES = {
    (0, 0): (18.24, 45.00, -39.38, 45.00, 26.76, 45.00, -39.38, 45.00, _pi(0.75)),
    (1, 0): (18.24, 45.00, -16.88, 45.00, 26.76, 45.00, -16.88, 45.00, _pi(-0.25)),
    (2, 0): (18.24, 45.00, -84.38, 45.00, 26.76, 45.00, -84.38, 45.00, _pi(0.75)),
    (3, 0): (18.24, 45.00, -61.88, 45.00, 26.76, 45.00, -61.88, 45.00, _pi(-0.25)),
    (0, 1): (18.24, 45.00, -50.63, 45.00, 26.76, 45.00, -50.63, 45.00, _pi(0.25)),
    (1, 1): (18.24, 45.00, -28.126, 45.00, 26.76, 45.00, -28.126, 45.00, _pi(-0.75)),
    (2, 1): (18.24, 45.00, -5.63, 45.00, 26.76, 45.00, -5.63, 45.00, _pi(0.25)),
    (3, 1): (18.24, 45.00, -73.126, 45.00, 26.76, 45.00, -73.126, 45.00, _pi(-0.75)),
}

STATION_COLUMNS = ("QWPa", "HWPa", "QWPb", "HWPb")
STATION_PLATES = {0: (45.00, 22.50, 0.00, 22.50), 1: (45.00, 11.25, -45.00, 11.25)}


def dump_plate_table(rows: dict) -> str:
    """CSV with columns a, x, then plate angles; unset plates are written as '-'."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("a", "x") + PLATE_COLUMNS)
    for (a, x), vals in sorted(rows.items(), key=lambda kv: (kv[0][1], kv[0][0])):
        w.writerow([a, x] + ["-" if v is None else repr(float(v)) for v in vals])
    return buf.getvalue()


def load_plate_table(text: str) -> dict:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or tuple(header) != ("a", "x") + PLATE_COLUMNS:
        raise ValueError(f"line 1: unexpected plate-table header {header!r}")
    rows = {}
    for lineno, rec in enumerate(reader, start=2):
        if not rec:
            continue
        if len(rec) != 2 + len(PLATE_COLUMNS):
            raise ValueError(f"line {lineno}: expected {2 + len(PLATE_COLUMNS)} fields, got {len(rec)}")
        try:
            key = (int(rec[0]), int(rec[1]))
            vals = tuple(None if f.strip() == "-" else float(f) for f in rec[2:])
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
        if key in rows:
            raise ValueError(f"line {lineno}: duplicate row for (a, x) = {key}")
        rows[key] = vals
    return rows


def dump_station_table(rows: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("y",) + STATION_COLUMNS)
    for y, vals in sorted(rows.items()):
        w.writerow([y] + [repr(float(v)) for v in vals])
    return buf.getvalue()


def load_station_table(text: str) -> dict:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or tuple(header) != ("y",) + STATION_COLUMNS:
        raise ValueError(f"line 1: unexpected station-table header {header!r}")
    rows = {}
    for lineno, rec in enumerate(reader, start=2):
        if not rec:
            continue
        if len(rec) != 1 + len(STATION_COLUMNS):
            raise ValueError(f"line {lineno}: expected {1 + len(STATION_COLUMNS)} fields, got {len(rec)}")
        try:
            rows[int(rec[0])] = tuple(float(f) for f in rec[1:])
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
    return rows


def read_table(path) -> dict:
    text = Path(path).read_text()
    first = text.splitlines()[0] if text else ""
    return load_station_table(text) if first.startswith("y,") else load_plate_table(text)
