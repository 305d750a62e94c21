"""Versioned line-oriented text formats, table ingestion and certification reports.

Every format starts with a ``# ctxdim-<kind> v1`` header line and ends with
``end``.  Blank lines and lines starting with ``#`` after the header are
ignored.  Floats are written with ``repr`` so files round-trip exactly.
"""

from __future__ import annotations

import datetime as _dt
import hashlib
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from . import __version__
from .inequalities import FUNCTIONALS, Behavior, BehaviorError, CertificationVerdict, certify
from .quantum import Assemblage, Povm

BEHAVIOR_HEADER = "# ctxdim-behavior v1"
ASSEMBLAGE_HEADER = "# ctxdim-assemblage v1"
REPORT_HEADER = "# ctxdim-report v1"

MEASURED_TOL = 0.05
EXPECTED_TOL = 1e-3
TABLE_FORMATS = ("conditional-per-a", "joint")


class FormatError(ValueError):
    """Malformed input; the message carries the offending line number."""

    def __init__(self, lineno: int | None, msg: str, source: str = "<text>"):
        self.lineno = lineno
        where = f"{source}:{lineno}" if lineno is not None else source
        super().__init__(f"{where}: {msg}")


def atomic_write(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _lines(text: str, header: str, source: str) -> Iterable[tuple[int, list[str]]]:
    """Yield (lineno, tokens) between the header and ``end``."""
    raw = text.splitlines()
    if not raw or raw[0].strip() != header:
        got = raw[0].strip() if raw else "<empty>"
        raise FormatError(1, f"expected header {header!r}, got {got!r}", source)
    ended = False
    for i, line in enumerate(raw[1:], start=2):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        if ended:
            raise FormatError(i, "content after 'end'", source)
        if s == "end":
            ended = True
            continue
        yield i, s.split()
    if not ended:
        raise FormatError(len(raw), "missing 'end' line", source)


def _float(tok: str, lineno: int, source: str) -> float:
    try:
        v = float(tok)
    except ValueError:
        raise FormatError(lineno, f"not a number: {tok!r}", source) from None
    if not np.isfinite(v):
        raise FormatError(lineno, f"non-finite number: {tok!r}", source)
    return v


def _int(tok: str, lineno: int, source: str) -> int:
    try:
        return int(tok)
    except ValueError:
        raise FormatError(lineno, f"not an integer: {tok!r}", source) from None


def _expect(tokens: list[str], n: int, lineno: int, source: str) -> None:
    if len(tokens) != n:
        raise FormatError(lineno, f"'{tokens[0]}' takes {n - 1} fields, got {len(tokens) - 1}", source)


# --------------------------------------------------------------------------
# probability tables


@dataclass
class ProbabilityTable:
    """Entries keyed ``(a, x, b, y)``; missing keys are listed explicitly."""

    format: str
    alphabet: tuple[int, int, int, int]  # n_a, n_b, n_x, n_y
    entries: dict[tuple[int, int, int, int], float] = field(default_factory=dict)
    missing: set[tuple[int, int, int, int]] = field(default_factory=set)
    tolerance: float = MEASURED_TOL
    meta: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.format not in TABLE_FORMATS:
            raise ValueError(f"unknown table format {self.format!r}")

    def keys(self):
        n_a, n_b, n_x, n_y = self.alphabet
        for a in range(n_a):
            for x in range(n_x):
                for b in range(n_b):
                    for y in range(n_y):
                        yield (a, x, b, y)


def dump_table(table: ProbabilityTable) -> str:
    out = [BEHAVIOR_HEADER, f"format {table.format}", "alphabet " + " ".join(map(str, table.alphabet)),
           f"tolerance {float(table.tolerance)!r}"]
    for k, v in sorted(table.meta.items()):
        out.append(f"meta {k} {v}")
    for key in table.keys():
        if key in table.entries:
            out.append("entry " + " ".join(map(str, key)) + f" {float(table.entries[key])!r}")
        elif key in table.missing:
            out.append("missing " + " ".join(map(str, key)))
    out.append("end")
    return "\n".join(out) + "\n"


def load_table(text: str, source: str = "<text>") -> ProbabilityTable:
    fmt = alphabet = None
    tol = MEASURED_TOL
    meta: dict[str, str] = {}
    entries: dict = {}
    missing: set = set()
    for lineno, tok in _lines(text, BEHAVIOR_HEADER, source):
        kw = tok[0]
        if kw == "format":
            _expect(tok, 2, lineno, source)
            if tok[1] not in TABLE_FORMATS:
                raise FormatError(lineno, f"unknown format {tok[1]!r} (expected one of {TABLE_FORMATS})", source)
            fmt = tok[1]
        elif kw == "alphabet":
            _expect(tok, 5, lineno, source)
            alphabet = tuple(_int(t, lineno, source) for t in tok[1:])
            if min(alphabet) < 1:
                raise FormatError(lineno, "alphabet sizes must be positive", source)
        elif kw == "tolerance":
            _expect(tok, 2, lineno, source)
            tol = _float(tok[1], lineno, source)
        elif kw == "meta":
            if len(tok) < 3:
                raise FormatError(lineno, "'meta' takes a key and a value", source)
            meta[tok[1]] = " ".join(tok[2:])
        elif kw in ("entry", "missing"):
            if alphabet is None:
                raise FormatError(lineno, f"'{kw}' before 'alphabet'", source)
            _expect(tok, 6 if kw == "entry" else 5, lineno, source)
            key = tuple(_int(t, lineno, source) for t in tok[1:5])
            a, x, b, y = key
            n_a, n_b, n_x, n_y = alphabet
            if not (0 <= a < n_a and 0 <= x < n_x and 0 <= b < n_b and 0 <= y < n_y):
                raise FormatError(lineno, f"index (a, x, b, y) = {key} outside alphabet {alphabet}", source)
            if key in entries or key in missing:
                raise FormatError(lineno, f"duplicate entry for (a, x, b, y) = {key}", source)
            if kw == "entry":
                entries[key] = _float(tok[5], lineno, source)
            else:
                missing.add(key)
        else:
            raise FormatError(lineno, f"unknown keyword {kw!r}", source)
    if fmt is None or alphabet is None:
        raise FormatError(None, "'format' and 'alphabet' are required", source)
    table = ProbabilityTable(fmt, alphabet, entries, missing, tol, meta)
    absent = [k for k in table.keys() if k not in entries and k not in missing]
    if absent:
        raise FormatError(None, f"{len(absent)} entries neither given nor marked missing, first {absent[0]}", source)
    return table


def ingest_behavior(table: ProbabilityTable, functional: str | None = None,
                    joint: bool | None = None, tolerance: float | None = None) -> Behavior:
    """Convert a probability table into a Behavior.

    Conditional-per-a entries are p(b|a,x,y) and are weighted by the uniform
    prior 1/n_a.  Missing entries share whatever probability their row
    (conditional) or block (joint) leaves unassigned, in proportion to the
    mean of the known entries at the same cyclic offset (b - a) mod n_b, the
    symmetry the four-outcome setups have.  Entries a functional depends on
    may not be missing.  The per-row sum check applies to complete conditional tables.
    """
    n_a, n_b, n_x, n_y = table.alphabet
    fmt = table.format if joint is None else ("joint" if joint else "conditional-per-a")
    tol = table.tolerance if tolerance is None else tolerance
    if functional is not None:
        coeffs = FUNCTIONALS[functional].coefficients
        if coeffs.shape != tuple(table.alphabet):
            raise BehaviorError(f"{functional} needs alphabet {coeffs.shape}, table has {table.alphabet}")
        needed = [k for k in table.missing if coeffs[k[0], k[2], k[1], k[3]] != 0]
        if needed:
            raise BehaviorError(f"missing required entries for {functional}: {sorted(needed)}")
    t = np.full((n_a, n_b, n_x, n_y), np.nan)
    for (a, x, b, y), v in table.entries.items():
        t[a, b, x, y] = v
    for x in range(n_x):
        for y in range(n_y):
            _fill_block(t[:, :, x, y], fmt == "conditional-per-a")
    if fmt == "conditional-per-a":
        if not table.missing:
            rows = t.sum(axis=1)
            dev = np.abs(rows - 1)
            if dev.max() > tol:
                a, x, y = np.unravel_index(np.argmax(dev), rows.shape)
                raise BehaviorError(f"conditional row (a={a}, x={x}, y={y}) sums to {rows[a, x, y]:.6f}")
        t = t / n_a
    return Behavior(t, tol=tol)


def _fill_block(block: np.ndarray, conditional: bool) -> None:
    gap = np.isnan(block)
    if not gap.any():
        return
    n_a, n_b = block.shape
    guess = np.ones_like(block)
    if n_a == n_b:
        a, b = np.indices(block.shape)
        offset = (b - a) % n_b
        for d in range(n_b):
            known = block[(offset == d) & ~gap]
            if known.size:
                guess[offset == d] = max(known.mean(), 0.0)
    # scale the guesses so each row (conditional) or the block (joint) sums to 1
    groups = [(r, gap[r]) for r in range(n_a)] if conditional else [(slice(None), gap)]
    for r, hole in groups:
        if not hole.any():
            continue
        rest = max(1.0 - np.nansum(block[r]), 0.0)
        g = guess[r][hole]
        block[r][hole] = rest * g / g.sum() if g.sum() > 0 else rest / hole.sum()


def behavior_table(behavior: Behavior, tolerance: float | None = None,
                   meta: dict | None = None) -> ProbabilityTable:
    tolerance = behavior.tol if tolerance is None else tolerance
    n_a, n_b, n_x, n_y = behavior.shape
    t = behavior.table
    entries = {(a, x, b, y): float(t[a, b, x, y]) for a in range(n_a) for x in range(n_x)
               for b in range(n_b) for y in range(n_y)}
    return ProbabilityTable("joint", (n_a, n_b, n_x, n_y), entries, set(), tolerance, dict(meta or {}))


def dump_behavior(behavior: Behavior, tolerance: float | None = None, meta: dict | None = None) -> str:
    return dump_table(behavior_table(behavior, tolerance, meta))


def load_behavior(text: str, source: str = "<text>", functional: str | None = None,
                  joint: bool | None = None, tolerance: float | None = None) -> Behavior:
    table = load_table(text, source)
    try:
        return ingest_behavior(table, functional, joint, tolerance)
    except BehaviorError as exc:
        raise FormatError(None, str(exc), source) from None


# --------------------------------------------------------------------------
# CHSH term lists

CHSH_TERM_SIGNS = (1, -1, 1, -1, 1, -1, -1, 1)


def ingest_chsh_terms(terms) -> float:
    """S from the eight signed correlation terms of the CHSH table."""
    terms = [float(t) for t in terms]
    if len(terms) != len(CHSH_TERM_SIGNS):
        raise ValueError(f"expected {len(CHSH_TERM_SIGNS)} CHSH terms, got {len(terms)}")
    return float(sum(s * t for s, t in zip(CHSH_TERM_SIGNS, terms)))


# --------------------------------------------------------------------------
# assemblage / POVM files


def dump_assemblage(assemblage: Assemblage, povms: list[Povm] | None = None,
                    values: dict[str, float] | None = None) -> str:
    sig = assemblage.sigmas
    out = [ASSEMBLAGE_HEADER, f"dim {assemblage.dim}", f"settings {assemblage.n_settings}",
           f"outcomes {assemblage.n_outcomes}"]
    d = assemblage.dim
    for x in range(sig.shape[0]):
        for a in range(sig.shape[1]):
            for i in range(d):
                for j in range(d):
                    z = sig[x, a, i, j]
                    out.append(f"sigma {x} {a} {i} {j} {float(z.real)!r} {float(z.imag)!r}")
    if povms is not None:
        out.append(f"measurements {len(povms)} {povms[0].n_outcomes}")
        for y, p in enumerate(povms):
            for b in range(p.n_outcomes):
                for i in range(d):
                    for j in range(d):
                        z = p.effects[b, i, j]
                        out.append(f"effect {y} {b} {i} {j} {float(z.real)!r} {float(z.imag)!r}")
    for name, v in sorted((values or {}).items()):
        out.append(f"value {name} {float(v)!r}")
    out.append("end")
    return "\n".join(out) + "\n"


def load_assemblage(text: str, source: str = "<text>") -> tuple[Assemblage, list[Povm] | None, dict[str, float]]:
    dims: dict[str, int] = {}
    sig = eff = None
    values: dict[str, float] = {}
    for lineno, tok in _lines(text, ASSEMBLAGE_HEADER, source):
        kw = tok[0]
        if kw in ("dim", "settings", "outcomes"):
            _expect(tok, 2, lineno, source)
            dims[kw] = _int(tok[1], lineno, source)
        elif kw == "measurements":
            _expect(tok, 3, lineno, source)
            if "dim" not in dims:
                raise FormatError(lineno, "'measurements' before 'dim'", source)
            n_y, n_b = _int(tok[1], lineno, source), _int(tok[2], lineno, source)
            eff = np.full((n_y, n_b, dims["dim"], dims["dim"]), np.nan, dtype=complex)
        elif kw in ("sigma", "effect"):
            _expect(tok, 7, lineno, source)
            if kw == "sigma" and sig is None:
                if len(dims) < 3:
                    raise FormatError(lineno, "'sigma' before dim/settings/outcomes", source)
                sig = np.full((dims["settings"], dims["outcomes"], dims["dim"], dims["dim"]), np.nan, dtype=complex)
            target = sig if kw == "sigma" else eff
            if target is None:
                raise FormatError(lineno, "'effect' before 'measurements'", source)
            idx = tuple(_int(t, lineno, source) for t in tok[1:5])
            if any(not 0 <= i < n for i, n in zip(idx, target.shape)):
                raise FormatError(lineno, f"index {idx} outside shape {target.shape}", source)
            target[idx] = complex(_float(tok[5], lineno, source), _float(tok[6], lineno, source))
        elif kw == "value":
            _expect(tok, 3, lineno, source)
            values[tok[1]] = _float(tok[2], lineno, source)
        else:
            raise FormatError(lineno, f"unknown keyword {kw!r}", source)
    if sig is None:
        raise FormatError(None, "no 'sigma' entries", source)
    if np.isnan(sig).any() or (eff is not None and np.isnan(eff).any()):
        raise FormatError(None, "operator entries missing", source)
    try:
        asm = Assemblage(sig)
        povms = None if eff is None else [Povm(e) for e in eff]
    except ValueError as exc:
        raise FormatError(None, str(exc), source) from None
    return asm, povms, values


# --------------------------------------------------------------------------
# certification reports


def digest(data: bytes | str) -> str:
    if isinstance(data, str):
        data = data.encode()
    return "sha256:" + hashlib.sha256(data).hexdigest()


@dataclass(frozen=True)
class CertificationReport:
    functional: str
    value: float
    std_error: float
    k_sigma: float
    thresholds_crossed: tuple[str, ...]
    verdict: str  # "noncontextual-compatible" or a minimal dimension
    inputs_digest: str
    tool_version: str
    timestamp: str

    @classmethod
    def from_verdict(cls, v: CertificationVerdict, inputs_digest: str, timestamp: str | None = None):
        ts = timestamp or _dt.datetime.now(_dt.timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
        return cls(v.functional, float(v.value), float(v.std_error), float(v.k_sigma),
                   tuple(v.thresholds_crossed), str(v.certified_min_dimension), inputs_digest,
                   __version__, ts)

    def verdict_object(self) -> CertificationVerdict:
        return certify(self.value, self.std_error, self.functional, self.k_sigma)


def dump_report(r: CertificationReport) -> str:
    lines = [
        REPORT_HEADER,
        f"functional {r.functional}",
        f"value {float(r.value)!r}",
        f"std_error {float(r.std_error)!r}",
        f"k_sigma {float(r.k_sigma)!r}",
        "thresholds_crossed " + (",".join(r.thresholds_crossed) if r.thresholds_crossed else "-"),
        f"verdict {r.verdict}",
        f"inputs_digest {r.inputs_digest}",
        f"tool_version {r.tool_version}",
        f"timestamp {r.timestamp}",
        "end",
    ]
    return "\n".join(lines) + "\n"


def load_report(text: str, source: str = "<text>") -> CertificationReport:
    fields: dict[str, str] = {}
    for lineno, tok in _lines(text, REPORT_HEADER, source):
        _expect(tok, 2, lineno, source)
        if tok[0] in fields:
            raise FormatError(lineno, f"duplicate field {tok[0]!r}", source)
        fields[tok[0]] = tok[1]
    need = ("functional", "value", "std_error", "k_sigma", "thresholds_crossed", "verdict",
            "inputs_digest", "tool_version", "timestamp")
    miss = [k for k in need if k not in fields]
    if miss:
        raise FormatError(None, f"missing fields {miss}", source)
    crossed = () if fields["thresholds_crossed"] == "-" else tuple(fields["thresholds_crossed"].split(","))
    return CertificationReport(
        fields["functional"], float(fields["value"]), float(fields["std_error"]), float(fields["k_sigma"]),
        crossed, fields["verdict"], fields["inputs_digest"], fields["tool_version"], fields["timestamp"],
    )


# --------------------------------------------------------------------------
# photonic setup files

SETUP_HEADER = "# ctxdim-setup v1"
_NOISE_KEYS = {
    "motorized_sigma": float, "manual_sigma": float, "device_class": str,
    "distribution": str, "counts_per_setting": float, "poisson": lambda s: s.lower() in ("1", "true", "yes"),
}


def load_setup(text: str, source: str = "<text>"):
    """Parse a setup file into ``(setup, NoiseModel)``.

    A ``canonical`` line seeds preparations and stations from the built-in
    setups; explicit ``prep``/``target``/``station``/``prep_hwp``/``meas_hwp``
    lines override individual entries.
    """
    from . import photonics as ph

    functional = None
    canonical = None
    preps: dict = {}
    targets: dict = {}
    stations: dict = {}
    prep_hwp: dict = {}
    meas_hwp: dict = {}
    noise_kw: dict = {}
    for lineno, tok in _lines(text, SETUP_HEADER, source):
        kw = tok[0]
        if kw == "functional":
            _expect(tok, 2, lineno, source)
            if tok[1] not in FUNCTIONALS:
                raise FormatError(lineno, f"unknown functional {tok[1]!r}", source)
            functional = tok[1]
        elif kw == "canonical":
            _expect(tok, 2, lineno, source)
            if tok[1] not in ("optimal", "separable", "chsh"):
                raise FormatError(lineno, f"unknown canonical setup {tok[1]!r}", source)
            canonical = tok[1]
        elif kw == "prep":
            _expect(tok, 8, lineno, source)
            key = (_int(tok[1], lineno, source), _int(tok[2], lineno, source))
            preps[key] = ph.PreparationParams(*(_float(t, lineno, source) for t in tok[3:]))
        elif kw == "target":
            _expect(tok, 11, lineno, source)
            key = (_int(tok[1], lineno, source), _int(tok[2], lineno, source))
            v = [_float(t, lineno, source) for t in tok[3:]]
            targets[key] = (lineno, np.array(v[0::2]) + 1j * np.array(v[1::2]))
        elif kw == "station":
            _expect(tok, 7, lineno, source)
            stations[_int(tok[1], lineno, source)] = ph.StationSetting(*(_float(t, lineno, source) for t in tok[2:]))
        elif kw == "prep_hwp":
            _expect(tok, 4, lineno, source)
            prep_hwp[(_int(tok[1], lineno, source), _int(tok[2], lineno, source))] = _float(tok[3], lineno, source)
        elif kw == "meas_hwp":
            _expect(tok, 4, lineno, source)
            meas_hwp[_int(tok[1], lineno, source)] = (_float(tok[2], lineno, source), _int(tok[3], lineno, source) != 0)
        elif kw == "noise":
            _expect(tok, 3, lineno, source)
            if tok[1] not in _NOISE_KEYS:
                raise FormatError(lineno, f"unknown noise key {tok[1]!r}", source)
            try:
                noise_kw[tok[1]] = _NOISE_KEYS[tok[1]](tok[2])
            except ValueError:
                raise FormatError(lineno, f"bad value for {tok[1]}: {tok[2]!r}", source) from None
        else:
            raise FormatError(lineno, f"unknown keyword {kw!r}", source)
    if functional is None:
        functional = "chsh" if canonical == "chsh" else "cglmp4"
    default_class = "motorized" if functional == "chsh" else "manual"
    try:
        noise = ph.NoiseModel(**{"device_class": default_class, **noise_kw})
    except ValueError as exc:
        raise FormatError(None, str(exc), source) from None

    if functional == "chsh":
        base = ph.ChshSetup()
        hwp = dict(base.prep_hwp)
        hwp.update(prep_hwp)
        m = list(zip(base.meas_hwp, base.outcome_swap))
        for y, v in meas_hwp.items():
            if y not in (0, 1):
                raise FormatError(None, f"meas_hwp setting {y} outside 0..1", source)
            m[y] = v
        if set(hwp) != set(base.prep_hwp):
            raise FormatError(None, "prep_hwp needs exactly the keys (a, x) in {0,1}^2", source)
        return ph.ChshSetup(hwp, tuple(v[0] for v in m), tuple(v[1] for v in m)), noise

    grid: dict = {}
    st: dict = {}
    if canonical in ("optimal", "separable"):
        fitted, _ = ph.fitted_cglmp4_preparations(canonical)
        grid = {(a, x): fitted[x][a] for x in range(len(fitted)) for a in range(len(fitted[0]))}
        st = dict(enumerate(ph.CGLMP4_STATIONS))
    for key, (lineno, ket) in targets.items():
        fit = ph.fit_preparation(ket)
        if not fit.reachable:
            raise FormatError(lineno, f"target outside the reachable family (residual {fit.residual:.2e})", source)
        grid[key] = fit.params
    grid.update(preps)
    st.update(stations)
    n_a = 1 + max((a for a, _ in grid), default=-1)
    n_x = 1 + max((x for _, x in grid), default=-1)
    if not grid or len(grid) != n_a * n_x:
        raise FormatError(None, f"preparations must cover a full (a, x) grid, got {sorted(grid)}", source)
    if sorted(st) != list(range(len(st))) or not st:
        raise FormatError(None, f"stations must be numbered 0..n_y-1, got {sorted(st)}", source)
    preps_t = tuple(tuple(grid[(a, x)] for a in range(n_a)) for x in range(n_x))
    return ph.CglmpSetup(preps_t, tuple(st[y] for y in range(len(st))), FUNCTIONALS[functional]), noise


def dump_setup(setup, noise=None) -> str:
    from . import photonics as ph

    out = [SETUP_HEADER, f"functional {setup.functional.name}"]
    if isinstance(setup, ph.ChshSetup):
        for (a, x), v in sorted(setup.prep_hwp.items()):
            out.append(f"prep_hwp {a} {x} {float(v)!r}")
        for y, (v, sw) in enumerate(zip(setup.meas_hwp, setup.outcome_swap)):
            out.append(f"meas_hwp {y} {float(v)!r} {int(bool(sw))}")
    else:
        for x, row in enumerate(setup.preps):
            for a, p in enumerate(row):
                out.append(f"prep {a} {x} " + " ".join(repr(float(v)) for v in p.as_array()))
        for y, s in enumerate(setup.stations):
            out.append(f"station {y} " + " ".join(repr(float(v)) for v in s.as_array()))
    if noise is not None:
        for k in _NOISE_KEYS:
            v = getattr(noise, k)
            out.append(f"noise {k} {str(v).lower() if isinstance(v, bool) else repr(v) if isinstance(v, float) else v}")
    out.append("end")
    return "\n".join(out) + "\n"


MONTECARLO_HEADER = "# ctxdim-montecarlo v1"


def dump_montecarlo(result, functional: str) -> str:
    out = [MONTECARLO_HEADER, f"functional {functional}", f"samples {result.samples}", f"seed {result.seed}",
           f"nominal {float(result.nominal)!r}", f"mean {float(result.mean)!r}", f"std {float(result.std)!r}"]
    for p, v in result.percentiles.items():
        out.append(f"percentile {float(p)!r} {float(v)!r}")
    out.append("end")
    return "\n".join(out) + "\n"
