"""Time-dependent coefficient matrices, the normalised symbol and test families.

A field is an ``n x n`` symmetric matrix of scalar entries ``a_ij(t)`` on
``[0, T]``. For a direction ``xi`` the symbol is

    a(t, xi) = sum_ij a_ij(t) xi_i xi_j / |xi|^2

Entries are small frozen records that know how to pack themselves into the
flat arrays consumed by the compiled kernels in :mod:`wellposed._jit`.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
from scipy.interpolate import CubicSpline

from . import _jit
from .moduli import BlowupSpec, DomainError, ModulusSpec, PsiSpec

INV_E = math.exp(-1.0)
PRM_WIDTH = 6


# ---------------------------------------------------------------------------
# phases of oscillatory entries


@dataclass(frozen=True)
class PowerPhase:
    """Phase ``t**(-q)``."""

    q: float

    def __post_init__(self):
        if self.q <= 0:
            raise ValueError("phase exponent q must be positive")

    def params(self, T: float) -> list:
        return [_jit.PH_POWER, self.q, 0.0, T]

    def to_dict(self) -> dict:
        return {"kind": "power", "q": self.q}


@dataclass(frozen=True)
class PsiPhase:
    """Phase with derivative ``-1/nu(t)`` for the psi-derived rate, zero at ``t = T``."""

    psi: PsiSpec

    def params(self, T: float) -> list:
        return [_jit.PH_PSI, float(self.psi.code), self.psi.param, T]

    def to_dict(self) -> dict:
        return {"kind": "psi", "psi": self.psi.to_dict()}


def _phase_from_dict(data: dict):
    if data["kind"] == "power":
        return PowerPhase(float(data["q"]))
    if data["kind"] == "psi":
        return PsiPhase(PsiSpec.from_dict(data["psi"]))
    raise ValueError(f"unknown phase kind {data['kind']!r}")


# ---------------------------------------------------------------------------
# scalar entries


@dataclass(frozen=True)
class ConstantEntry:
    c: float

    kind = _jit.K_CONST

    def params(self, T: float) -> list:
        return [self.c]

    def limit_at_zero(self) -> Optional[float]:
        return self.c

    def sup_norm(self, T: float) -> float:
        return abs(self.c)

    def to_dict(self) -> dict:
        return {"kind": "constant", "c": self.c}


@dataclass(frozen=True)
class AffineEntry:
    """``c0 + c1 t``."""

    c0: float
    c1: float

    kind = _jit.K_AFFINE

    def params(self, T: float) -> list:
        return [self.c0, self.c1]

    def limit_at_zero(self) -> Optional[float]:
        return self.c0

    def sup_norm(self, T: float) -> float:
        return max(abs(self.c0), abs(self.c0 + self.c1 * T))

    def to_dict(self) -> dict:
        return {"kind": "affine", "c0": self.c0, "c1": self.c1}


@dataclass(frozen=True)
class OscillatoryEntry:
    """``base + amplitude * sin(phase(t))``."""

    base: float
    amplitude: float
    phase: Union[PowerPhase, PsiPhase]

    kind = _jit.K_OSC

    def params(self, T: float) -> list:
        return [self.base, self.amplitude] + self.phase.params(T)

    def has_limit(self) -> bool:
        # only a psi phase with bounded psi converges as t -> 0
        return isinstance(self.phase, PsiPhase) and math.isfinite(self.phase.psi.chi)

    def limit_at_zero(self) -> Optional[float]:
        if not self.has_limit():
            return None
        prm = np.array(self.params(1.0))
        return _jit.entry_eval(self.kind, prm, np.zeros(1), np.zeros((4, 1)), 0.0, 0)

    def sup_norm(self, T: float) -> float:
        return abs(self.base) + abs(self.amplitude)

    def to_dict(self) -> dict:
        return {"kind": "oscillatory", "base": self.base, "amplitude": self.amplitude,
                "phase": self.phase.to_dict()}


@dataclass(frozen=True)
class TabulatedEntry:
    """Not-a-knot cubic spline through ``(t, value)`` samples.

    Outside the sample range the end polynomials are extended, so a table
    should cover ``[0, T]`` or start close enough to 0 for the purpose.
    """

    t: tuple
    values: tuple
    source: str = ""

    kind = _jit.K_TAB

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        if t.size < 4 or np.any(np.diff(t) <= 0):
            raise ValueError("tabulated entry needs >= 4 strictly increasing times")
        if len(self.values) != t.size:
            raise ValueError("times and values differ in length")

    @classmethod
    def from_arrays(cls, t, values, source: str = "") -> "TabulatedEntry":
        return cls(tuple(float(x) for x in t), tuple(float(x) for x in values), source)

    @classmethod
    def load(cls, path: Union[str, Path]) -> "TabulatedEntry":
        data = np.loadtxt(path, ndmin=2)
        if data.shape[1] != 2:
            raise ValueError(f"{path}: expected two columns (t, value)")
        return cls.from_arrays(data[:, 0], data[:, 1], str(path))

    @cached_property
    def spline(self) -> CubicSpline:
        return CubicSpline(np.asarray(self.t), np.asarray(self.values))

    def params(self, T: float) -> list:
        return [0.0, float(len(self.t))]

    def limit_at_zero(self) -> Optional[float]:
        return float(self.spline(0.0))

    def sup_norm(self, T: float) -> float:
        ts = np.union1d(np.asarray(self.t), np.linspace(0.0, T, 4097))
        return float(np.max(np.abs(self.spline(ts[(ts >= 0) & (ts <= T)]))))

    def to_dict(self) -> dict:
        if self.source:
            return {"kind": "tabulated", "path": self.source}
        return {"kind": "tabulated", "t": list(self.t), "values": list(self.values)}


Entry = Union[ConstantEntry, AffineEntry, OscillatoryEntry, TabulatedEntry]


def entry_from_dict(data: dict) -> Entry:
    kind = data["kind"]
    if kind == "constant":
        return ConstantEntry(float(data["c"]))
    if kind == "affine":
        return AffineEntry(float(data["c0"]), float(data["c1"]))
    if kind == "oscillatory":
        return OscillatoryEntry(float(data["base"]), float(data["amplitude"]),
                                _phase_from_dict(data["phase"]))
    if kind == "tabulated":
        if "path" in data:
            return TabulatedEntry.load(data["path"])
        return TabulatedEntry.from_arrays(data["t"], data["values"])
    raise ValueError(f"unknown entry kind {kind!r}")


# ---------------------------------------------------------------------------
# packed representation for the compiled kernels


@dataclass(frozen=True)
class PackedSymbol:
    """Flat arrays describing ``t -> a(t, xi)`` for one direction."""

    kinds: np.ndarray
    prms: np.ndarray
    weights: np.ndarray
    tab_x: np.ndarray
    tab_c: np.ndarray
    T: float

    def args(self) -> tuple:
        return self.kinds, self.prms, self.weights, self.tab_x, self.tab_c

    def __call__(self, t, order: int = 0) -> np.ndarray:
        ts = np.atleast_1d(np.asarray(t, dtype=float))
        return _jit.symbol_eval_many(*self.args(), ts, order)

    def oscillatory_groups(self) -> list:
        """Distinct phases among the oscillatory terms, with summed amplitude."""
        groups = {}
        for k, kind in enumerate(self.kinds):
            if kind != _jit.K_OSC or self.weights[k] == 0.0:
                continue
            key = tuple(self.prms[k, 2:6])
            groups[key] = groups.get(key, 0.0) + self.weights[k] * self.prms[k, 1]
        return [(np.array([0.0, 0.0, *key]), amp) for key, amp in groups.items() if amp != 0.0]

    def without_oscillation(self) -> "PackedSymbol":
        """The same symbol with every oscillation amplitude set to zero."""
        prms = self.prms.copy()
        prms[self.kinds == _jit.K_OSC, 1] = 0.0
        return PackedSymbol(self.kinds, prms, self.weights, self.tab_x, self.tab_c, self.T)


# ---------------------------------------------------------------------------
# certificates and fields


@dataclass(frozen=True)
class Certificate:
    """Empirical regularity record ``|a(t+tau) - a(t)| <= C mu(tau) / nu(t)``.

    ``C`` is what the mollifier bounds use. ``C_estimate`` is the grid
    sup-estimate; ``C_analytic`` is the closed-form constant where the test
    family has one. ``C`` is the larger of the two.
    """

    C: float
    modulus: ModulusSpec
    blowup: BlowupSpec
    tau0: float
    C_estimate: float
    C_analytic: Optional[float] = None
    xi_samples: tuple = ()

    def to_dict(self) -> dict:
        return {"C": self.C, "C_estimate": self.C_estimate, "C_analytic": self.C_analytic,
                "tau0": self.tau0, "modulus": self.modulus.to_dict(),
                "blowup": self.blowup.to_dict()}


@dataclass(frozen=True)
class HyperbolicityReport:
    lower: float
    upper: float
    passed: bool
    argmin: tuple
    argmax: tuple
    message: str = ""

    def __iter__(self):
        return iter((self.lower, self.upper))


def _unit(xi) -> np.ndarray:
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    nrm = float(np.linalg.norm(xi))
    if nrm == 0.0 or not math.isfinite(nrm):
        raise DomainError("xi must be a finite nonzero vector")
    return xi / nrm


@dataclass(frozen=True, eq=False)
class CoefficientField:
    """Symmetric matrix of scalar entries on ``[0, T]``.

    Parameters
    ----------
    entries
        Nested tuple, ``entries[i][j]``; must be symmetric.
    T
        Final time.
    lambda0, Lambda0
        Hyperbolicity bounds. Filled in from :func:`check_hyperbolicity` when
        omitted.
    t_min
        Start time for mode integrations. Required to be positive when some
        entry has no limit at ``t = 0``.
    """

    entries: tuple
    T: float = 1.0
    lambda0: Optional[float] = None
    Lambda0: Optional[float] = None
    certificate: Optional[Certificate] = None
    name: str = ""
    t_min: float = 0.0
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        entries = tuple(tuple(row) for row in self.entries)
        object.__setattr__(self, "entries", entries)
        n = len(entries)
        if n == 0 or any(len(row) != n for row in entries):
            raise ValueError("entries must be a non-empty square matrix")
        for i in range(n):
            for j in range(i):
                if entries[i][j] != entries[j][i]:
                    raise ValueError(f"entries not symmetric at ({i}, {j})")
        if self.T <= 0:
            raise ValueError("T must be positive")
        if self.t_min < 0 or self.t_min >= self.T:
            raise ValueError("t_min must lie in [0, T)")
        if self.lambda0 is None or self.Lambda0 is None:
            rep = check_hyperbolicity(self)
            object.__setattr__(self, "lambda0", rep.lower)
            object.__setattr__(self, "Lambda0", rep.upper)
        if not self.lambda0 > 0:
            raise ValueError(f"field is not strictly hyperbolic (lambda0 = {self.lambda0})")

    @classmethod
    def scalar(cls, entry: Entry, T: float = 1.0, **kw) -> "CoefficientField":
        return cls(((entry,),), T=T, **kw)

    @classmethod
    def diagonal(cls, entries: Sequence[Entry], T: float = 1.0, **kw) -> "CoefficientField":
        n = len(entries)
        zero = ConstantEntry(0.0)
        rows = tuple(tuple(entries[i] if i == j else zero for j in range(n)) for i in range(n))
        return cls(rows, T=T, **kw)

    @property
    def n(self) -> int:
        return len(self.entries)

    @cached_property
    def sup_norm(self) -> float:
        """Sup over ``[0, T]`` of the operator norm bound ``sum_ij |a_ij|``."""
        if self.n == 1:
            return self.entries[0][0].sup_norm(self.T)
        return float(max(self.Lambda0, sum(e.sup_norm(self.T) for row in self.entries for e in row)))

    @cached_property
    def has_limit_at_zero(self) -> bool:
        for row in self.entries:
            for e in row:
                if isinstance(e, OscillatoryEntry) and not e.has_limit():
                    return False
        return True

    @cached_property
    def _tables(self):
        xs, cs = [np.zeros(1)], [np.zeros((4, 1))]
        offsets = {}
        off = 1
        for row in self.entries:
            for e in row:
                if isinstance(e, TabulatedEntry) and id(e) not in offsets:
                    sp = e.spline
                    offsets[id(e)] = off
                    xs.append(np.asarray(sp.x, dtype=float))
                    c = np.zeros((4, sp.x.size))
                    c[:, :-1] = sp.c
                    cs.append(c)
                    off += sp.x.size
        return np.concatenate(xs), np.ascontiguousarray(np.concatenate(cs, axis=1)), offsets

    def pack(self, xi=None) -> PackedSymbol:
        """Flat arrays for the symbol in direction ``xi`` (default: first axis)."""
        u = np.eye(self.n)[0] if xi is None else _unit(xi)
        if u.size != self.n:
            raise DomainError(f"xi has dimension {u.size}, field has {self.n}")
        tab_x, tab_c, offsets = self._tables
        kinds, prms, weights = [], [], []
        for i in range(self.n):
            for j in range(self.n):
                w = u[i] * u[j]
                e = self.entries[i][j]
                p = e.params(self.T)
                if isinstance(e, TabulatedEntry):
                    p = [float(offsets[id(e)]), p[1]]
                kinds.append(e.kind)
                prms.append(p + [0.0] * (PRM_WIDTH - len(p)))
                weights.append(w)
        return PackedSymbol(np.asarray(kinds, dtype=np.int64), np.asarray(prms, dtype=float),
                            np.asarray(weights, dtype=float), tab_x, tab_c, self.T)

    def entry_values(self, t) -> np.ndarray:
        """Matrix of entry values at each t, shape ``(len(t), n, n)``."""
        ts = np.atleast_1d(np.asarray(t, dtype=float))
        tab_x, tab_c, offsets = self._tables
        out = np.empty((ts.size, self.n, self.n))
        for i in range(self.n):
            for j in range(self.n):
                e = self.entries[i][j]
                p = e.params(self.T)
                if isinstance(e, TabulatedEntry):
                    p = [float(offsets[id(e)]), p[1]]
                prm = np.asarray(p + [0.0] * (PRM_WIDTH - len(p)))
                out[:, i, j] = _jit.entry_eval_many(e.kind, prm, tab_x, tab_c, ts, 0)
        return out

    def to_dict(self) -> dict:
        out = {"name": self.name, "T": self.T,
               "entries": [[e.to_dict() for e in row] for row in self.entries]}
        if self.t_min:
            out["t_min"] = self.t_min
        return out


def symbol(field: CoefficientField, t, xi):
    """Normalised quadratic form ``sum a_ij(t) xi_i xi_j / |xi|^2``.

    Accepts scalar or array ``t``; returns a float for scalar input.
    """
    ts = np.asarray(t, dtype=float)
    if np.any(ts < 0) or np.any(ts > field.T * (1 + 1e-15)):
        raise DomainError(f"t outside [0, {field.T}]")
    out = field.pack(xi)(ts.ravel())
    return float(out[0]) if ts.ndim == 0 else out.reshape(ts.shape)


def sphere_samples(n: int, count: int = 16) -> np.ndarray:
    """Deterministic unit vectors: the axes, diagonals, then a golden-angle spiral."""
    if n == 1:
        return np.ones((1, 1))
    pts = [row for row in np.eye(n)]
    for i in range(n):
        for j in range(i + 1, n):
            v = np.zeros(n)
            v[i] = v[j] = 1 / math.sqrt(2)
            pts.append(v.copy())
            v[j] = -v[j]
            pts.append(v)
    if n == 2:
        ang = np.linspace(0.0, math.pi, count, endpoint=False)
        pts.extend(np.stack([np.cos(ang), np.sin(ang)], axis=1))
    else:
        rng = np.random.default_rng(12345)
        g = rng.standard_normal((count, n))
        pts.extend(g / np.linalg.norm(g, axis=1, keepdims=True))
    return np.asarray(pts)


def default_t_grid(field: CoefficientField, n: int = 4096) -> np.ndarray:
    lo = field.t_min if field.t_min > 0 else 1e-6 * field.T
    return np.unique(np.concatenate((np.geomspace(lo, field.T, n), np.linspace(lo, field.T, n))))


def check_hyperbolicity(field: CoefficientField, t_grid=None, xi_grid=None) -> HyperbolicityReport:
    """Min and max of the symbol over a product grid of times and unit directions."""
    ts = default_t_grid(field) if t_grid is None else np.asarray(t_grid, dtype=float)
    dirs = sphere_samples(field.n) if xi_grid is None else np.atleast_2d(np.asarray(xi_grid, float))
    if ts.size == 0 or dirs.size == 0:
        raise ValueError("grids must be non-empty")
    lo, hi = math.inf, -math.inf
    amin = amax = (math.nan, None)
    for d in dirs:
        vals = field.pack(d)(ts)
        i, j = int(np.argmin(vals)), int(np.argmax(vals))
        if vals[i] < lo:
            lo, amin = float(vals[i]), (float(ts[i]), tuple(d))
        if vals[j] > hi:
            hi, amax = float(vals[j]), (float(ts[j]), tuple(d))
    ok = lo > 0
    msg = "ok" if ok else f"symbol reaches {lo:g} at t={amin[0]:g}, xi={amin[1]}"
    return HyperbolicityReport(lo, hi, ok, amin, amax, msg)


def estimate_regularity_constant(field: CoefficientField, modulus: ModulusSpec,
                                 blowup: BlowupSpec, t_grid=None, tau_grid=None,
                                 xi_samples=None, n: int = 512) -> float:
    """Grid sup of ``|a(t+tau, xi) - a(t, xi)| nu(t) / mu(tau)``.

    Default grids are log-spaced: ``t`` in ``[1e-3 T, T]`` (or ``[t_min, T]``)
    and ``tau`` in ``[1e-13, tau0]``, ``n`` points each. Pairs with
    ``t + tau > T`` are skipped.
    """
    T = field.T
    t_lo = max(field.t_min, 1e-3 * T)
    ts = np.geomspace(t_lo, T, n) if t_grid is None else np.asarray(t_grid, dtype=float)
    taus = (np.geomspace(1e-13, modulus.tau0, n) if tau_grid is None
            else np.asarray(tau_grid, dtype=float))
    if np.any(ts <= 0) or np.any(taus <= 0) or np.any(taus > modulus.tau0 * (1 + 1e-12)):
        raise DomainError("grid points must satisfy 0 < t and 0 < tau <= tau0")
    dirs = sphere_samples(field.n) if xi_samples is None else np.atleast_2d(xi_samples)
    nu = np.asarray(blowup(ts), dtype=float)
    mu = np.asarray(modulus(taus), dtype=float)
    tt = ts[:, None] + taus[None, :]
    mask = tt <= T
    best = 0.0
    for d in dirs:
        sym = field.pack(d)
        a0 = sym(ts)
        a1 = np.zeros_like(tt)
        a1[mask] = sym(tt[mask])
        ratio = np.abs(a1 - a0[:, None]) * nu[:, None] / mu[None, :]
        best = max(best, float(np.max(np.where(mask, ratio, 0.0))))
    return best


# ---------------------------------------------------------------------------
# test families


def _psi_phase_limit(psi: PsiSpec, T: float) -> float:
    prm = np.array([0.0, 0.0, _jit.PH_PSI, psi.code, psi.param, T])
    return _jit.phase_eval(prm, 0.0, 0)


def _phase_t_min(phase, T: float, target: float = 1e5) -> float:
    """Time where the phase reaches ``target`` radians, clipped to ``[1e-6 T, T/2]``."""
    prm = np.array([0.0, 0.0, *phase.params(T)])
    if _jit.phase_eval(prm, 1e-6 * T, 0) < target:
        return 1e-6 * T
    return float(min(_jit.phase_inverse(prm, target), 0.5 * T))


def make_test_coefficient(kind: str, **params) -> CoefficientField:
    """Build one of the test families with hyperbolicity bounds and a certificate.

    Kinds and parameters:

    ``constant``         c
    ``affine``           c0, c1
    ``holder_singular``  alpha, p, base=2, amplitude=1; ``base + amplitude sin(t^-q)``
                         with ``q = p/alpha - 1``
    ``oscillatory``      q, base=2, amplitude=1 (no certificate)
    ``psi_singular``     psi (PsiSpec or dict), base=2, amplitude=1
    ``tabulated``        path, or t and values

    All kinds accept ``T`` (default 1), ``t_min`` and ``certify`` (default True).
    """
    T = float(params.pop("T", 1.0))
    certify = bool(params.pop("certify", True))
    t_min = params.pop("t_min", None)
    base = float(params.pop("base", 2.0))
    amp = float(params.pop("amplitude", 1.0))
    record = {"kind": kind, "T": T}

    def reject_unknown():
        if params:
            raise ValueError(f"unknown parameters for {kind}: {sorted(params)}")

    if kind in ("holder_singular", "oscillatory", "psi_singular"):
        if base - abs(amp) <= 0:
            raise ValueError(f"base - |amplitude| = {base - abs(amp)} violates strict hyperbolicity")
        record.update(base=base, amplitude=amp)

    if kind == "constant":
        c = float(params.pop("c"))
        reject_unknown()
        if c <= 0:
            raise ValueError("constant coefficient must be positive")
        record["c"] = c
        cert = Certificate(0.0, ModulusSpec.holder(1.0, T), BlowupSpec.constant(), T, 0.0, 0.0, (1.0,))
        return CoefficientField.scalar(ConstantEntry(c), T, lambda0=c, Lambda0=c,
                                       certificate=cert, name="constant", params=record)

    if kind == "affine":
        c0, c1 = float(params.pop("c0")), float(params.pop("c1"))
        reject_unknown()
        lo, hi = sorted((c0, c0 + c1 * T))
        if lo <= 0:
            raise ValueError("affine coefficient must stay positive on [0, T]")
        record.update(c0=c0, c1=c1)
        cert = Certificate(abs(c1), ModulusSpec.holder(1.0, T), BlowupSpec.constant(), T,
                           abs(c1), abs(c1), (1.0,))
        return CoefficientField.scalar(AffineEntry(c0, c1), T, lambda0=lo, Lambda0=hi,
                                       certificate=cert, name="affine", params=record)

    if kind in ("holder_singular", "oscillatory"):
        if kind == "holder_singular":
            alpha, p = float(params.pop("alpha")), float(params.pop("p"))
            if not 0 < alpha <= 1 or p <= alpha:
                raise ValueError("holder_singular needs 0 < alpha <= 1 and p > alpha")
            q = p / alpha - 1.0
            record.update(alpha=alpha, p=p)
        else:
            q = float(params.pop("q"))
            record["q"] = q
        reject_unknown()
        phase = PowerPhase(q)
        entry = OscillatoryEntry(base, amp, phase)
        t0 = _phase_t_min(phase, T) if t_min is None else float(t_min)
        record["t_min"] = t0
        lam, Lam = base - abs(amp), base + abs(amp)
        cert = None
        if kind == "holder_singular" and certify:
            mod, nu = ModulusSpec.holder(alpha, T), BlowupSpec.power(p)
            probe = CoefficientField.scalar(entry, T, lambda0=lam, Lambda0=Lam, t_min=t0)
            est = estimate_regularity_constant(probe, mod, nu)
            # |da| <= |A| min(2, q t^(-q-1) tau), maximised at q tau = 2 t^(q+1)
            analytic = 2.0 * abs(amp) * (q / 2.0) ** alpha
            cert = Certificate(max(est, analytic), mod, nu, T, est, analytic, (1.0,))
        return CoefficientField.scalar(entry, T, lambda0=lam, Lambda0=Lam, certificate=cert,
                                       name=kind, t_min=t0, params=record)

    if kind == "psi_singular":
        psi = params.pop("psi")
        psi = psi if isinstance(psi, PsiSpec) else PsiSpec.from_dict(psi)
        reject_unknown()
        record["psi"] = psi.to_dict()
        phase = PsiPhase(psi)
        entry = OscillatoryEntry(base, amp, phase)
        bounded = math.isfinite(psi.chi)
        t0 = (0.0 if bounded else 1e-6 * T) if t_min is None else float(t_min)
        record["t_min"] = t0
        lam, Lam = base - abs(amp), base + abs(amp)
        cert = None
        if certify:
            mod = ModulusSpec.from_psi(psi)
            nu = BlowupSpec.from_psi(psi)
            probe = CoefficientField.scalar(entry, T, lambda0=lam, Lambda0=Lam, t_min=t0)
            est = estimate_regularity_constant(
                probe, mod, nu, t_grid=np.geomspace(1e-8 * T, T, 512),
                tau_grid=np.geomspace(1e-12, mod.tau0, 512))
            # |da| <= |A| tau / nu(t), so C <= |A| sup tau/mu(tau) = |A| psi(r0)/r0
            r0 = -math.log(mod.tau0)
            analytic = abs(amp) * psi(r0) / r0
            cert = Certificate(max(est, analytic), mod, nu, mod.tau0, est, analytic, (1.0,))
        return CoefficientField.scalar(entry, T, lambda0=lam, Lambda0=Lam, certificate=cert,
                                       name=kind, t_min=t0, params=record)

    if kind == "tabulated":
        if "path" in params:
            entry = TabulatedEntry.load(params.pop("path"))
        else:
            entry = TabulatedEntry.from_arrays(params.pop("t"), params.pop("values"))
        reject_unknown()
        record["entry"] = entry.to_dict()
        fld = CoefficientField.scalar(entry, T, name="tabulated", params=record,
                                      t_min=0.0 if t_min is None else float(t_min))
        if not fld.lambda0 > 0:
            raise ValueError("tabulated coefficient is not strictly hyperbolic")
        return fld

    raise ValueError(f"unknown test family {kind!r}")


def field_from_dict(data: dict) -> CoefficientField:
    """Inverse of the ``params`` record stored on generated fields."""
    data = dict(data)
    kind = data.pop("kind")
    if kind == "tabulated" and "entry" in data:
        entry = data.pop("entry")
        data.update({k: v for k, v in entry.items() if k != "kind"})
    return make_test_coefficient(kind, **data)


def start_time(field: CoefficientField, requested: Optional[float] = None) -> float:
    """Start time for a mode run: 0 where the field has a limit there, else ``t_min``."""
    if requested is not None:
        if requested == 0.0 and not field.has_limit_at_zero:
            raise DomainError(f"{field.name or 'field'} has no limit at t=0; start at t_min > 0")
        return float(requested)
    if field.has_limit_at_zero:
        return 0.0
    if field.t_min <= 0:
        raise DomainError("field has no limit at t=0 and no t_min")
    warnings.warn(f"{field.name or 'field'} has no limit at t=0; data are posed at "
                  f"t_min={field.t_min:.6g}", stacklevel=3)
    return field.t_min
