"""Clamped extension, mollification and the quantitative approximation bounds.

For ``0 < eps <= tau0`` the coefficient is clamped to ``a(eps)`` on
``t <= eps`` and to ``a(T)`` on ``t >= T``, then convolved with
``rho_eps(s) = rho(s/eps)/eps``. Writing the convolution in the kernel
variable ``x = (t - s)/eps``,

    a_eps(t)  = int rho(x) a~(t - eps x) dx
    a_eps'(t) = (1/eps) int rho'(x) a~(t - eps x) dx

The clamped pieces are integrated against the kernel directly. On the
unclamped window oscillatory entries are integrated on Gauss-Legendre
panels that are uniform in phase; when the window holds more phase than
``rmax`` radians the fast end is replaced by an integration-by-parts
endpoint expansion.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Optional

import numpy as np
from scipy import integrate

from . import _jit
from .coefficients import CoefficientField, PackedSymbol, sphere_samples
from .moduli import DomainError

KERNELS = {"bump": _jit.KER_BUMP, "polynomial": _jit.KER_POLY}

# panel widths: 3 rad of phase, 1/12 of the kernel support
PHASE_STEP = 3.0
WIDTH_STEP = 1.0 / 12.0
# phase span above which the endpoint expansion takes over
ASYMPTOTIC_SPAN = 2.0e4


class QuadratureError(RuntimeError):
    """Quadrature did not reach the requested tolerance."""

    def __init__(self, message: str, achieved: float):
        super().__init__(f"{message} (achieved error estimate {achieved:.3g})")
        self.achieved = achieved


@dataclass(frozen=True)
class MollifierKernel:
    """Smooth unit-mass kernel supported in ``[-1, 1]``.

    ``bump`` is the normalised ``exp(-1/(1-x^2))``; ``polynomial`` is the
    normalised ``(1-x^2)^4``, which is only C^3 at the ends but cheap to
    integrate. Mass and ``||rho'||_1`` are recomputed by adaptive quadrature
    on construction.
    """

    profile: str = "bump"

    def __post_init__(self):
        if self.profile not in KERNELS:
            raise ValueError(f"unknown kernel profile {self.profile!r}")

    @property
    def code(self) -> int:
        return KERNELS[self.profile]

    @property
    def is_even(self) -> bool:
        return True

    def __call__(self, x, order: int = 0):
        x = np.asarray(x, dtype=float)
        out = np.vectorize(lambda v: _jit.kernel_eval(self.code, v, order), otypes=[float])(x)
        return float(out) if out.ndim == 0 else out

    @cached_property
    def mass(self) -> float:
        f = lambda x: _jit.kernel_eval(self.code, x, 0)
        return sum(integrate.quad(f, a, b, epsabs=1e-14, epsrel=1e-13)[0]
                   for a, b in ((-1, 0), (0, 1)))

    @cached_property
    def derivative_l1(self) -> float:
        """``||rho'||_{L^1}``."""
        f = lambda x: abs(_jit.kernel_eval(self.code, x, 1))
        return sum(integrate.quad(f, a, b, epsabs=1e-14, epsrel=1e-13)[0]
                   for a, b in ((-1, 0), (0, 1)))

    def to_dict(self) -> dict:
        return {"profile": self.profile}


@dataclass(frozen=True)
class QuadratureSettings:
    phase_step: float = PHASE_STEP
    width_step: float = WIDTH_STEP
    asymptotic_span: float = ASYMPTOTIC_SPAN

    def refined(self) -> "QuadratureSettings":
        return QuadratureSettings(self.phase_step / 2, self.width_step / 2, self.asymptotic_span * 2)


@dataclass(frozen=True, eq=False)
class MollifiedCoefficient:
    """The pair (clamped extension, mollification) of a field at scale ``eps``.

    Evaluation takes an optional direction ``xi``; the default is the first
    coordinate axis, which for scalar fields is the only direction.
    """

    field: CoefficientField
    eps: float
    kernel: MollifierKernel = MollifierKernel()
    tol: float = 1e-10
    quad: QuadratureSettings = QuadratureSettings()

    def __post_init__(self):
        if not self.eps > 0:
            raise DomainError("eps must be positive")
        if self.eps > validity_scale(self.field) * (1 + 1e-12):
            raise DomainError(f"eps={self.eps!r} exceeds tau0={validity_scale(self.field)!r}")
        if self.tol <= 0:
            raise ValueError("tolerance must be positive")

    def _packed(self, xi) -> PackedSymbol:
        return self.field.pack(xi)

    def _pair(self, t, xi, quad=None) -> tuple:
        q = self.quad if quad is None else quad
        ts = np.asarray(t, dtype=float)
        flat = np.ascontiguousarray(ts.ravel())
        if np.any(flat < 0) or np.any(flat > self.field.T * (1 + 1e-15)):
            raise DomainError(f"t outside [0, {self.field.T}]")
        sym = self._packed(xi)
        out = _jit.mollify_pair_many(flat, self.eps, self.kernel.code, *sym.args(), self.field.T,
                                     _jit.GL_NODES, _jit.GL_WEIGHTS, q.asymptotic_span,
                                     q.phase_step, q.width_step)
        return ts, out

    def _eval(self, t, xi, order, quad=None):
        ts, out = self._pair(t, xi, quad)
        col = out[:, order]
        return float(col[0]) if ts.ndim == 0 else col.reshape(ts.shape)

    def pair(self, t, xi=None) -> tuple:
        """``(a_eps(t), a_eps'(t))`` from a single quadrature sweep."""
        ts, out = self._pair(t, xi)
        if ts.ndim == 0:
            return float(out[0, 0]), float(out[0, 1])
        return out[:, 0].reshape(ts.shape), out[:, 1].reshape(ts.shape)

    def value(self, t, xi=None):
        return self._eval(t, xi, 0)

    def derivative(self, t, xi=None):
        return self._eval(t, xi, 1)

    def extended(self, t, xi=None):
        ts = np.asarray(t, dtype=float)
        s = np.clip(ts, self.eps, self.field.T)
        out = self._packed(xi)(s.ravel())
        return float(out[0]) if ts.ndim == 0 else out.reshape(ts.shape)

    def error_estimate(self, t, xi=None, order: int = 0):
        """Difference from a rerun with halved panels and a doubled expansion threshold."""
        return np.abs(self._eval(t, xi, order) - self._eval(t, xi, order, self.quad.refined()))


def validity_scale(field: CoefficientField) -> float:
    """tau0 of the field's certificate, or T when it has none."""
    return field.certificate.tau0 if field.certificate is not None else field.T


def extend(field: CoefficientField, eps: float, t, xi=None):
    """Clamped extension: ``a(eps)`` below ``eps``, ``a(T)`` above ``T``."""
    if not 0 < eps <= validity_scale(field) * (1 + 1e-12):
        raise DomainError(f"eps={eps!r} outside ]0, tau0]")
    ts = np.asarray(t, dtype=float)
    out = field.pack(xi)(np.clip(ts, eps, field.T).ravel())
    return float(out[0]) if ts.ndim == 0 else out.reshape(ts.shape)


def _checked(mc: MollifiedCoefficient, t, xi, order: int, check: bool):
    val = mc._eval(t, xi, order)
    if check:
        err = float(np.max(mc.error_estimate(t, xi, order)))
        scale = 1.0 if order == 0 else 1.0 / mc.eps
        if err > mc.tol * scale:
            raise QuadratureError("mollifier quadrature", err)
    return val


def mollify_value(mc: MollifiedCoefficient, t, xi=None, check: bool = False):
    """``a_eps(t, xi)``.

    With ``check=True`` the result is compared with a refined evaluation and
    :class:`QuadratureError` is raised when they differ by more than ``mc.tol``.
    """
    return _checked(mc, t, xi, 0, check)


def mollify_derivative(mc: MollifiedCoefficient, t, xi=None, check: bool = False):
    """``d/dt a_eps(t, xi)``; the check tolerance is ``mc.tol / eps``."""
    return _checked(mc, t, xi, 1, check)


# ---------------------------------------------------------------------------
# approximation bounds


def bound_constants(field: CoefficientField, kernel: MollifierKernel) -> tuple:
    """``(C', C'', kappa)`` from the certificate, the sup norm and the kernel."""
    cert = field.certificate
    if cert is None:
        raise ValueError("field carries no regularity certificate")
    C = cert.C
    kappa = cert.blowup.kappa
    sup = field.sup_norm
    c1 = max(C, C / kappa, 2.0 * sup)
    c2 = kernel.derivative_l1 * max(C, C / kappa, sup)
    return c1, c2, kappa


REPORT_COLUMNS = ("eps", "t", "lhs1", "rhs1", "lhs2", "rhs2", "pass1", "pass2")


@dataclass
class BoundReport:
    """Pointwise check of the two approximation bounds on an (eps, t) grid."""

    eps: np.ndarray
    t: np.ndarray
    lhs1: np.ndarray
    rhs1: np.ndarray
    lhs2: np.ndarray
    rhs2: np.ndarray
    C1: float = math.nan
    C2: float = math.nan
    kappa: float = math.nan
    pass1: np.ndarray = field(init=False)
    pass2: np.ndarray = field(init=False)

    def __post_init__(self):
        for name in ("eps", "t", "lhs1", "rhs1", "lhs2", "rhs2"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float).ravel())
        self.pass1 = self.lhs1 <= self.rhs1
        self.pass2 = self.lhs2 <= self.rhs2

    @property
    def passed(self) -> bool:
        return bool(np.all(self.pass1) and np.all(self.pass2))

    @property
    def pass_fraction(self) -> float:
        return float(np.mean(self.pass1 & self.pass2))

    @property
    def worst_margin1(self) -> float:
        """min over the grid of ``(rhs - lhs)/rhs``; negative means a failure."""
        return _worst(self.lhs1, self.rhs1)

    @property
    def worst_margin2(self) -> float:
        return _worst(self.lhs2, self.rhs2)

    def rows(self):
        for k in range(self.eps.size):
            yield (self.eps[k], self.t[k], self.lhs1[k], self.rhs1[k], self.lhs2[k],
                   self.rhs2[k], bool(self.pass1[k]), bool(self.pass2[k]))

    def summary(self) -> dict:
        return {"points": int(self.eps.size), "passed": self.passed,
                "pass_fraction": self.pass_fraction, "C1": self.C1, "C2": self.C2,
                "kappa": self.kappa, "worst_margin1": self.worst_margin1,
                "worst_margin2": self.worst_margin2}

    def to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(REPORT_COLUMNS)
            for row in self.rows():
                w.writerow([format(v, ".17g") if isinstance(v, float) else str(int(v))
                            for v in row])
        return path


def _worst(lhs, rhs) -> float:
    with np.errstate(divide="ignore", invalid="ignore"):
        m = np.where(rhs > 0, (rhs - lhs) / rhs, np.where(lhs > 0, -np.inf, 0.0))
    return float(np.min(m)) if m.size else math.nan


def default_bound_grids(field: CoefficientField, n_eps: int = 16, n_t: int = 64) -> tuple:
    tau0 = validity_scale(field)
    eps = np.geomspace(min(1e-4, tau0), tau0, n_eps)
    t = np.geomspace(1e-6 * field.T, field.T, n_t)
    return eps, t


def verify_prop23(field: CoefficientField, kernel: MollifierKernel = MollifierKernel(),
                  eps_grid=None, t_grid=None, directions=None,
                  quad: QuadratureSettings = QuadratureSettings()) -> BoundReport:
    """Check both approximation bounds at every (eps, t) grid point.

    Left sides are ``|a_eps - a~_eps|`` and ``|a_eps'|``; right sides are
    ``C' min(1, mu(eps)/nu(t))`` and ``(C''/eps) min(1, mu(eps)/nu(t))``.
    With several directions the left sides are maximised over them.
    """
    c1, c2, kappa = bound_constants(field, kernel)
    cert = field.certificate
    d_eps, d_t = default_bound_grids(field)
    eps_grid = d_eps if eps_grid is None else np.asarray(eps_grid, dtype=float)
    t_grid = d_t if t_grid is None else np.asarray(t_grid, dtype=float)
    if directions is None:
        directions = [None] if field.n == 1 else list(sphere_samples(field.n))
    E, Tt = np.meshgrid(eps_grid, t_grid, indexing="ij")
    lhs1 = np.zeros(E.shape)
    lhs2 = np.zeros(E.shape)
    for i, eps in enumerate(eps_grid):
        mc = MollifiedCoefficient(field, float(eps), kernel, quad=quad)
        for d in directions:
            val, der = mc.pair(t_grid, d)
            ext = mc.extended(t_grid, d)
            lhs1[i] = np.maximum(lhs1[i], np.abs(val - ext))
            lhs2[i] = np.maximum(lhs2[i], np.abs(der))
    ratio = np.minimum(1.0, np.asarray(cert.modulus(E)) / np.asarray(cert.blowup(Tt)))
    return BoundReport(E, Tt, lhs1, c1 * ratio, lhs2, c2 * ratio / E, c1, c2, kappa)

