"""Growth fits against the exponent models, decay profiles and classification.

The bounds being tested are one-sided: the log energy ratio at frequency xi
must stay below ``M * shape(xi)`` for a single constant M. A fit is therefore
judged by whether the last decade of the grid stays under the level that the
earlier decades predict, not by how well a line interpolates the data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from .energy import ExponentModel, SweepRow

DEFAULT_SLACK = 0.25
DEFAULT_FLOOR = 1e-6
MIN_POINTS = 8
MIN_DECADES = 2.0
FIT_COLUMNS = ("xi", "y", "shape", "ratio", "residual")


@dataclass(frozen=True)
class GrowthFit:
    """Regression and sup-ratio summary of a sweep against one model.

    Attributes
    ----------
    slope, intercept
        Least-squares line of ``y`` against ``x`` (``x = |xi|^((p-alpha)/p)``
        or ``1 + log|xi|``); ``slope`` is the regression estimate of M.
    ratios
        ``y / shape(xi)`` per grid point; ``sup_ratio`` is their maximum and
        serves as the empirical M.
    reference_ratio
        Level predicted by the grid without its last decade: the larger of the
        sup-ratio there and the sup over ``|xi| >= xi_min`` of the line fitted
        there divided by the shape.
    verdict
        ``"consistent"`` iff ``y <= (1 + slack) reference_ratio shape + floor``
        at every grid point.
    """

    kind: str
    xi: np.ndarray
    y: np.ndarray
    x: np.ndarray
    slope: float
    intercept: float
    residuals: np.ndarray
    ratios: np.ndarray
    sup_ratio: float
    reference_ratio: float
    slack: float
    floor: float
    verdict: str
    model: ExponentModel

    @property
    def consistent(self) -> bool:
        return self.verdict == "consistent"

    @property
    def M_hat(self) -> float:
        return self.sup_ratio

    @property
    def M_line(self) -> float:
        """Regression slope in model units (coefficient of ``x`` divided out)."""
        return self.slope / _per_x(self.model)

    @property
    def spread(self) -> float:
        """``max / median`` of the per-point ratios."""
        med = float(np.median(self.ratios))
        return float(np.max(self.ratios)) / med if med > 0 else math.inf

    def rows(self) -> list:
        """Per-point ``(xi, y, shape, ratio, residual)`` records."""
        shape = self.model.shape(self.xi)
        return [(float(a), float(b), float(c), float(d), float(e))
                for a, b, c, d, e in zip(self.xi, self.y, shape, self.ratios, self.residuals)]

    def to_dict(self) -> dict:
        return {"kind": self.kind, "slope": self.slope, "intercept": self.intercept,
                "M_line": self.M_line,
                "sup_ratio": self.sup_ratio, "reference_ratio": self.reference_ratio,
                "spread": self.spread, "slack": self.slack, "floor": self.floor,
                "verdict": self.verdict, "points": int(self.xi.size)}


QUANTITIES = ("log_ratio", "gronwall_total")


def _sweep_arrays(results, quantity: str) -> tuple:
    if quantity not in QUANTITIES:
        raise ValueError(f"quantity must be one of {QUANTITIES}")
    if isinstance(results, tuple) and len(results) == 2:
        xi, y = results
        return np.asarray(xi, dtype=float), np.asarray(y, dtype=float)
    rows = list(results)
    if rows and isinstance(rows[0], SweepRow):
        return (np.array([r.xi for r in rows], dtype=float),
                np.array([getattr(r, quantity) for r in rows], dtype=float))
    raise TypeError("expected SweepRow results or an (xi, log_ratio) pair")


def _line(x, y) -> tuple:
    if x.size < 2 or np.ptp(y) == 0:
        return 0.0, float(np.mean(y))
    lin = stats.linregress(x, y)
    return float(lin.slope), float(lin.intercept)


def _per_x(model: ExponentModel) -> float:
    """Coefficient of ``x`` in the model shape: ``1 + 4x`` or ``x``."""
    return 4.0 if model.kind == "gevrey" else 1.0


def fit_growth(results, model: ExponentModel, slack: float = DEFAULT_SLACK,
               floor: float = DEFAULT_FLOOR, quantity: str = "log_ratio") -> GrowthFit:
    """Fit log energy ratios against the model's exponent shape.

    Parameters
    ----------
    results
        Sweep rows, or a pair ``(xi, log_ratio)``.
    model
        Exponent model; only its kind and exponents matter, not its M.
    slack, floor
        Tolerances of the consistency test.
    quantity
        Sweep column to fit: the measured ``log_ratio`` or the
        ``gronwall_total`` budget.

    Raises
    ------
    ValueError
        On fewer than 8 points, grids spanning less than two decades, points
        below the model threshold or non-finite data.
    """
    xi, y = _sweep_arrays(results, quantity)
    order = np.argsort(xi)
    xi, y = xi[order], y[order]
    if xi.size < MIN_POINTS:
        raise ValueError(f"need at least {MIN_POINTS} grid points, got {xi.size}")
    if not np.all(np.isfinite(y)) or not np.all(np.isfinite(xi)):
        raise ValueError("sweep contains non-finite values")
    if math.log10(xi[-1] / xi[0]) < MIN_DECADES - 1e-9:
        raise ValueError(f"grid spans {math.log10(xi[-1] / xi[0]):.2f} decades, "
                         f"need {MIN_DECADES:g}")
    if xi[0] < model.xi_threshold * (1 - 1e-12):
        raise ValueError(f"grid starts below the model threshold {model.xi_threshold:g}")
    if model.kind == "gevrey":
        x = xi ** model.growth_power
    else:
        x = 1.0 + np.log(xi)
    shape = model.shape(xi)
    slope, intercept = _line(x, y)
    residuals = y - (slope * x + intercept)
    ratios = y / shape
    head = xi <= xi[-1] / 10 * (1 + 1e-12)
    h_slope, h_icpt = _line(x[head], y[head])
    reference = max(float(np.max(ratios[head])),
                    (h_slope * x[0] + h_icpt) / shape[0], h_slope / _per_x(model), 0.0)
    ok = bool(np.all(y <= (1 + slack) * reference * shape + floor))
    return GrowthFit(model.kind, xi, y, x, slope, intercept, residuals, ratios,
                     float(np.max(ratios)), reference, slack, floor,
                     "consistent" if ok else "inconsistent", model)


@dataclass(frozen=True)
class DecayProfile:
    """Fitted decay of Fourier magnitudes.

    ``gevrey``: ``log m = log K - delta |xi|^(1/sigma)`` by least squares, with
    ``r_squared`` of the regression. ``polynomial``: ``K_zeta = sup m |xi|^zeta``
    for each requested ``zeta``, kept in log form.
    """

    kind: str
    xi: np.ndarray
    log_magnitude: np.ndarray
    sigma: Optional[float] = None
    K: Optional[float] = None
    log_K: Optional[float] = None
    delta: Optional[float] = None
    r_squared: Optional[float] = None
    zetas: tuple = ()
    log_K_zeta: tuple = ()

    @property
    def K_zeta(self) -> dict:
        return {z: math.exp(lk) if lk < 709 else math.inf for z, lk in zip(self.zetas, self.log_K_zeta)}

    @property
    def passed(self) -> bool:
        if self.kind == "gevrey":
            return self.delta is not None and self.delta > 0 and self.K > 0
        return all(math.isfinite(lk) for lk in self.log_K_zeta)

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "points": int(self.xi.size), "passed": self.passed}
        if self.kind == "gevrey":
            out.update(sigma=self.sigma, log_K=self.log_K, delta=self.delta,
                       r_squared=self.r_squared)
        else:
            out.update(log_K_zeta={format(z, "g"): v for z, v in zip(self.zetas, self.log_K_zeta)})
        return out


def data_log_magnitude(xi, u0=None, u1=None, log_u0=None, log_u1=None) -> np.ndarray:
    """``log sqrt(|u0|^2 + |u1|^2/|xi|^2)``, computed stably from values or logs."""
    xi = np.asarray(xi, dtype=float)
    with np.errstate(divide="ignore"):  # zero data map to -inf
        l0 = np.log(np.abs(u0)) if log_u0 is None else np.asarray(log_u0, dtype=float)
        if u1 is None and log_u1 is None:
            return l0 + 0.0 * xi
        l1 = np.log(np.abs(u1)) if log_u1 is None else np.asarray(log_u1, dtype=float)
    return 0.5 * np.logaddexp(2 * l0, 2 * (l1 - np.log(xi)))


def check_decay(xi, u0=None, u1=None, kind: str = "gevrey", sigma: float = 1.0,
                zetas: Sequence[float] = tuple(range(1, 13)), xi_min: float = 1.0,
                log_magnitude=None) -> DecayProfile:
    """Fit a Gevrey or polynomial decay profile.

    Parameters
    ----------
    xi
        Frequency magnitudes.
    u0, u1
        Fourier data; the fitted magnitude is ``sqrt(|u0|^2 + |u1|^2/|xi|^2)``.
    log_magnitude
        Alternative to ``u0``/``u1`` for data that would underflow.
    xi_min
        Samples below this magnitude are left out of the fit.
    """
    xi = np.asarray(xi, dtype=float)
    lm = (data_log_magnitude(xi, u0, u1) if log_magnitude is None
          else np.asarray(log_magnitude, dtype=float))
    keep = xi >= xi_min
    xi, lm = xi[keep], lm[keep]
    if xi.size == 0:
        raise ValueError("no samples at or above xi_min")
    if np.all(np.isneginf(lm)):
        raise ValueError("all samples are zero")
    if kind == "gevrey":
        if xi.size < 3:
            raise ValueError("Gevrey fit needs at least 3 samples")
        if not np.all(np.isfinite(lm)):
            raise ValueError("zero magnitudes: pass log_magnitude instead")
        s = xi ** (1.0 / sigma)
        lin = stats.linregress(s, lm)
        return DecayProfile("gevrey", xi, lm, sigma, math.exp(min(lin.intercept, 709.0)),
                            float(lin.intercept), float(-lin.slope), float(lin.rvalue ** 2))
    if kind == "polynomial":
        zs = tuple(float(z) for z in zetas)
        lk = tuple(float(np.max(lm + z * np.log(xi))) for z in zs)
        return DecayProfile("polynomial", xi, lm, zetas=zs, log_K_zeta=lk)
    raise ValueError(f"unknown decay profile {kind!r}")


@dataclass(frozen=True)
class Classification:
    """Structured prediction of the well-posedness class."""

    entries: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.entries[key]

    def to_dict(self) -> dict:
        return dict(self.entries)


def classify(fit: GrowthFit, decay: Optional[DecayProfile] = None,
             modulus_label: Optional[str] = None) -> Classification:
    """Translate a consistent fit into the predicted class of preserved data.

    Gevrey models report the threshold ``sigma* = p/(p - alpha)`` and whether
    the data index lies below it. Log models report C-infinity preservation
    with the loss ``theta = zeta - M`` for each polynomial order of the data,
    where M is the larger of the sup-ratio and the regression estimate.
    """
    if not fit.consistent:
        raise ValueError("cannot classify an inconsistent fit")
    m = fit.model
    M_emp = max(fit.sup_ratio, fit.M_line, 0.0)
    out = {"model": m.kind, "M_sup_ratio": fit.sup_ratio, "M_regression": fit.M_line,
           "M_empirical": M_emp, "verdict": fit.verdict}
    if m.kind == "gevrey":
        s_star = m.sigma_star
        out.update(classification=f"Gevrey well-posed for 1 <= sigma < {s_star:.17g}",
                   p=m.p, alpha=m.alpha, sigma_star=s_star,
                   limit_note="as p - alpha -> 0 the threshold sigma* grows without bound: "
                              "C-infinity regime")
        if decay is not None and decay.kind == "gevrey":
            below = decay.sigma < s_star
            out.update(data_sigma=decay.sigma, data_delta=decay.delta,
                       preserved=below,
                       prediction=(f"solution keeps Gevrey decay of index {decay.sigma:g} "
                                   "with some K', delta' > 0") if below
                       else "data index at or above sigma*: no prediction")
    else:
        out.update(classification="C-infinity well-posed")
        if modulus_label is None and m.psi is not None:
            from .moduli import ModulusSpec
            modulus_label = ModulusSpec("psi", tau0=m.tau1, psi=m.psi).label()
        if modulus_label:
            out["modulus"] = modulus_label
        if decay is not None and decay.kind == "polynomial":
            out["theta"] = {format(z, "g"): z - M_emp for z in decay.zetas}
    return Classification(out)
