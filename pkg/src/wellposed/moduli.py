"""Moduli of continuity, blow-up rates and the psi-families that generate them.

A coefficient is controlled by ``|a(t+tau) - a(t)| <= C mu(tau) / nu(t)``;
``mu`` is a modulus of continuity (continuous, concave, strictly increasing,
``mu(0) = 0``) and ``nu`` is a non-decreasing rate satisfying the doubling
condition ``nu(t/2) >= kappa nu(t)``.

The psi-families produce matched pairs::

    nu(t)  = t / psi'(|log t|)          for t <= 1/e, constant above
    mu(tau) = tau |log tau| / psi(|log tau|)

All specs are frozen dataclasses and serialise to tagged dictionaries such as
``{"family": "holder", "alpha": 0.5}``.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import _jit

INV_E = math.exp(-1.0)

PSI_FAMILIES = {
    "identity": _jit.PSI_IDENTITY,
    "one_minus_exp": _jit.PSI_ONE_MINUS_EXP,
    "one_plus_log": _jit.PSI_ONE_PLUS_LOG,
    "power_beta": _jit.PSI_POWER_BETA,
}

DEFAULT_GRID_SIZE = 512


class DomainError(ValueError):
    """An argument lies outside the domain where a function is defined."""


# ---------------------------------------------------------------------------
# psi


@dataclass(frozen=True)
class PsiSpec:
    """One of the four admissible psi-families on ``[1, +inf)``.

    ``alpha`` parametrises ``1 - exp(-alpha r)`` and ``beta`` parametrises
    ``r**beta``; both must lie in ``(0, 1]``.
    """

    family: str
    alpha: float = 1.0
    beta: float = 1.0

    def __post_init__(self):
        if self.family not in PSI_FAMILIES:
            raise ValueError(f"unknown psi family {self.family!r}")
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("alpha must lie in (0, 1]")
        if not 0.0 < self.beta <= 1.0:
            raise ValueError("beta must lie in (0, 1]")

    @property
    def code(self) -> int:
        return PSI_FAMILIES[self.family]

    @property
    def param(self) -> float:
        if self.family == "one_minus_exp":
            return self.alpha
        if self.family == "power_beta":
            return self.beta
        return 0.0

    def __call__(self, r, order: int = 0):
        r = np.asarray(r, dtype=float)
        out = np.vectorize(lambda x: _jit.psi_eval(self.code, self.param, x, order), otypes=[float])(r)
        return float(out) if out.ndim == 0 else out

    def derivative(self, r, order: int = 1):
        return self(r, order)

    def inverse(self, y):
        return np.vectorize(lambda v: _jit.psi_inverse(self.code, self.param, v), otypes=[float])(y)

    @property
    def chi(self) -> float:
        """Limit of psi at infinity."""
        return 1.0 if self.family == "one_minus_exp" else math.inf

    @property
    def eta(self) -> float:
        """Limit of psi' at infinity."""
        if self.family == "identity":
            return 1.0
        if self.family == "power_beta" and self.beta == 1.0:
            return 1.0
        return 0.0

    def label(self) -> str:
        return {
            "identity": "r",
            "one_minus_exp": f"1 - exp(-{self.alpha:g} r)",
            "one_plus_log": "1 + log r",
            "power_beta": f"r^{self.beta:g}",
        }[self.family]

    def to_dict(self) -> dict:
        out = {"family": self.family}
        if self.family == "one_minus_exp":
            out["alpha"] = self.alpha
        if self.family == "power_beta":
            out["beta"] = self.beta
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "PsiSpec":
        return cls(data["family"], alpha=float(data.get("alpha", 1.0)),
                   beta=float(data.get("beta", 1.0)))


# ---------------------------------------------------------------------------
# moduli of continuity


def _psi_modulus(psi: PsiSpec, tau):
    tau = np.asarray(tau, dtype=float)
    out = np.zeros_like(tau)
    pos = tau > 0
    r = -np.log(tau[pos])
    out[pos] = tau[pos] * r / psi(r)
    return out


@dataclass(frozen=True)
class ModulusSpec:
    """A modulus of continuity on ``[0, tau0]``.

    Use the constructors :meth:`holder`, :meth:`from_psi` and :meth:`custom`
    rather than filling fields by hand.
    """

    family: str
    alpha: float = 1.0
    tau0: float = 1.0
    psi: Optional[PsiSpec] = None
    samples: Optional[tuple] = None

    def __post_init__(self):
        if self.family not in ("holder", "psi", "custom"):
            raise ValueError(f"unknown modulus family {self.family!r}")
        if self.tau0 <= 0:
            raise ValueError("tau0 must be positive")
        if self.family == "holder" and not 0.0 < self.alpha <= 1.0:
            raise ValueError("Holder exponent must lie in (0, 1]")
        if self.family == "psi" and self.psi is None:
            raise ValueError("psi-derived modulus needs a PsiSpec")
        if self.family == "custom":
            if self.samples is None:
                raise ValueError("custom modulus needs samples")
            taus, vals = self.samples
            if len(taus) < 2 or taus[0] != 0.0 or vals[0] != 0.0:
                raise ValueError("custom samples must start at (0, 0)")
            if np.any(np.diff(taus) <= 0):
                raise ValueError("custom sample abscissae must increase")

    @classmethod
    def holder(cls, alpha: float, tau0: float = 1.0) -> "ModulusSpec":
        return cls("holder", alpha=alpha, tau0=tau0)

    @classmethod
    def from_psi(cls, psi: PsiSpec, tau0: Optional[float] = None) -> "ModulusSpec":
        if tau0 is None:
            tau0 = psi_modulus_tau0(psi)
        if tau0 > INV_E:
            raise ValueError("psi-derived moduli live on ]0, 1/e]")
        return cls("psi", tau0=tau0, psi=psi)

    @classmethod
    def custom(cls, taus, values) -> "ModulusSpec":
        taus = tuple(float(x) for x in taus)
        values = tuple(float(x) for x in values)
        return cls("custom", tau0=taus[-1], samples=(taus, values))

    def __call__(self, tau):
        tau = np.asarray(tau, dtype=float)
        if self.family == "holder":
            out = tau ** self.alpha
        elif self.family == "psi":
            out = _psi_modulus(self.psi, tau)
        else:
            out = np.interp(tau, *self.samples)
        return float(out) if np.ndim(out) == 0 else out

    def grid(self, n: int = DEFAULT_GRID_SIZE, lo: float = 1e-12) -> np.ndarray:
        """Log-spaced grid on ]0, tau0] with 0 prepended."""
        return np.concatenate(([0.0], np.geomspace(lo * self.tau0, self.tau0, n - 1)))

    def label(self) -> str:
        if self.family == "holder":
            return "tau" if self.alpha == 1.0 else f"tau^{self.alpha:g}"
        if self.family == "psi":
            return {
                "identity": "tau",
                "one_minus_exp": "tau|log tau|/(1-tau^alpha)",
                "one_plus_log": "tau|log tau|/(1+log|log tau|)",
                "power_beta": f"tau|log tau|^{1 - self.psi.beta:g}",
            }[self.psi.family]
        return "tabulated"

    def to_dict(self) -> dict:
        if self.family == "holder":
            return {"family": "holder", "alpha": self.alpha, "tau0": self.tau0}
        if self.family == "psi":
            return {"family": "psi", "psi": self.psi.to_dict(), "tau0": self.tau0}
        return {"family": "custom", "tau": list(self.samples[0]), "mu": list(self.samples[1])}

    @classmethod
    def from_dict(cls, data: dict) -> "ModulusSpec":
        fam = data["family"]
        if fam == "holder":
            return cls.holder(float(data["alpha"]), float(data.get("tau0", 1.0)))
        if fam == "psi":
            tau0 = data.get("tau0")
            return cls.from_psi(PsiSpec.from_dict(data["psi"]),
                                None if tau0 is None else float(tau0))
        if fam == "custom":
            return cls.custom(data["tau"], data["mu"])
        raise ValueError(f"unknown modulus family {fam!r}")


def eval_modulus(spec: ModulusSpec, tau: float) -> float:
    """mu(tau) for 0 <= tau <= tau0."""
    if tau < 0 or tau > spec.tau0 * (1 + 1e-15):
        raise DomainError(f"tau={tau!r} outside [0, {spec.tau0!r}]")
    if tau == 0:
        return 0.0
    return float(spec(tau))


@dataclass
class ValidationReport:
    passed: bool
    monotone: bool
    concave: bool
    first_violation: Optional[tuple] = None
    message: str = ""


def validate_modulus(spec: ModulusSpec, grid=None, tol: float = 1e-12) -> ValidationReport:
    """Grid check of strict monotonicity and midpoint concavity.

    Concavity is checked on every pair of grid points,
    ``mu((a+b)/2) >= (mu(a)+mu(b))/2 - tol``.
    """
    g = spec.grid() if grid is None else np.asarray(grid, dtype=float)
    if g.ndim != 1 or g.size < 3 or np.any(np.diff(g) <= 0):
        raise ValueError("grid must be sorted, strictly increasing, with >= 3 points")
    mu = np.asarray(spec(g), dtype=float)
    if spec.family == "psi":
        mu[g == 0] = 0.0
    inc = np.diff(mu)
    bad = np.nonzero(inc <= 0)[0]
    if bad.size:
        i = int(bad[0])
        pair = (float(g[i]), float(g[i + 1]))
        return ValidationReport(False, False, False, pair, f"not strictly increasing on {pair}")
    i, j = np.triu_indices(g.size, k=1)
    mid = np.asarray(spec(0.5 * (g[i] + g[j])), dtype=float)
    gap = mid - 0.5 * (mu[i] + mu[j])
    bad = np.nonzero(gap < -tol)[0]
    if bad.size:
        k = int(bad[0])
        pair = (float(g[i[k]]), float(g[j[k]]))
        return ValidationReport(False, True, False, pair, f"midpoint concavity fails on {pair}")
    return ValidationReport(True, True, True, None, "ok")


@functools.lru_cache(maxsize=64)
def psi_modulus_tau0(psi: PsiSpec, n: int = DEFAULT_GRID_SIZE, iters: int = 60) -> float:
    """Largest tau0 <= 1/e on which the psi-derived modulus passes the grid checks."""

    def ok(tau0):
        spec = ModulusSpec("psi", tau0=tau0, psi=psi)
        return validate_modulus(spec, spec.grid(n)).passed

    if ok(INV_E):
        return INV_E
    lo, hi = math.log(1e-12), math.log(INV_E)
    if not ok(math.exp(lo)):
        raise ValueError(f"psi-derived modulus for {psi.family} fails even near 0")
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if ok(math.exp(mid)):
            lo = mid
        else:
            hi = mid
    return math.exp(lo)


# ---------------------------------------------------------------------------
# blow-up rates


def _psi_nu(psi: PsiSpec, t):
    t = np.asarray(t, dtype=float)
    out = np.empty_like(t)
    low = t <= INV_E
    out[low] = t[low] / psi(-np.log(t[low]), 1)
    out[~low] = INV_E / psi(1.0, 1)
    return out


@dataclass(frozen=True)
class BlowupSpec:
    """A blow-up rate ``nu`` on ``]0, T]`` with its doubling constant.

    ``kappa`` is filled in on construction: the analytic value where the
    family has one, raised to the grid estimate when that is larger.
    """

    family: str
    p: float = 1.0
    psi: Optional[PsiSpec] = None
    value: float = 1.0
    fn: Optional[Callable] = field(default=None, compare=False, repr=False)
    kappa: float = field(default=0.0, compare=False)

    def __post_init__(self):
        if self.family not in ("power", "psi", "constant", "custom"):
            raise ValueError(f"unknown blow-up family {self.family!r}")
        if self.family == "power" and self.p <= 0:
            raise ValueError("power blow-up needs p > 0")
        if self.family == "psi" and self.psi is None:
            raise ValueError("psi-derived blow-up needs a PsiSpec")
        if self.family == "constant" and self.value <= 0:
            raise ValueError("constant blow-up must be positive")
        if self.family == "custom" and self.fn is None:
            raise ValueError("custom blow-up needs a callable")
        if self.kappa <= 0:
            est = estimate_doubling(self, default_t_grid())
            floor = self.analytic_kappa
            object.__setattr__(self, "kappa", est if floor is None else max(est, floor))

    @classmethod
    def power(cls, p: float) -> "BlowupSpec":
        return cls("power", p=p)

    @classmethod
    def from_psi(cls, psi: PsiSpec) -> "BlowupSpec":
        return cls("psi", psi=psi)

    @classmethod
    def constant(cls, value: float = 1.0) -> "BlowupSpec":
        return cls("constant", value=value)

    @classmethod
    def custom(cls, fn: Callable) -> "BlowupSpec":
        return cls("custom", fn=fn)

    @property
    def analytic_kappa(self) -> Optional[float]:
        if self.family == "power":
            return 2.0 ** (-self.p)
        if self.family == "psi":
            return 0.5
        if self.family == "constant":
            return 1.0
        return None

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.family == "power":
            out = t ** self.p
        elif self.family == "psi":
            out = _psi_nu(self.psi, np.atleast_1d(t)).reshape(t.shape)
        elif self.family == "constant":
            out = np.full_like(t, self.value)
        else:
            out = np.asarray(np.vectorize(self.fn)(t), dtype=float)
        return float(out) if np.ndim(out) == 0 else out

    def label(self) -> str:
        if self.family == "power":
            return "t" if self.p == 1 else f"t^{self.p:g}"
        if self.family == "psi":
            return {
                "identity": "t",
                "one_minus_exp": f"{self.psi.alpha:g} t^{1 - self.psi.alpha:g}",
                "one_plus_log": "t|log t|",
                "power_beta": f"t|log t|^{1 - self.psi.beta:g}",
            }[self.psi.family]
        if self.family == "constant":
            return f"{self.value:g}"
        return "custom"

    def to_dict(self) -> dict:
        if self.family == "power":
            return {"family": "power", "p": self.p}
        if self.family == "psi":
            return {"family": "psi", "psi": self.psi.to_dict()}
        if self.family == "constant":
            return {"family": "constant", "value": self.value}
        raise ValueError("custom blow-up rates do not serialise")

    @classmethod
    def from_dict(cls, data: dict) -> "BlowupSpec":
        fam = data["family"]
        if fam == "power":
            return cls.power(float(data["p"]))
        if fam == "psi":
            return cls.from_psi(PsiSpec.from_dict(data["psi"]))
        if fam == "constant":
            return cls.constant(float(data.get("value", 1.0)))
        raise ValueError(f"unknown blow-up family {fam!r}")


def default_t_grid(T: float = 1.0, n: int = DEFAULT_GRID_SIZE, lo: float = 1e-12) -> np.ndarray:
    return np.geomspace(lo * T, T, n)


def eval_nu(spec: BlowupSpec, t: float) -> float:
    if t <= 0:
        raise DomainError(f"nu is defined for t > 0, got {t!r}")
    return float(spec(t))


def estimate_doubling(spec: BlowupSpec, t_grid) -> float:
    """min over the grid of nu(t/2)/nu(t)."""
    t = np.asarray(t_grid, dtype=float)
    if t.size == 0 or np.any(t <= 0):
        raise ValueError("t_grid must be non-empty and positive")
    num, den = np.asarray(spec(t / 2), float), np.asarray(spec(t), float)
    # both sides underflowing means the rate vanishes faster than any power
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(den > 0, num / den, 0.0)
    return float(np.min(ratio))


@dataclass
class PsiReport:
    passed: bool
    increasing: bool
    derivative_nonincreasing: bool
    weighted_derivative_nondecreasing: bool
    chi_estimate: float
    eta_estimate: float
    chi: float
    eta: float
    message: str = ""


def validate_psi(spec: PsiSpec, r_grid=None, tol: float = 1e-12) -> PsiReport:
    """Check psi increasing, psi' non-increasing and exp(r) psi'(r) non-decreasing.

    The last condition is checked in log form, ``r + log psi'(r)``, so that
    large r does not overflow. Tail estimates of the limits are read off the
    far end of the grid.
    """
    r = np.geomspace(1.0, 1e16, DEFAULT_GRID_SIZE) if r_grid is None else np.asarray(r_grid, float)
    if r.size < 3 or r[0] < 1 or np.any(np.diff(r) <= 0):
        raise ValueError("r_grid must be sorted, increasing and inside [1, inf)")
    val = spec(r)
    der = spec(r, 1)
    inc = bool(np.all(np.diff(val) > -tol * np.maximum(1.0, np.abs(val[1:])))
               and val[-1] > val[0])
    dec = bool(np.all(np.diff(der) <= tol * np.maximum(1.0, np.abs(der[:-1]))))
    with np.errstate(divide="ignore"):
        lw = r + np.log(der)
    # where psi' underflows the weighted derivative is only known to be finite
    finite = np.isfinite(lw)
    lw_f = lw[finite]
    wnd = bool(np.all(np.diff(lw_f) >= -tol * np.maximum(1.0, np.abs(lw_f[:-1]))))
    half = spec(r[-1] / 2)
    chi_est = float(val[-1]) if abs(val[-1] - half) <= 1e-6 * max(1.0, abs(val[-1])) else math.inf
    eta_est = float(der[-1]) if der[-1] > 1e-6 else 0.0
    ok = inc and dec and wnd
    msg = "ok" if ok else "psi fails: " + ", ".join(
        name for name, good in (("increasing", inc), ("psi' non-increasing", dec),
                                ("e^r psi' non-decreasing", wnd)) if not good)
    return PsiReport(ok, inc, dec, wnd, chi_est, eta_est, spec.chi, spec.eta, msg)
