"""Fourier-mode integration, approximate energy and the Gronwall budget.

For a frequency ``xi`` the mode solves ``u'' + a(t, xi) |xi|^2 u = 0`` with
the original coefficient. The approximate energy built from the mollified
coefficient,

    E_eps(t) = a_eps(t) |xi|^2 |u|^2 + |u'|^2

satisfies ``E_eps' <= g(t) E_eps`` with

    g(t) = |a_eps'| / a_eps + |xi| |a_eps - a| / sqrt(a_eps)

and ``G(t) = int_0^t g`` is the growth budget. The exponent models give the
closed-form shapes of ``G`` at ``eps = 1/|xi|``.
"""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.fft import dct
from scipy.integrate._ivp import dop853_coefficients as _dop

from . import _jit
from .coefficients import CoefficientField, PackedSymbol, start_time
from .moduli import DomainError, PsiSpec
from .mollify import (MollifiedCoefficient, MollifierKernel, QuadratureError, bound_constants,
                      validity_scale)

log = logging.getLogger(__name__)

INV_E = math.exp(-1.0)

_A = np.ascontiguousarray(_dop.A[:_dop.N_STAGES, :_dop.N_STAGES])
_B = np.ascontiguousarray(_dop.B)
_C = np.ascontiguousarray(_dop.C[:_dop.N_STAGES])
_E3 = np.ascontiguousarray(_dop.E3)
_E5 = np.ascontiguousarray(_dop.E5)


class IntegrationError(RuntimeError):
    """The mode solver stopped before reaching the final time."""

    def __init__(self, message: str, t_reached: float):
        super().__init__(f"{message} (reached t={t_reached:.17g})")
        self.t_reached = t_reached


def _norm_xi(xi) -> tuple:
    v = np.atleast_1d(np.asarray(xi, dtype=float))
    mag = float(np.linalg.norm(v))
    if mag == 0.0 or not math.isfinite(mag):
        raise DomainError("xi must be a finite nonzero vector")
    return v, mag


# ---------------------------------------------------------------------------
# states and traces


@dataclass(frozen=True)
class ModeState:
    u: complex
    ut: complex
    t: float
    xi: tuple

    def __post_init__(self):
        if not (np.isfinite(self.u) and np.isfinite(self.ut)):
            raise ValueError("mode state must be finite")
        if float(np.linalg.norm(self.xi)) == 0.0:
            raise DomainError("xi must be nonzero")

    @property
    def xi_norm(self) -> float:
        return float(np.linalg.norm(self.xi))


@dataclass(frozen=True)
class SolverStats:
    steps: int
    rejected: int
    max_error: float
    t_start: float
    rtol: float
    atol: float
    hmax: float


@dataclass
class EnergyTrace:
    """Sampled mode solution with optional energy and Gronwall columns."""

    times: np.ndarray
    u: np.ndarray
    ut: np.ndarray
    xi: tuple
    stats: SolverStats
    eps: Optional[float] = None
    energy: Optional[np.ndarray] = None
    gronwall: Optional[np.ndarray] = None

    @property
    def xi_norm(self) -> float:
        return float(np.linalg.norm(self.xi))

    def state(self, k: int) -> ModeState:
        return ModeState(complex(self.u[k]), complex(self.ut[k]), float(self.times[k]), self.xi)

    def flat_energy(self, a=None) -> np.ndarray:
        """``|u'|^2 + a |xi|^2 |u|^2`` with ``a = 1`` by default."""
        a = 1.0 if a is None else a
        return np.abs(self.ut) ** 2 + a * self.xi_norm ** 2 * np.abs(self.u) ** 2

    def to_csv(self, path) -> Path:
        """Columns: t, re u, im u, re ut, im ut, E_eps, G_cumulative."""
        path = Path(path)
        nan = np.full(self.times.size, np.nan)
        en = nan if self.energy is None else self.energy
        gr = nan if self.gronwall is None else self.gronwall
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(TRACE_COLUMNS)
            for k in range(self.times.size):
                w.writerow([format(float(v), ".17g") for v in
                            (self.times[k], self.u[k].real, self.u[k].imag, self.ut[k].real,
                             self.ut[k].imag, en[k], gr[k])])
        return path


TRACE_COLUMNS = ("t", "re_u", "im_u", "re_ut", "im_ut", "E_eps", "G_cumulative")


def _solve(sym: PackedSymbol, xi_mag: float, lam_max: float, t0: float, y0, times,
           rtol: float, atol: float, hmax: float, max_steps: int):
    out = _jit.dop853_mode(float(t0), np.asarray(y0, dtype=float), np.asarray(times, dtype=float),
                           xi_mag ** 2, *sym.args(), rtol, atol, hmax, _A, _B, _C, _E3, _E5,
                           int(max_steps))
    samples, status, n_steps, n_rej, t_reached, max_err = out
    if status == 1:
        raise IntegrationError("step size underflow", t_reached)
    if status == 2:
        raise IntegrationError(f"step budget of {max_steps} exhausted", t_reached)
    return samples, n_steps, n_rej, max_err


def integrate_mode(field: CoefficientField, xi, initial=(1.0, 0.0), T: Optional[float] = None,
                   rtol: float = 1e-10, atol: float = 1e-12, times=None, n_samples: int = 129,
                   t0: Optional[float] = None, step_factor: float = 0.1,
                   max_steps: int = 200_000_000, eps: Optional[float] = None,
                   kernel: MollifierKernel = MollifierKernel(),
                   gronwall_tol: float = 1e-7) -> EnergyTrace:
    """Solve the mode equation with the unmollified coefficient.

    Parameters
    ----------
    field
        Coefficient field.
    xi
        Frequency vector (or scalar for n = 1); ``|xi| >= 1``.
    initial
        ``(u(t0), u'(t0))``, complex allowed.
    T
        Final time, default ``field.T``.
    rtol, atol
        Local error tolerances of the embedded 8(5,3) pair.
    times
        Output times; defaults to ``n_samples`` equispaced points on ``[t0, T]``.
        Every output time is hit exactly by the stepper.
    t0
        Start time. Defaults to 0 when the coefficient has a limit there and to
        ``field.t_min`` otherwise.
    step_factor
        Steps are capped at ``step_factor / (|xi| sqrt(Lambda0))``.
    eps
        When given, ``E_eps`` and the cumulative Gronwall integral are attached
        to the trace.

    Returns
    -------
    EnergyTrace
    """
    xv, mag = _norm_xi(xi)
    if mag < 1.0:
        raise DomainError("mode integration requires |xi| >= 1")
    T = field.T if T is None else float(T)
    t0 = start_time(field, t0)
    if not t0 < T <= field.T:
        raise DomainError(f"need t0 < T <= field.T, got t0={t0}, T={T}")
    ts = np.linspace(t0, T, n_samples) if times is None else np.asarray(times, dtype=float)
    if ts.size == 0 or ts[0] < t0 or ts[-1] > T or np.any(np.diff(ts) < 0):
        raise ValueError("output times must be sorted inside [t0, T]")
    u0, u1 = complex(initial[0]), complex(initial[1])
    y0 = np.array([u0.real, u0.imag, u1.real, u1.imag])
    hmax = step_factor / (mag * math.sqrt(field.Lambda0))
    sym = field.pack(xv)
    samples, n_steps, n_rej, max_err = _solve(sym, mag, field.Lambda0, t0, y0, ts, rtol, atol,
                                              hmax, max_steps)
    trace = EnergyTrace(ts, samples[:, 0] + 1j * samples[:, 1], samples[:, 2] + 1j * samples[:, 3],
                        tuple(xv), SolverStats(n_steps, n_rej, max_err, t0, rtol, atol, hmax))
    if eps is not None:
        mc = MollifiedCoefficient(field, eps, kernel)
        trace.eps = float(eps)
        trace.energy = energy_on_trace(trace, mc)
        trace.gronwall = gronwall_bound(field, xv, eps, gronwall_tol, kernel, times=ts).cumulative
    return trace


def approximate_energy(state: ModeState, mc: MollifiedCoefficient) -> float:
    """``a_eps(t, xi) |xi|^2 |u|^2 + |u'|^2``."""
    a = mc.value(state.t, state.xi)
    return float(a * state.xi_norm ** 2 * abs(state.u) ** 2 + abs(state.ut) ** 2)


def energy_on_trace(trace: EnergyTrace, mc: MollifiedCoefficient) -> np.ndarray:
    a = mc.value(trace.times, trace.xi)
    return a * trace.xi_norm ** 2 * np.abs(trace.u) ** 2 + np.abs(trace.ut) ** 2


def gronwall_integrand(t, xi, field: CoefficientField, mc: MollifiedCoefficient):
    """``|a_eps'|/a_eps + |xi| |a_eps - a| / sqrt(a_eps)`` evaluated directly."""
    xv, mag = _norm_xi(xi)
    ts = np.asarray(t, dtype=float)
    if np.any(ts <= 0) or np.any(ts > field.T):
        raise DomainError("t must lie in ]0, T]")
    flat = ts.ravel()
    ae = mc.value(flat, xv)
    de = mc.derivative(flat, xv)
    a = field.pack(xv)(flat)
    out = np.abs(de) / ae + mag * np.abs(ae - a) / np.sqrt(ae)
    return float(out[0]) if ts.ndim == 0 else out.reshape(ts.shape)


# ---------------------------------------------------------------------------
# Gronwall integral

CHEB_ORDER = 48
_CHEB_X = np.cos(np.pi * (np.arange(CHEB_ORDER) + 0.5) / CHEB_ORDER)


@dataclass(frozen=True)
class _Proxy:
    """Piecewise Chebyshev interpolants of ``a_eps`` and ``a_eps'`` on shared panels."""

    ends: np.ndarray
    value: np.ndarray
    deriv: np.ndarray

    @property
    def edges(self) -> np.ndarray:
        return np.append(self.ends[:, 0], self.ends[-1, 1])


def _cheb_coefs(vals: np.ndarray) -> np.ndarray:
    c = dct(vals, type=2, axis=1) / vals.shape[1]
    c[:, 0] *= 0.5
    return c


def _tails(cv, cd):
    return np.max(np.abs(cv[:, -3:]), axis=1), np.max(np.abs(cd[:, -3:]), axis=1)


def _build_proxy(mc: MollifiedCoefficient, xi, breaks: np.ndarray, tol_val: float,
                 tol_der: float, seed: Optional[_Proxy] = None,
                 max_panels: int = 400_000) -> _Proxy:
    """Bisect panels until the last three coefficients of both series fall below tolerance.

    A ``seed`` proxy built on the same breakpoints is refined instead of
    starting again from the breakpoints.
    """
    lo_end, hi_end = breaks[0], breaks[-1]
    min_width = 1e-13 * (hi_end - lo_end)
    done_e, done_v, done_d = [], [], []
    if seed is None:
        pending = np.stack([breaks[:-1], breaks[1:]], axis=1)
    else:
        tv, td = _tails(seed.value, seed.deriv)
        ok = ((tv <= tol_val) & (td <= tol_der)) | (seed.ends[:, 1] - seed.ends[:, 0] < 2 * min_width)
        done_e.append(seed.ends[ok])
        done_v.append(seed.value[ok])
        done_d.append(seed.deriv[ok])
        bad = seed.ends[~ok]
        m = 0.5 * (bad[:, 0] + bad[:, 1])
        pending = np.concatenate([np.stack([bad[:, 0], m], 1), np.stack([m, bad[:, 1]], 1)])
    while pending.size:
        mid = 0.5 * (pending[:, 0] + pending[:, 1])
        half = 0.5 * (pending[:, 1] - pending[:, 0])
        nodes = np.clip(mid[:, None] + half[:, None] * _CHEB_X[None, :], lo_end, hi_end)
        v, d = mc.pair(nodes.ravel(), xi)
        cv = _cheb_coefs(v.reshape(nodes.shape))
        cd = _cheb_coefs(d.reshape(nodes.shape))
        tv, td = _tails(cv, cd)
        ok = ((tv <= tol_val) & (td <= tol_der)) | (half < min_width)
        done_e.append(pending[ok])
        done_v.append(cv[ok])
        done_d.append(cd[ok])
        bad = pending[~ok]
        m = 0.5 * (bad[:, 0] + bad[:, 1])
        pending = np.concatenate([np.stack([bad[:, 0], m], 1), np.stack([m, bad[:, 1]], 1)])
        if sum(len(e) for e in done_e) + len(pending) > max_panels:
            raise QuadratureError("Chebyshev proxy needs too many panels", tol_val)
    ends = np.concatenate(done_e)
    order = np.argsort(ends[:, 0])
    return _Proxy(np.ascontiguousarray(ends[order]),
                  np.ascontiguousarray(np.concatenate(done_v)[order]),
                  np.ascontiguousarray(np.concatenate(done_d)[order]))


def _subdivide(edges: np.ndarray, k: int) -> np.ndarray:
    frac = np.arange(k) / k
    inner = edges[:-1, None] + (edges[1:] - edges[:-1])[:, None] * frac[None, :]
    return np.append(inner.ravel(), edges[-1])


def _phase_points(prm, lo: float, hi: float, step: float, offset: float = 0.0) -> np.ndarray:
    """Times in ``[lo, hi]`` where the phase equals ``offset`` modulo ``step``."""
    u1, u2 = _jit.phase_eval(prm, lo, 0), _jit.phase_eval(prm, hi, 0)
    k0 = math.ceil((min(u1, u2) - offset) / step)
    k1 = math.floor((max(u1, u2) - offset) / step)
    if k1 < k0:
        return np.empty(0)
    return _jit.phase_inverse_many(prm, offset + np.arange(k0, k1 + 1) * step)


def _fast_time(prm, amp: float, xi: float, lam0: float, budget: float, T: float,
               span_cap: float) -> float:
    """Largest t with ``xi |A| period(t) / sqrt(lam0) <= budget``, limited by ``span_cap``."""

    def excess(t):
        period = 2 * math.pi / abs(_jit.phase_eval(prm, t, 1))
        return xi * abs(amp) * period / math.sqrt(lam0) - budget

    t_low = 1e-14 * T
    if excess(T) <= 0:
        t_f = T
    elif excess(t_low) > 0:
        t_f = t_low
    else:
        llo, lhi = math.log(t_low), math.log(T)
        for _ in range(100):
            mid = 0.5 * (llo + lhi)
            if excess(math.exp(mid)) <= 0:
                llo = mid
            else:
                lhi = mid
        t_f = math.exp(llo)
    u_T = _jit.phase_eval(prm, T, 0)
    u_f = _jit.phase_eval(prm, t_f, 0)
    if abs(u_f - u_T) > span_cap:
        t_f = max(t_f, _jit.phase_inverse(prm, u_T + math.copysign(span_cap, u_f - u_T)))
    return t_f


@dataclass(frozen=True)
class GronwallResult:
    """Value of the Gronwall integral with its breakdown.

    ``derivative_part`` is the ``|a_eps'|/a_eps`` contribution, ``mismatch_part``
    the ``|xi||a_eps - a|/sqrt(a_eps)`` contribution, of which
    ``averaged_part`` comes from ``[0, t_fast]`` where the oscillation is
    replaced by its period average. ``error_estimate`` is the error budget
    spent (averaging cut-off plus proxy tolerances). ``cumulative`` holds
    ``G`` at ``times``.
    """

    total: float
    derivative_part: float
    mismatch_part: float
    averaged_part: float
    t_fast: float
    error_estimate: float
    panels: int
    eps: float
    xi: float
    times: np.ndarray
    cumulative: np.ndarray

    def __float__(self) -> float:
        return self.total


def proof_breakpoints(field: CoefficientField, eps: float) -> list:
    """``eps``, ``2 eps``, ``eps^(alpha/p)`` and ``1/e`` where they fall inside ``]0, T[``.

    ``eps^(alpha/p)`` is only added for Holder/power certificates.
    """
    pts = [eps, 2 * eps, INV_E]
    cert = field.certificate
    if cert is not None and cert.modulus.family == "holder" and cert.blowup.family == "power":
        pts.append(eps ** (cert.modulus.alpha / cert.blowup.p))
    return sorted(p for p in set(pts) if 0 < p < field.T)


def abs_sine_mean(d) -> np.ndarray:
    """Mean of ``|d - sin u|`` over a period."""
    d = np.asarray(d, dtype=float)
    c = np.clip(d, -1.0, 1.0)
    inner = (2.0 / np.pi) * (np.sqrt(1.0 - c * c) + c * np.arcsin(c))
    return np.where(np.abs(d) >= 1.0, np.abs(d), inner)


def _averaged(pts, mag, proxy: _Proxy, base: PackedSymbol, amp):
    # below t_fast the term A sin(phase) is replaced by its period average
    gx, gw = _jit.GL_NODES, _jit.GL_WEIGHTS
    lefts, rights = pts[:-1], pts[1:]
    h = 0.5 * (rights - lefts)
    nodes = ((lefts + rights) * 0.5)[:, None] + h[:, None] * gx[None, :]
    flat = nodes.ravel()
    p = _jit.cheb_eval(proxy.edges, proxy.value, flat, 0)
    mean = abs(amp) * abs_sine_mean((p - base(flat)) / amp)
    vals = (mean * mag / np.sqrt(p)).reshape(nodes.shape)
    return rights, (vals * gw[None, :]).sum(axis=1) * h


def _gronwall_pass(field: CoefficientField, mc: MollifiedCoefficient, xv, mag: float,
                   tol: float, scale: float, times: np.ndarray,
                   seed: Optional[_Proxy] = None) -> tuple:
    T = field.T
    sym = field.pack(xv)
    lam0 = field.lambda0
    breaks = np.unique(np.concatenate(([0.0, T], proof_breakpoints(field, mc.eps), times)))
    # a quarter of the budget for each proxy, a quarter for the averaging cut-off
    tol_val = tol * scale * math.sqrt(lam0) / (4 * mag * T)
    tol_der = tol * scale * lam0 / (4 * T)
    proxy = _build_proxy(mc, xv, breaks, tol_val, tol_der, seed)
    pe = proxy.edges
    gx, gw = _jit.GL_NODES, _jit.GL_WEIGHTS
    groups = sym.oscillatory_groups()
    if len(groups) > 1:
        raise ValueError("Gronwall quadrature supports one oscillating phase per direction")

    def integrate(mode, pts):
        pts = np.unique(pts)
        parts = _jit.abs_integrals(mode, pts[:-1], pts[1:], mag, pe, proxy.value, proxy.deriv,
                                   *sym.args(), gx, gw)
        return pts[1:], parts

    pieces = [integrate(1, np.union1d(_subdivide(pe, 16), times))]
    t_fast, err_avg = 0.0, 0.0
    averaged = (np.empty(0), np.empty(0))
    if groups:
        prm, amp = np.ascontiguousarray(groups[0][0]), groups[0][1]
        t_fast = _fast_time(prm, amp, mag, lam0, 0.25 * tol * scale, T, 5e6)
        period = 2 * math.pi / abs(_jit.phase_eval(prm, t_fast, 1))
        err_avg = mag * abs(amp) * period / math.sqrt(lam0)
        # sin is monotone between consecutive extrema, so each piece has one sign change at most
        extrema = _phase_points(prm, t_fast, T, math.pi, 0.5 * math.pi)
        # dyadic points: a slow phase can leave pieces spanning many decades of t
        lo = max(t_fast, 1e-14 * T)
        dyadic = np.geomspace(lo, T, max(2, math.ceil(math.log2(T / lo)) + 1))
        fine = np.concatenate((extrema, dyadic, pe[pe >= t_fast], times[times >= t_fast],
                               [t_fast, T]))
        pieces.append(integrate(2, fine))
        if t_fast > 0:
            low = _subdivide(pe, 4)
            low = np.unique(np.concatenate((low[low < t_fast], [0.0, t_fast],
                                            times[times <= t_fast])))
            averaged = _averaged(low, mag, proxy, sym.without_oscillation(), amp)
    else:
        pieces.append(integrate(2, np.union1d(_subdivide(pe, 8), times)))

    g1, g2 = float(pieces[0][1].sum()), float(pieces[1][1].sum())
    g3 = float(averaged[1].sum())
    cum = np.zeros(times.size)
    for rights, parts in pieces + [averaged]:
        if parts.size:
            c = np.concatenate(([0.0], np.cumsum(parts)))
            cum += c[np.searchsorted(rights, times, side="right")]
    err = err_avg + 0.5 * tol * scale
    res = GronwallResult(g1 + g2 + g3, g1, g2 + g3, g3, t_fast, err, int(pe.size - 1), mc.eps,
                         mag, times, cum)
    return res, proxy


def gronwall_bound(field: CoefficientField, xi, eps: float, tol: float = 1e-6,
                   kernel: MollifierKernel = MollifierKernel(), times=None) -> GronwallResult:
    """``int_0^T g(t) dt`` at mollification scale ``eps``.

    The integral is split at ``eps``, ``2 eps``, ``eps^(alpha/p)`` (when the
    certificate is Holder/power) and ``1/e``. ``a_eps`` and ``a_eps'`` are
    replaced by piecewise Chebyshev interpolants accurate to a share of
    ``tol * G``; a first pass at 1% accuracy supplies the scale of ``G`` and seeds the
    interpolants of the second. The mismatch term is integrated between
    consecutive extrema of the oscillation down to the time where its period
    is negligible, and by its exact period average below that.

    Parameters
    ----------
    tol
        Target relative accuracy of the total.
    times
        Times at which the cumulative integral is reported.
    """
    xv, mag = _norm_xi(xi)
    if not 0 < eps <= validity_scale(field) * (1 + 1e-12):
        raise DomainError(f"eps={eps!r} outside ]0, tau0]")
    if tol <= 0:
        raise ValueError("tol must be positive")
    times = np.asarray([field.T] if times is None else times, dtype=float)
    if np.any(times < 0) or np.any(times > field.T):
        raise DomainError("times must lie in [0, T]")
    mc = MollifiedCoefficient(field, eps, kernel)
    coarse, proxy = _gronwall_pass(field, mc, xv, mag, max(tol, 1e-2), 1.0, times)
    if tol >= 1e-2:
        return coarse
    res, _ = _gronwall_pass(field, mc, xv, mag, tol, max(coarse.total, 0.1), times, proxy)
    if res.error_estimate > tol * max(res.total, 0.1):
        log.warning("Gronwall integral error budget %.3g exceeds tolerance at xi=%g",
                    res.error_estimate, mag)
    return res


# ---------------------------------------------------------------------------
# exponent models


@dataclass(frozen=True)
class ExponentModel:
    """Shape of the Gronwall budget at ``eps = 1/|xi|``.

    ``gevrey``: ``M + 4 M |xi|^((p - alpha)/p)`` for ``|xi| >= 1``.
    ``log_psi``: ``M (1 + log |xi|)`` for ``|xi| >= 1/tau1``; ``M = M1 + M2``
    where ``M1`` collects the mismatch terms and ``M2`` the derivative terms.
    """

    kind: str
    M: float = 1.0
    p: float = 2.0
    alpha: float = 1.0
    psi: Optional[PsiSpec] = None
    tau1: float = INV_E
    M1: Optional[float] = None
    M2: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("gevrey", "log_psi"):
            raise ValueError(f"unknown exponent model {self.kind!r}")
        if self.M < 0:
            raise ValueError("M must be non-negative")
        if self.kind == "gevrey" and not self.p > self.alpha > 0:
            raise ValueError("Gevrey model needs p > alpha > 0")

    @property
    def growth_power(self) -> float:
        return (self.p - self.alpha) / self.p

    @property
    def sigma_star(self) -> float:
        if self.kind != "gevrey":
            return math.inf
        return self.p / (self.p - self.alpha)

    @property
    def xi_threshold(self) -> float:
        return 1.0 if self.kind == "gevrey" else 1.0 / self.tau1

    def shape(self, xi) -> np.ndarray:
        """Exponent divided by M."""
        x = np.asarray(xi, dtype=float)
        if np.any(x < self.xi_threshold * (1 - 1e-12)):
            raise DomainError(f"|xi| below the model threshold {self.xi_threshold:g}")
        if self.kind == "gevrey":
            return 1.0 + 4.0 * x ** self.growth_power
        return 1.0 + np.log(x)

    def with_M(self, M: float) -> "ExponentModel":
        return ExponentModel(self.kind, M, self.p, self.alpha, self.psi, self.tau1)

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "M": self.M}
        if self.kind == "gevrey":
            out.update(p=self.p, alpha=self.alpha, sigma_star=self.sigma_star)
        else:
            out.update(tau1=self.tau1, psi=None if self.psi is None else self.psi.to_dict())
        return out


def theoretical_exponent(model: ExponentModel, xi) -> float:
    """``M + 4M|xi|^((p-alpha)/p)`` or ``M(1 + log|xi|)``."""
    val = model.M * model.shape(xi)
    return float(val) if np.ndim(val) == 0 else val


def energy_ratio_bound(model: ExponentModel, lambda0: float, Lambda0: float, xi) -> tuple:
    """Admissible growth factor of the flat energy, returned as ``(value, log value)``.

    ``value`` is ``inf`` when the factor overflows a double.
    """
    x = float(xi)
    if x < model.xi_threshold * (1 - 1e-12):
        raise DomainError(f"|xi| below the model threshold {model.xi_threshold:g}")
    base = model.M + math.log(Lambda0 / lambda0)
    if model.kind == "gevrey":
        logv = base + 4.0 * model.M * x ** model.growth_power
    else:
        logv = base + model.M * math.log(x)
    return (math.exp(logv) if logv < 709.0 else math.inf), logv


def tau1(field: CoefficientField) -> float:
    return min(validity_scale(field), field.T, INV_E)


def analytic_model(field: CoefficientField, kernel: MollifierKernel = MollifierKernel()
                   ) -> ExponentModel:
    """Exponent model with M assembled from the bound constants.

    For a Holder/power certificate (``p > 1``):
    ``M = max(2 Lambda0/sqrt(lam0), K C''/lam0, K C'/sqrt(lam0))`` with
    ``K = max(1, 1/(p-1))``. For psi certificates ``M = M1 + M2`` where the
    constant tail of ``nu`` beyond ``1/e`` enters through the factor
    ``1 + (T - 1/e)^+ e psi'(1) / psi(|log tau1|)``.
    """
    cert = field.certificate
    if cert is None:
        raise ValueError("field carries no regularity certificate")
    c1, c2, _ = bound_constants(field, kernel)
    lam0, Lam0 = field.lambda0, field.Lambda0
    if cert.modulus.family == "holder" and cert.blowup.family == "power":
        p, alpha = cert.blowup.p, cert.modulus.alpha
        K = max(1.0, 1.0 / (p - 1.0)) if p > 1 else math.inf
        M = max(2 * Lam0 / math.sqrt(lam0), K * c2 / lam0, K * c1 / math.sqrt(lam0))
        return ExponentModel("gevrey", M, p, alpha, tau1=tau1(field))
    if cert.blowup.family == "psi":
        psi = cert.blowup.psi
        t1 = tau1(field)
        tail = 1.0 + max(field.T - INV_E, 0.0) * math.e * psi(1.0, 1) / psi(-math.log(t1))
        M2 = c2 / lam0 * tail
        M1 = 2 * Lam0 / math.sqrt(lam0) + c1 / math.sqrt(lam0) * tail
        return ExponentModel("log_psi", M1 + M2, psi=psi, tau1=t1, M1=M1, M2=M2)
    raise ValueError("no exponent model for this certificate")


def coupling_eps(field: CoefficientField, xi_mag: float) -> float:
    """``eps = min(1/|xi|, tau1)``."""
    return min(1.0 / xi_mag, tau1(field))


# ---------------------------------------------------------------------------
# frequency sweeps


SWEEP_COLUMNS = ("xi", "eps", "E0", "ET", "log_ratio", "gronwall_total", "exponent_model_value")


@dataclass(frozen=True)
class SweepRow:
    xi: float
    eps: float
    E0: float
    ET: float
    log_ratio: float
    gronwall_total: float
    exponent_model_value: float
    log_state_T: float = math.nan
    solver_steps: int = 0
    error: str = ""

    def values(self) -> tuple:
        return tuple(getattr(self, c) for c in SWEEP_COLUMNS)


@dataclass(frozen=True)
class SweepSettings:
    rtol: float = 1e-10
    atol: float = 1e-12
    gronwall_tol: float = 1e-6
    kernel: str = "bump"
    solve: bool = True


def _sweep_one(field: CoefficientField, xi_mag: float, model: Optional[ExponentModel],
               settings: SweepSettings) -> SweepRow:
    eps = coupling_eps(field, xi_mag)
    kernel = MollifierKernel(settings.kernel)
    xv = np.zeros(field.n)
    xv[0] = xi_mag
    try:
        G = gronwall_bound(field, xv, eps, settings.gronwall_tol, kernel).total
        E0 = ET = log_state = math.nan
        steps = 0
        if settings.solve:
            tr = integrate_mode(field, xv, (1.0, 0.0), rtol=settings.rtol, atol=settings.atol,
                                n_samples=2)
            mc = MollifiedCoefficient(field, eps, kernel)
            E = energy_on_trace(tr, mc)
            E0, ET, steps = float(E[0]), float(E[-1]), tr.stats.steps
            log_state = 0.5 * math.log(abs(tr.u[-1]) ** 2 + abs(tr.ut[-1] / xi_mag) ** 2)
        model_val = math.nan
        if model is not None and xi_mag >= model.xi_threshold:
            model_val = theoretical_exponent(model, xi_mag)
        return SweepRow(xi_mag, eps, E0, ET, math.log(ET / E0) if settings.solve else math.nan,
                        G, model_val, log_state, steps)
    except (IntegrationError, QuadratureError, ValueError) as exc:
        log.error("sweep row xi=%g failed: %s", xi_mag, exc)
        nan = math.nan
        return SweepRow(xi_mag, eps, nan, nan, nan, nan, nan, nan, 0,
                        f"{type(exc).__name__}: {exc}")


def _sweep_chunk(args):
    field, xis, model, settings = args
    return [_sweep_one(field, float(x), model, settings) for x in xis]


def run_sweep(field: CoefficientField, xi_grid: Sequence[float],
              model: Optional[ExponentModel] = None, settings: SweepSettings = SweepSettings(),
              workers: int = 1) -> list:
    """Energy ratio and Gronwall budget for each |xi|, in grid order.

    The grid is split into ``workers`` contiguous chunks; results are merged in
    grid order, so output does not depend on scheduling.
    """
    xis = np.asarray(xi_grid, dtype=float)
    if workers <= 1 or xis.size < 2:
        return _sweep_chunk((field, xis, model, settings))
    chunks = [c for c in np.array_split(xis, min(workers, xis.size)) if c.size]
    with ProcessPoolExecutor(max_workers=len(chunks)) as pool:
        parts = list(pool.map(_sweep_chunk, [(field, c, model, settings) for c in chunks]))
    return [row for part in parts for row in part]


def sweep_to_csv(rows: Sequence[SweepRow], path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        for r in rows:
            w.writerow([format(float(v), ".17g") for v in r.values()])
    return path
