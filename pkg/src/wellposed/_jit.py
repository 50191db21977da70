"""Compiled numerical kernels.

Everything in here is scalar-loop code compiled with numba. The public
modules wrap these functions; nothing in this file validates its inputs.

Coefficient entries are encoded as ``(kind, prm)`` pairs so that a whole
directional symbol can be passed to the solver as flat arrays:

* ``K_CONST``  prm = [c]
* ``K_AFFINE`` prm = [c0, c1]                      a(t) = c0 + c1 t
* ``K_OSC``    prm = [b, A, phase, p1, p2, T]      a(t) = b + A sin(phase(t))
* ``K_TAB``    prm = [offset, n]                   cubic spline in the shared tables

Phase kinds for ``K_OSC``: ``PH_POWER`` uses t**(-p1); ``PH_PSI`` uses the
integrated blow-up rate of the psi-family ``int(p1)`` with parameter p2,
normalised to vanish at t = T.
"""

import math

import numpy as np
from numba import njit

K_CONST = 0
K_AFFINE = 1
K_OSC = 2
K_TAB = 3

PH_POWER = 0
PH_PSI = 1

PSI_IDENTITY = 0
PSI_ONE_MINUS_EXP = 1
PSI_ONE_PLUS_LOG = 2
PSI_POWER_BETA = 3

KER_BUMP = 0
KER_POLY = 1

INV_E = math.exp(-1.0)

# int_{-1}^{1} exp(-1/(1-x^2)) dx
BUMP_MASS = 0.4439938161680793
# int_{-1}^{1} (1-x^2)^4 dx = 256/315
POLY_MASS = 256.0 / 315.0

GL_NODES, GL_WEIGHTS = np.polynomial.legendre.leggauss(16)


# ---------------------------------------------------------------------------
# psi family and its derived phase


@njit(cache=True)
def psi_eval(kind, par, r, order):
    """Derivative ``order`` (0..3) of psi at r >= 1."""
    if kind == PSI_IDENTITY:
        if order == 0:
            return r
        if order == 1:
            return 1.0
        return 0.0
    if kind == PSI_ONE_MINUS_EXP:
        e = math.exp(-par * r)
        if order == 0:
            return 1.0 - e
        return -((-par) ** order) * e
    if kind == PSI_ONE_PLUS_LOG:
        if order == 0:
            return 1.0 + math.log(r)
        if order == 1:
            return 1.0 / r
        if order == 2:
            return -1.0 / (r * r)
        return 2.0 / (r * r * r)
    # PSI_POWER_BETA
    c = 1.0
    for k in range(order):
        c *= par - k
    return c * r ** (par - order)


@njit(cache=True)
def psi_inverse(kind, par, y):
    if kind == PSI_IDENTITY:
        return y
    if kind == PSI_ONE_MINUS_EXP:
        if y >= 1.0:
            return 745.0 / par
        return -math.log(1.0 - y) / par
    if kind == PSI_ONE_PLUS_LOG:
        return math.exp(y - 1.0)
    return y ** (1.0 / par)


@njit(cache=True)
def _psi_F(kind, par, s, order):
    # F(s) = psi(|log s|) below 1/e, continued linearly with slope -1/nu(1/e) above.
    if s <= INV_E:
        r = -math.log(s)
        if order == 0:
            return psi_eval(kind, par, r, 0)
        p1 = psi_eval(kind, par, r, 1)
        if order == 1:
            return -p1 / s
        p2 = psi_eval(kind, par, r, 2)
        if order == 2:
            return (p2 + p1) / (s * s)
        p3 = psi_eval(kind, par, r, 3)
        return -(p3 + 3.0 * p2 + 2.0 * p1) / (s * s * s)
    slope = psi_eval(kind, par, 1.0, 1) / INV_E
    if order == 0:
        return psi_eval(kind, par, 1.0, 0) - (s - INV_E) * slope
    if order == 1:
        return -slope
    return 0.0


@njit(cache=True)
def phase_eval(prm, s, order):
    s = max(s, 1e-300)
    if prm[2] == PH_POWER:
        q = prm[3]
        if order == 0:
            return s ** (-q)
        c = 1.0
        for k in range(order):
            c *= -(q + k)
        return c * s ** (-q - order)
    kind = int(prm[3])
    val = _psi_F(kind, prm[4], s, order)
    if order == 0:
        val -= _psi_F(kind, prm[4], prm[5], 0)
    return val


@njit(cache=True)
def phase_inverse(prm, u):
    if prm[2] == PH_POWER:
        return u ** (-1.0 / prm[3])
    kind = int(prm[3])
    par = prm[4]
    y = u + _psi_F(kind, par, prm[5], 0)
    y1 = psi_eval(kind, par, 1.0, 0)
    if y >= y1:
        return math.exp(-psi_inverse(kind, par, y))
    slope = psi_eval(kind, par, 1.0, 1) / INV_E
    return INV_E + (y1 - y) / slope


@njit(cache=True)
def phase_inverse_many(prm, us):
    out = np.empty(us.shape[0])
    for i in range(us.shape[0]):
        out[i] = phase_inverse(prm, us[i])
    return out


@njit(cache=True)
def phase_break(prm):
    """Point where the phase loses smoothness (0 when there is none)."""
    if prm[2] == PH_PSI:
        return INV_E
    return 0.0


# ---------------------------------------------------------------------------
# coefficient entries


@njit(cache=True)
def _tab_index(xs, off, n, s):
    lo = off
    hi = off + n - 1
    if s <= xs[lo]:
        return lo
    if s >= xs[hi]:
        return hi - 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if xs[mid] <= s:
            lo = mid
        else:
            hi = mid
    return lo


@njit(cache=True)
def entry_eval(kind, prm, tab_x, tab_c, s, order):
    """Value (order 0) or t-derivative (order 1) of one entry."""
    if kind == K_CONST:
        return prm[0] if order == 0 else 0.0
    if kind == K_AFFINE:
        return prm[0] + prm[1] * s if order == 0 else prm[1]
    if kind == K_OSC:
        ph = phase_eval(prm, s, 0)
        if order == 0:
            return prm[0] + prm[1] * math.sin(ph)
        return prm[1] * math.cos(ph) * phase_eval(prm, s, 1)
    off = int(prm[0])
    n = int(prm[1])
    i = _tab_index(tab_x, off, n, s)
    h = s - tab_x[i]
    c0 = tab_c[0, i]
    c1 = tab_c[1, i]
    c2 = tab_c[2, i]
    c3 = tab_c[3, i]
    if order == 0:
        return ((c0 * h + c1) * h + c2) * h + c3
    return (3.0 * c0 * h + 2.0 * c1) * h + c2


@njit(cache=True)
def entry_eval_many(kind, prm, tab_x, tab_c, ts, order):
    out = np.empty(ts.shape[0])
    for i in range(ts.shape[0]):
        out[i] = entry_eval(kind, prm, tab_x, tab_c, ts[i], order)
    return out


@njit(cache=True)
def symbol_eval(kinds, prms, weights, tab_x, tab_c, s, order):
    acc = 0.0
    for k in range(kinds.shape[0]):
        if weights[k] != 0.0:
            acc += weights[k] * entry_eval(kinds[k], prms[k], tab_x, tab_c, s, order)
    return acc


@njit(cache=True)
def symbol_eval_many(kinds, prms, weights, tab_x, tab_c, ts, order):
    out = np.empty(ts.shape[0])
    for i in range(ts.shape[0]):
        out[i] = symbol_eval(kinds, prms, weights, tab_x, tab_c, ts[i], order)
    return out


# ---------------------------------------------------------------------------
# mollifier kernels


@njit(cache=True)
def kernel_eval(kcode, x, order):
    """Derivative ``order`` (0..3) of the unit-mass kernel at x."""
    if x <= -1.0 or x >= 1.0:
        return 0.0
    w = 1.0 - x * x
    if kcode == KER_BUMP:
        base = math.exp(-1.0 / w) / BUMP_MASS
        if order == 0:
            return base
        if order == 1:
            return base * (-2.0 * x) / (w * w)
        x2 = x * x
        if order == 2:
            return base * 2.0 * (3.0 * x2 * x2 - 1.0) / (w ** 4)
        return base * (-4.0 * x) * (((6.0 * x2 + 3.0) * x2 - 10.0) * x2 + 3.0) / (w ** 6)
    # (1-x^2)^4 / mass
    c = 1.0 / POLY_MASS
    if order == 0:
        return c * w ** 4
    if order == 1:
        return c * (-8.0 * x) * w ** 3
    if order == 2:
        return c * (-8.0 * w ** 3 + 48.0 * x * x * w * w)
    return c * (144.0 * x * w * w - 192.0 * x ** 3 * w)


@njit(cache=True)
def kernel_integral(kcode, lo, hi, order, gx, gw):
    """int_lo^hi of kernel derivative ``order``, with [lo, hi] inside [-1, 1]."""
    if hi <= lo:
        return 0.0
    if order >= 1:
        return kernel_eval(kcode, hi, order - 1) - kernel_eval(kcode, lo, order - 1)
    npan = max(2, int(math.ceil((hi - lo) * 12.0)))
    h = (hi - lo) / npan
    acc = 0.0
    for p in range(npan):
        a = lo + p * h
        for j in range(gx.shape[0]):
            acc += gw[j] * kernel_eval(kcode, a + 0.5 * h * (gx[j] + 1.0), 0)
    return acc * 0.5 * h


# ---------------------------------------------------------------------------
# mollification


@njit(cache=True)
def kernel_pair(kcode, x):
    """Kernel and its first derivative at x."""
    if x <= -1.0 or x >= 1.0:
        return 0.0, 0.0
    w = 1.0 - x * x
    if kcode == KER_BUMP:
        base = math.exp(-1.0 / w) / BUMP_MASS
        return base, base * (-2.0 * x) / (w * w)
    c = 1.0 / POLY_MASS
    w3 = w * w * w
    return c * w3 * w, c * (-8.0 * x) * w3


@njit(cache=True)
def _panel_sum(t, eps, kcode, kind, prm, tab_x, tab_c, a, b, gx, gw, osc_only):
    # (1/eps) int_a^b K((t-s)/eps) f(s) ds over one panel for K = rho and K = rho'.
    h = b - a
    acc0 = 0.0
    acc1 = 0.0
    for j in range(gx.shape[0]):
        s = a + 0.5 * h * (gx[j] + 1.0)
        if osc_only:
            f = math.sin(phase_eval(prm, s, 0))
        else:
            f = entry_eval(kind, prm, tab_x, tab_c, s, 0)
        k0, k1 = kernel_pair(kcode, (t - s) / eps)
        acc0 += gw[j] * k0 * f
        acc1 += gw[j] * k1 * f
    c = 0.5 * h / eps
    return acc0 * c, acc1 * c


@njit(cache=True)
def _asym_bracket(t, eps, order, kcode, prm, s):
    # Endpoint term of the three-term integration-by-parts expansion of
    # int g(s) sin(phase(s)) ds with g(s) = K((t-s)/eps)/eps.
    x = (t - s) / eps
    g0 = kernel_eval(kcode, x, order) / eps
    g1 = -kernel_eval(kcode, x, order + 1) / (eps * eps)
    g2 = kernel_eval(kcode, x, order + 2) / (eps * eps * eps)
    p1 = phase_eval(prm, s, 1)
    p2 = phase_eval(prm, s, 2)
    p3 = phase_eval(prm, s, 3)
    lg = g1 / p1 - g0 * p2 / (p1 * p1)
    llg = (g2 / (p1 * p1) - 3.0 * g1 * p2 / p1 ** 3 - g0 * p3 / p1 ** 3
           + 3.0 * g0 * p2 * p2 / p1 ** 4)
    ph = phase_eval(prm, s, 0)
    return (math.sin(ph) * lg + math.cos(ph) * (llg - g0)) / p1


@njit(cache=True)
def _osc_direct(t, eps, kcode, prm, tab_x, tab_c, sa, sb, gx, gw, dphi, dx):
    sbrk = phase_break(prm)
    acc0 = 0.0
    acc1 = 0.0
    s = sa
    u_end = phase_eval(prm, sb, 0)
    while s < sb:
        nxt = min(sb, s + dx * eps)
        u = phase_eval(prm, s, 0) - dphi
        if u > u_end:
            nxt = min(nxt, phase_inverse(prm, u))
        if s < sbrk < nxt:
            nxt = sbrk
        if nxt <= s:
            nxt = min(sb, s + 1e-3 * dx * eps)
        v0, v1 = _panel_sum(t, eps, kcode, K_OSC, prm, tab_x, tab_c, s, nxt, gx, gw, True)
        acc0 += v0
        acc1 += v1
        s = nxt
    return acc0, acc1


@njit(cache=True)
def _smooth_direct(t, eps, kcode, kind, prm, tab_x, tab_c, sa, sb, gx, gw, dx):
    acc0 = 0.0
    acc1 = 0.0
    s = sa
    while s < sb:
        nxt = min(sb, s + dx * eps)
        if kind == K_TAB:
            off = int(prm[0])
            n = int(prm[1])
            i = _tab_index(tab_x, off, n, s)
            while i < off + n - 1 and tab_x[i + 1] <= s:
                i += 1
            if i + 1 < off + n and tab_x[i + 1] < nxt:
                nxt = tab_x[i + 1]
        v0, v1 = _panel_sum(t, eps, kcode, kind, prm, tab_x, tab_c, s, nxt, gx, gw, False)
        acc0 += v0
        acc1 += v1
        s = nxt
    return acc0, acc1


@njit(cache=True)
def mollify_point(t, eps, kcode, kind, prm, tab_x, tab_c, T, gx, gw, rmax, dphi, dx):
    """Mollified entry and its t-derivative at t."""
    v = 0.0
    d = 0.0
    xl = (t - eps) / eps
    if xl < 1.0:
        lo = max(xl, -1.0)
        f = entry_eval(kind, prm, tab_x, tab_c, eps, 0)
        v += f * kernel_integral(kcode, lo, 1.0, 0, gx, gw)
        d += f * kernel_integral(kcode, lo, 1.0, 1, gx, gw)
    xr = (t - T) / eps
    if xr > -1.0:
        hi = min(xr, 1.0)
        f = entry_eval(kind, prm, tab_x, tab_c, T, 0)
        v += f * kernel_integral(kcode, -1.0, hi, 0, gx, gw)
        d += f * kernel_integral(kcode, -1.0, hi, 1, gx, gw)
    sa = max(eps, t - eps)
    sb = min(T, t + eps)
    if sb > sa:
        if kind != K_OSC:
            m0, m1 = _smooth_direct(t, eps, kcode, kind, prm, tab_x, tab_c, sa, sb, gx, gw, dx)
            v += m0
            d += m1
        else:
            xlo = (t - sb) / eps
            xhi = (t - sa) / eps
            v += prm[0] * kernel_integral(kcode, xlo, xhi, 0, gx, gw)
            d += prm[0] * kernel_integral(kcode, xlo, xhi, 1, gx, gw)
            span = phase_eval(prm, sa, 0) - phase_eval(prm, sb, 0)
            if span <= rmax:
                o0, o1 = _osc_direct(t, eps, kcode, prm, tab_x, tab_c, sa, sb, gx, gw, dphi, dx)
            else:
                sc = phase_inverse(prm, phase_eval(prm, sb, 0) + rmax)
                o0, o1 = _osc_direct(t, eps, kcode, prm, tab_x, tab_c, sc, sb, gx, gw, dphi, dx)
                o0 += (_asym_bracket(t, eps, 0, kcode, prm, sc)
                       - _asym_bracket(t, eps, 0, kcode, prm, sa))
                o1 += (_asym_bracket(t, eps, 1, kcode, prm, sc)
                       - _asym_bracket(t, eps, 1, kcode, prm, sa))
            v += prm[1] * o0
            d += prm[1] * o1
    return v, d / eps


@njit(cache=True)
def mollify_pair_many(ts, eps, kcode, kinds, prms, weights, tab_x, tab_c, T, gx, gw,
                      rmax, dphi, dx):
    """Mollified symbol (column 0) and its derivative (column 1) at each t."""
    out = np.zeros((ts.shape[0], 2))
    for k in range(kinds.shape[0]):
        if weights[k] == 0.0:
            continue
        for i in range(ts.shape[0]):
            v, d = mollify_point(ts[i], eps, kcode, kinds[k], prms[k], tab_x, tab_c, T,
                                 gx, gw, rmax, dphi, dx)
            out[i, 0] += weights[k] * v
            out[i, 1] += weights[k] * d
    return out


# ---------------------------------------------------------------------------
# piecewise Chebyshev proxies


@njit(cache=True)
def _cheb_point(edges, coefs, t, deriv):
    npan = edges.shape[0] - 1
    n = coefs.shape[1]
    lo = 0
    hi = npan
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if edges[mid] <= t:
            lo = mid
        else:
            hi = mid
    a = edges[lo]
    b = edges[lo + 1]
    x = (2.0 * t - a - b) / (b - a)
    if deriv == 0:
        b1 = 0.0
        b2 = 0.0
        for k in range(n - 1, 0, -1):
            b0 = 2.0 * x * b1 - b2 + coefs[lo, k]
            b2 = b1
            b1 = b0
        return x * b1 - b2 + coefs[lo, 0]
    # U-series recurrence for T_k' = k U_{k-1}
    u1 = 0.0
    u2 = 0.0
    for k in range(n - 1, 0, -1):
        u0 = 2.0 * x * u1 - u2 + k * coefs[lo, k]
        u2 = u1
        u1 = u0
    return u1 * 2.0 / (b - a)


@njit(cache=True)
def cheb_eval(edges, coefs, ts, deriv):
    """Evaluate a piecewise Chebyshev series (or its derivative) at ts."""
    out = np.empty(ts.shape[0])
    for i in range(ts.shape[0]):
        out[i] = _cheb_point(edges, coefs, ts[i], deriv)
    return out


# ---------------------------------------------------------------------------
# integrals of |h| w over sub-intervals with at most one sign change of h


@njit(cache=True)
def _gronwall_parts(mode, t, xi, pe, pc, dc, kinds, prms, weights, tab_x, tab_c):
    # mode 1 -> (a_eps', 1/a_eps); mode 2 -> (a_eps - a, xi/sqrt(a_eps))
    p = _cheb_point(pe, pc, t, 0)
    if mode == 1:
        return _cheb_point(pe, dc, t, 0), 1.0 / p
    return p - symbol_eval(kinds, prms, weights, tab_x, tab_c, t, 0), xi / math.sqrt(p)


@njit(cache=True)
def abs_integrals(mode, lefts, rights, xi, pe, pc, dc, kinds, prms, weights, tab_x, tab_c,
                  gx, gw):
    """Per-interval integrals of |h| w, splitting at one sign change of h.

    The sign change is located by the Illinois variant of regula falsi.
    """
    m = lefts.shape[0]
    out = np.empty(m)
    for i in range(m):
        a = lefts[i]
        b = rights[i]
        ha, _ = _gronwall_parts(mode, a, xi, pe, pc, dc, kinds, prms, weights, tab_x, tab_c)
        hb, _ = _gronwall_parts(mode, b, xi, pe, pc, dc, kinds, prms, weights, tab_x, tab_c)
        cut = b
        if ha * hb < 0.0:
            lo = a
            hi = b
            flo = ha
            fhi = hb
            side = 0
            cut = 0.5 * (lo + hi)
            for _ in range(100):
                cut = (lo * fhi - hi * flo) / (fhi - flo)
                if not lo < cut < hi:
                    cut = 0.5 * (lo + hi)
                fc, _ = _gronwall_parts(mode, cut, xi, pe, pc, dc, kinds, prms, weights,
                                        tab_x, tab_c)
                if abs(fc) <= 1e-14 * (abs(ha) + abs(hb)):
                    break
                if fc * flo > 0.0:
                    lo = cut
                    flo = fc
                    if side == -1:
                        fhi *= 0.5
                    side = -1
                else:
                    hi = cut
                    fhi = fc
                    if side == 1:
                        flo *= 0.5
                    side = 1
                if hi - lo <= 1e-13 * (b - a) + 4e-16 * abs(hi):
                    break
        tot = 0.0
        for (u, v) in ((a, cut), (cut, b)):
            if v <= u:
                continue
            hw = 0.5 * (v - u)
            part = 0.0
            for j in range(gx.shape[0]):
                s = u + hw * (gx[j] + 1.0)
                hh, ww = _gronwall_parts(mode, s, xi, pe, pc, dc, kinds, prms, weights,
                                         tab_x, tab_c)
                part += gw[j] * abs(hh) * ww
            tot += part * hw
        out[i] = tot
    return out


# ---------------------------------------------------------------------------
# Dormand-Prince 8(5,3) for the Fourier mode


@njit(cache=True)
def _mode_rhs(t, y, xi2, kinds, prms, weights, tab_x, tab_c, out):
    a = symbol_eval(kinds, prms, weights, tab_x, tab_c, t, 0)
    out[0] = y[2]
    out[1] = y[3]
    out[2] = -a * xi2 * y[0]
    out[3] = -a * xi2 * y[1]


@njit(cache=True)
def dop853_mode(t0, y0, out_times, xi2, kinds, prms, weights, tab_x, tab_c,
                rtol, atol, hmax, A, B, C, E3, E5, max_steps):
    """Integrate u'' + a(t) xi2 u = 0 as a real 4-vector, sampling at out_times.

    Returns (samples, status, n_steps, n_rejected, t_reached, max_err).
    status 0 ok, 1 step underflow, 2 step budget exhausted.
    """
    nst = 12
    m = out_times.shape[0]
    samples = np.empty((m, 4))
    K = np.empty((nst + 1, 4))
    y = y0.copy()
    ynew = np.empty(4)
    tmp = np.empty(4)
    t = t0
    _mode_rhs(t, y, xi2, kinds, prms, weights, tab_x, tab_c, K[0])
    h = min(hmax, 1e-3 * hmax + 1e-12)
    k_out = 0
    while k_out < m and out_times[k_out] <= t:
        samples[k_out] = y
        k_out += 1
    n_steps = 0
    n_rej = 0
    max_err = 0.0
    safety = 0.9
    while k_out < m:
        target = out_times[k_out]
        if n_steps + n_rej >= max_steps:
            return samples[:k_out], 2, n_steps, n_rej, t, max_err
        hh = min(h, hmax)
        last = False
        if t + hh >= target:
            hh = target - t
            last = True
        if hh <= 1e-15 * max(1.0, abs(t)):
            if last:
                t = target
                while k_out < m and out_times[k_out] <= t:
                    samples[k_out] = y
                    k_out += 1
                continue
            return samples[:k_out], 1, n_steps, n_rej, t, max_err
        for s in range(1, nst):
            for c in range(4):
                acc = 0.0
                for j in range(s):
                    acc += A[s, j] * K[j, c]
                tmp[c] = y[c] + hh * acc
            _mode_rhs(t + C[s] * hh, tmp, xi2, kinds, prms, weights, tab_x, tab_c, K[s])
        for c in range(4):
            acc = 0.0
            for j in range(nst):
                acc += B[j] * K[j, c]
            ynew[c] = y[c] + hh * acc
        _mode_rhs(t + hh, ynew, xi2, kinds, prms, weights, tab_x, tab_c, K[nst])
        e5 = 0.0
        e3 = 0.0
        for c in range(4):
            sc = atol + rtol * max(abs(y[c]), abs(ynew[c]))
            a5 = 0.0
            a3 = 0.0
            for j in range(nst + 1):
                a5 += E5[j] * K[j, c]
                a3 += E3[j] * K[j, c]
            e5 += (a5 / sc) ** 2
            e3 += (a3 / sc) ** 2
        if e5 == 0.0 and e3 == 0.0:
            err = 0.0
        else:
            err = abs(hh) * e5 / math.sqrt((e5 + 0.01 * e3) * 4.0)
        if err <= 1.0:
            t = target if last else t + hh
            for c in range(4):
                y[c] = ynew[c]
                K[0, c] = K[nst, c]
            n_steps += 1
            if err > max_err:
                max_err = err
            fac = 10.0 if err == 0.0 else min(10.0, safety * err ** (-1.0 / 8.0))
            if not last:
                h = hh * fac
            while k_out < m and out_times[k_out] <= t:
                samples[k_out] = y
                k_out += 1
        else:
            n_rej += 1
            h = hh * max(0.2, safety * err ** (-1.0 / 8.0))
    return samples, 0, n_steps, n_rej, t, max_err
