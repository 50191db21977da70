import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from wellposed.analysis import (FIT_COLUMNS, DecayProfile, check_decay, classify,
                                data_log_magnitude, fit_growth)
from wellposed.energy import ExponentModel, SweepRow
from wellposed.moduli import PsiSpec

GEVREY = ExponentModel("gevrey", 1.0, 2.0, 0.5)
LOG = ExponentModel("log_psi", 1.0, psi=PsiSpec("one_plus_log"), tau1=0.25)

# Frozen energy sweep of holder_singular(alpha=1/2, p=2) at eps = 1/xi,
# 21 log-spaced |xi| in [10, 1e5]: log energy ratio and Gronwall budget.
HOLDER_XI = np.geomspace(10, 1e5, 21)
HOLDER_LOG_RATIO = np.array([
    0.52068, 0.4851, 0.29115, 1.3323, 0.064881, 1.7333, 0.56416, 1.2943, 2.7766, 1.3338,
    0.6823, 3.8334, 9.3205, 7.9734, 14.647, 20.226, 23.661, 33.937, 55.809, 77.784, 110.15])
HOLDER_G = np.array([
    4.6262751, 6.6923591, 9.0125142, 12.653281, 18.427785, 25.857337, 36.801868, 52.23558,
    72.982611, 103.64109, 146.18004, 207.45543, 291.79277, 412.41008, 582.49253, 823.44611,
    1163.0163, 1643.3899, 2321.0755, 3277.9563, 4630.3304])


def grid(n=16, lo=10.0, hi=1e4):
    return np.geomspace(lo, hi, n)


# growth fits

@pytest.mark.parametrize("M", [1e-3, 0.7, 16.2])
def test_exact_gevrey_data_recovers_M(M):
    xi = grid()
    x = xi ** GEVREY.growth_power
    fit = fit_growth((xi, M * (1 + 4 * x)), GEVREY)
    assert fit.M_hat == pytest.approx(M, rel=1e-8)
    assert fit.M_line == pytest.approx(M, rel=1e-8)
    assert fit.intercept == pytest.approx(M, rel=1e-8)
    assert fit.consistent
    assert np.max(np.abs(fit.residuals)) <= 1e-8 * M * x.max()


def test_exact_log_data_recovers_M():
    xi = grid()
    fit = fit_growth((xi, 2.5 * (1 + np.log(xi))), LOG)
    assert fit.M_hat == pytest.approx(2.5, rel=1e-12)
    assert fit.M_line == pytest.approx(2.5, rel=1e-10)
    assert fit.consistent


def test_constant_sweep_flat():
    xi = grid(8, 10, 1e4)
    y = np.array([1e-13, -2e-14, 3e-14, 0, -1e-14, 2e-13, 5e-14, -3e-14])
    fit = fit_growth((xi, y), LOG)
    assert abs(fit.M_hat) < 1e-12 and abs(fit.M_line) < 1e-12
    assert fit.consistent


def test_fit_from_sweep_rows():
    xi = grid(8)
    rows = [SweepRow(x, 1 / x, 1.0, 1.0, 0.1 * (1 + math.log(x)), 2.0 * (1 + math.log(x)), math.nan)
            for x in xi]
    assert fit_growth(rows, LOG).M_hat == pytest.approx(0.1)
    assert fit_growth(rows, LOG, quantity="gronwall_total").M_hat == pytest.approx(2.0)
    with pytest.raises(ValueError):
        fit_growth(rows, LOG, quantity="ET")


def test_holder_sweep_gevrey_consistent_log_inconsistent():
    for y in (HOLDER_LOG_RATIO, HOLDER_G):
        assert fit_growth((HOLDER_XI, y), GEVREY).consistent
        assert not fit_growth((HOLDER_XI, y), LOG).consistent
    # the 16-point grid up to 1e4 already separates the shapes for the budget
    xi16, g16 = HOLDER_XI[:17], HOLDER_G[:17]
    assert fit_growth((xi16, g16), GEVREY).consistent
    assert not fit_growth((xi16, g16), LOG).consistent


def test_holder_sup_ratio_stable_under_extension():
    short = fit_growth((HOLDER_XI[:17], HOLDER_G[:17]), GEVREY)
    full = fit_growth((HOLDER_XI, HOLDER_G), GEVREY)
    assert full.sup_ratio <= 1.1 * short.sup_ratio
    assert full.spread < 3


def test_diverging_tail_is_inconsistent():
    xi = grid()
    y = 0.5 * (1 + 4 * xi ** 0.75)
    y[-2:] *= 3
    assert not fit_growth((xi, y), GEVREY).consistent


def test_fit_input_checks():
    xi = grid()
    y = 1 + np.log(xi)
    with pytest.raises(ValueError, match="8"):
        fit_growth((xi[:7], y[:7]), LOG)
    with pytest.raises(ValueError, match="decades"):
        fit_growth((np.geomspace(10, 900, 10), np.ones(10)), LOG)
    with pytest.raises(ValueError, match="threshold"):
        fit_growth((np.geomspace(1, 1e3, 10), np.ones(10)), LOG)
    bad = y.copy()
    bad[3] = np.nan
    with pytest.raises(ValueError, match="finite"):
        fit_growth((xi, bad), LOG)
    with pytest.raises(TypeError):
        fit_growth([1, 2, 3], LOG)


def test_fit_rows_table():
    xi = grid(9)
    fit = fit_growth((xi, 0.3 * (1 + 4 * xi ** 0.75)), GEVREY)
    rows = fit.rows()
    assert len(rows) == 9 and len(rows[0]) == len(FIT_COLUMNS)
    assert rows[0][0] == 10.0 and rows[0][3] == pytest.approx(0.3)
    d = fit.to_dict()
    assert d["verdict"] == "consistent" and d["points"] == 9


@given(st.lists(st.floats(-5, 50), min_size=8, max_size=20), st.floats(0.0, 2.0))
def test_fit_invariants(ys, span):
    xi = np.geomspace(10, 10 ** (3 + span), len(ys))
    fit = fit_growth((xi, np.array(ys)), GEVREY)
    assert fit.residuals.size == xi.size
    assert np.all(fit.ratios <= fit.sup_ratio)
    assert fit.verdict in ("consistent", "inconsistent")


@given(st.floats(1e-3, 50), st.floats(1.0, 1e3))
def test_fit_scale_invariance(M, c):
    xi = grid()
    y = M * (1 + np.log(xi)) * (1 + 0.1 * np.sin(np.arange(xi.size)))
    a, b = fit_growth((xi, y), LOG), fit_growth((xi, c * y), LOG, floor=c * 1e-6)
    assert b.sup_ratio == pytest.approx(c * a.sup_ratio, rel=1e-12)
    assert a.verdict == b.verdict


# decay profiles

def test_exponential_decay_sigma1():
    xi = np.geomspace(1, 100, 40)
    prof = check_decay(xi, np.exp(-xi), sigma=1)
    assert prof.delta == pytest.approx(1.0, rel=1e-10)
    assert prof.K == pytest.approx(1.0, rel=1e-10)
    assert prof.r_squared == pytest.approx(1.0) and prof.passed


def test_root_decay_sigma2():
    xi = np.geomspace(1, 1e4, 40)
    prof = check_decay(xi, np.exp(-np.sqrt(xi)), sigma=2)
    assert prof.delta == pytest.approx(1.0, rel=1e-10)
    assert prof.K == pytest.approx(1.0, rel=1e-10)


def test_gaussian_polynomial_decay():
    xi = np.geomspace(1, 1e4, 20001)
    prof = check_decay(xi, np.exp(-xi ** 2), kind="polynomial", zetas=range(1, 13))
    assert prof.passed
    for z, K in prof.K_zeta.items():
        # sup of xi^z exp(-xi^2) over xi >= 1, by calculus
        peak = max(1.0, math.sqrt(z / 2))
        assert K == pytest.approx(peak ** z * math.exp(-peak ** 2), rel=1e-6)
        with np.errstate(under="ignore"):
            assert np.all(np.exp(-xi ** 2) <= K * xi ** -z * (1 + 1e-12))


def test_decay_with_velocity_component():
    xi = np.geomspace(1, 50, 30)
    u0, u1 = np.exp(-xi), xi * np.exp(-xi)
    lm = data_log_magnitude(xi, u0, u1)
    assert np.allclose(lm, -xi + 0.5 * math.log(2), atol=1e-13)
    prof = check_decay(xi, u0, u1)
    assert prof.delta == pytest.approx(1.0, rel=1e-10)
    assert prof.K == pytest.approx(math.sqrt(2), rel=1e-10)


def test_log_magnitude_input_avoids_underflow():
    xi = np.geomspace(10, 1e4, 30)
    prof = check_decay(xi, log_magnitude=-2.0 * xi ** (1 / 1.2), sigma=1.2)
    assert prof.delta == pytest.approx(2.0, rel=1e-10)


def test_decay_errors():
    xi = np.geomspace(1, 100, 10)
    with pytest.raises(ValueError, match="zero"):
        check_decay(xi, np.zeros(10))
    with pytest.raises(ValueError, match="zero"):
        check_decay(xi, np.zeros(10), kind="polynomial")
    with pytest.raises(ValueError):
        check_decay(xi, np.ones(10), kind="ultra")
    with pytest.raises(ValueError):
        check_decay(xi, np.ones(10), xi_min=1e3)


@given(st.floats(1e-3, 1e3), st.floats(0.1, 5), st.sampled_from([1.0, 1.2, 2.0]))
def test_decay_scale_equivariant(c, delta, sigma):
    xi = np.geomspace(1, 1e3, 25)
    lm = -delta * xi ** (1 / sigma) + 0.3 * np.cos(xi)
    a = check_decay(xi, log_magnitude=lm, sigma=sigma)
    b = check_decay(xi, log_magnitude=lm + math.log(c), sigma=sigma)
    assert b.log_K - a.log_K == pytest.approx(math.log(c), abs=1e-10)
    assert abs(b.delta - a.delta) <= 1e-10 * max(1.0, abs(a.delta))


def test_decay_profile_dict():
    xi = np.geomspace(1, 100, 10)
    d = check_decay(xi, np.exp(-xi), kind="polynomial", zetas=(1, 2.5)).to_dict()
    assert set(d["log_K_zeta"]) == {"1", "2.5"}
    assert isinstance(check_decay(xi, np.exp(-xi)), DecayProfile)


# classification

def _gevrey_fit(p=2.0, alpha=0.5):
    m = ExponentModel("gevrey", 1.0, p, alpha)
    xi = grid()
    return fit_growth((xi, 0.2 * m.shape(xi)), m)


def test_classify_gevrey_threshold():
    rep = classify(_gevrey_fit())
    assert rep["sigma_star"] == pytest.approx(4 / 3)
    assert "4/3" not in rep["classification"]
    assert "1.33333" in rep["classification"]


def test_classify_gevrey_with_data():
    xi = np.geomspace(10, 1e4, 20)
    below = check_decay(xi, log_magnitude=-xi ** (1 / 1.2), sigma=1.2)
    above = check_decay(xi, log_magnitude=-xi ** (1 / 1.5), sigma=1.5)
    assert classify(_gevrey_fit(), below)["preserved"] is True
    assert classify(_gevrey_fit(), above)["preserved"] is False


def test_classify_limit_note():
    rep = classify(_gevrey_fit(p=1.0001, alpha=1.0))
    assert rep["sigma_star"] > 1e3
    assert "C-infinity" in rep["limit_note"]


def test_classify_log_psi():
    xi = grid()
    fit = fit_growth((xi, 0.4 * (1 + np.log(xi))), LOG)
    xi_d = np.geomspace(10, 1e3, 50)
    decay = check_decay(xi_d, np.exp(-xi_d), kind="polynomial", zetas=(1, 5))
    rep = classify(fit, decay)
    assert rep["classification"] == "C-infinity well-posed"
    assert rep["modulus"] == "tau|log tau|/(1+log|log tau|)"
    assert rep["theta"]["5"] == pytest.approx(5 - 0.4)


def test_classify_deterministic():
    a = classify(_gevrey_fit()).to_dict()
    b = classify(_gevrey_fit()).to_dict()
    assert a == b and repr(a) == repr(b)


def test_classify_refuses_inconsistent():
    fit = fit_growth((HOLDER_XI, HOLDER_G), LOG)
    with pytest.raises(ValueError, match="inconsistent"):
        classify(fit)
