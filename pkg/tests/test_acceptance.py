"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v`` or
``python tests/test_acceptance.py``. Criteria 4 and 9 dominate the runtime
(a few minutes on one core).
"""

import filecmp
import math
import subprocess
import sys
import time
import warnings
from pathlib import Path

import numpy as np
import pytest
from scipy import integrate

from wellposed.analysis import check_decay, classify, fit_growth
from wellposed.coefficients import make_test_coefficient
from wellposed.energy import ExponentModel, coupling_eps, gronwall_bound, integrate_mode
from wellposed.moduli import BlowupSpec, ModulusSpec, PsiSpec
from wellposed.mollify import (MollifiedCoefficient, mollify_derivative, mollify_value,
                               verify_prop23)

pytestmark = pytest.mark.slow

GRID16 = np.geomspace(10, 1e4, 16)
# same spacing, one decade further
GRID21 = np.geomspace(10, 1e5, 21)


@pytest.fixture
def report(capsys):
    def emit(n: int, ok: bool, detail: str):
        with capsys.disabled():
            print(f"\nCRITERION {n}: {'PASS' if ok else 'FAIL'} - {detail}")
        assert ok, detail
    return emit


@pytest.fixture(scope="module")
def holder():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return make_test_coefficient("holder_singular", alpha=0.5, p=2.0)


@pytest.fixture(scope="module")
def psi():
    return make_test_coefficient("psi_singular", psi=PsiSpec("one_plus_log"))


def test_c1_mollifier_certification(holder, report):
    start = time.perf_counter()
    rep = verify_prop23(holder, eps_grid=np.geomspace(1e-3, 1e-1, 64),
                        t_grid=np.geomspace(1e-5, holder.T, 64))
    elapsed = time.perf_counter() - start
    ok = rep.passed and rep.pass_fraction == 1.0 and rep.lhs1.size == 64 * 64 and elapsed < 120
    report(1, ok, f"64x64 grid, pass fraction {rep.pass_fraction:.4f}, "
                  f"C'={rep.C1:.4g}, C''={rep.C2:.4g}, {elapsed:.1f} s")


def test_c2_conservation(report):
    fld = make_test_coefficient("constant", c=1.0)
    worst = 0.0
    for xi in (1.0, 10.0, 100.0, 1000.0):
        tr = integrate_mode(fld, xi, (1.0, 0.0), n_samples=2)
        e = tr.flat_energy()
        worst = max(worst, abs(e[-1] / e[0] - 1))
    report(2, worst < 1e-8, f"max |E(T)/E(0) - 1| = {worst:.3g}")


def test_c3_gronwall_dominance(holder, psi, report):
    worst = -math.inf
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for fld in (holder, psi):
            for xi in (10.0, 100.0, 1000.0):
                eps = 1.0 / xi
                tr = integrate_mode(fld, xi, (1.0, 0.0), eps=eps, n_samples=129)
                # log of E(t) / (E(0) exp(G(t))); must stay below log(1 + 1e-5)
                excess = np.log(tr.energy / tr.energy[0]) - tr.gronwall
                worst = max(worst, float(excess.max()))
    report(3, worst <= math.log1p(1e-5),
           f"max log(E_eps(t)/(E_eps(0) exp G(t))) = {worst:.4g} over 6 runs x 129 samples")


def _ratios(fld, grid, shape):
    G = np.array([gronwall_bound(fld, x, coupling_eps(fld, x), tol=1e-5).total for x in grid])
    return G, G / shape(grid)


def test_c4_gevrey_exponent_law(holder, report):
    G, r = _ratios(holder, GRID21, lambda x: 1 + x ** 0.75)
    r16 = r[:16]
    spread = r16.max() / np.median(r16)
    growth = r.max() / r16.max()
    m = ExponentModel("gevrey", 1.0, 2.0, 0.5)
    fit = fit_growth((GRID16, G[:16]), m, quantity="gronwall_total")
    sigma_star = classify(fit)["sigma_star"] if fit.consistent else math.nan
    ok = spread < 3 and growth <= 1.1 and sigma_star == 4 / 3
    report(4, ok, f"max/median {spread:.4f}, extension growth {growth:.5f}, "
                  f"sigma* = {sigma_star!r}")


def test_c5_cinf_exponent_law(psi, report):
    _, r = _ratios(psi, GRID21, lambda x: 1 + np.log(x))
    r16 = r[:16]
    spread = r16.max() / np.median(r16)
    growth = r.max() / r16.max()
    report(5, spread < 3 and growth <= 1.1,
           f"max/median {spread:.4f}, extension growth {growth:.5f}")


def test_c6_decay_preservation(holder, report):
    sigma = 1.2
    log_data = -GRID16 ** (1 / sigma)
    log_sol = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for xi, ld in zip(GRID16, log_data):
            # linear problem: solve with unit data and shift by the data's log size
            tr = integrate_mode(holder, xi, (1.0, 0.0), n_samples=2)
            mag = math.hypot(abs(tr.u[-1]), abs(tr.ut[-1]) / xi)
            log_sol.append(ld + math.log(mag))
    prof = check_decay(GRID16, log_magnitude=np.array(log_sol), sigma=sigma, xi_min=10.0)
    ok = prof.delta > 0 and prof.r_squared > 0.99
    report(6, ok, f"delta' = {prof.delta:.6f}, log K' = {prof.log_K:.4g}, "
                  f"R^2 = {prof.r_squared:.8f}")


BUMP_MASS = integrate.quad(lambda x: math.exp(-1 / (1 - x * x)), -1, 1,
                           epsabs=0, epsrel=1e-12)[0]


def _simpson_oracle(t, eps, n=10 ** 6):
    # unit-mass bump on [-eps, eps]; extension clamps to [eps, T]
    s = np.linspace(-eps, eps, n + 1)
    x = s[1:-1] / eps
    kern = np.zeros_like(s)
    kern[1:-1] = np.exp(-1 / (1 - x * x)) / (BUMP_MASS * eps)
    tau = np.clip(t - s, eps, 1.0)
    return integrate.simpson(kern * (2 + np.sin(tau ** -3.0)), x=s)


def test_c7_oracle_equivalence(holder, report):
    rng = np.random.default_rng(20240601)
    ts = rng.uniform(0.05, 1.0, 100)
    epss = np.exp(rng.uniform(math.log(1e-3), math.log(1e-1), 100))
    val_err, der_err = 0.0, 0.0
    for t, eps in zip(ts, epss):
        mc = MollifiedCoefficient(holder, float(eps))
        v = mollify_value(mc, float(t))
        val_err = max(val_err, abs(v - _simpson_oracle(t, eps)))
        h = 1e-4 * eps
        fd = (_simpson_oracle(t + h, eps) - _simpson_oracle(t - h, eps)) / (2 * h)
        d = mollify_derivative(mc, float(t))
        # relative 1e-4, with a floor at the finite-difference roundoff level
        der_err = max(der_err, abs(d - fd) / (1e-4 * abs(fd) + 1e-9 / eps))
    ok = val_err < 1e-8 and der_err <= 1.0
    report(7, ok, f"max value error {val_err:.3g}; max derivative error / allowance "
                  f"{der_err:.3g}")


def test_c8_remark_identities(report):
    ident_mu = ModulusSpec.from_psi(PsiSpec("identity"))
    tau = np.geomspace(1e-12, ident_mu.tau0, 400)
    ident_nu = BlowupSpec.from_psi(PsiSpec("identity"))
    e1 = np.max(np.abs(ident_mu(tau) - tau))
    e2 = np.max(np.abs(ident_nu(tau) - tau))
    t = np.geomspace(1e-12, math.exp(-1), 400)
    lognu = BlowupSpec.from_psi(PsiSpec("one_plus_log"))
    e3 = np.max(np.abs(lognu(t) - t * np.abs(np.log(t))))
    worst = max(e1, e2, e3)
    report(8, worst < 1e-12, f"identity mu {e1:.2g}, identity nu {e2:.2g}, "
                             f"one_plus_log nu {e3:.2g}")


def _run_cli(config: str, out: Path):
    subprocess.run([sys.executable, "-m", "wellposed.cli", "all", config, "--out", str(out)],
                   check=True, capture_output=True)


def test_c9_determinism(tmp_path, report):
    details, ok = [], True
    for cfg in ("constant", "cinf_onepluslog"):
        a, b = tmp_path / cfg / "a", tmp_path / cfg / "b"
        _run_cli(cfg, a)
        _run_cli(cfg, b)
        names = sorted(p.name for p in a.iterdir())
        same = sorted(p.name for p in b.iterdir()) == names
        _, mismatch, errors = filecmp.cmpfiles(a, b, names, shallow=False)
        same = same and not mismatch and not errors and "sweep.csv" in names
        ok = ok and same
        details.append(f"{cfg}: {len(names)} files {'identical' if same else 'DIFFER'}")
    report(9, ok, "; ".join(details))


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
