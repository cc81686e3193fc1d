"""Acceptance criteria; each test prints one PASS/FAIL line (also gathered in the terminal summary)."""
import time

import numpy as np
import pytest

from kfpkernel import fixtures
from kfpkernel.cauchy import GaussianGrowth, horizon, reproduction_residual, solve_at
from kfpkernel.covariance import covariance
from kfpkernel.expr import compile_expression
from kfpkernel.kernel import gamma
from kfpkernel.verify import (
    SdeConfig,
    adjoint_residual,
    comparison_sweep,
    derivative_oracle,
    mass_integrals,
    mc_crosscheck,
    pde_residual,
    short_time_slope,
    trace_check,
)

ALL = sorted(fixtures.FIXTURES)


@pytest.fixture
def record(request):
    def _record(k, ok, text):
        line = f"{'PASS' if ok else 'FAIL'} criterion {k}: {text}"
        print(line)
        request.config._acceptance_lines.append(line)
        assert ok, line
    return _record


def test_criterion_01_example_closed_form(record):
    start = time.perf_counter()
    spec = fixtures.kolmogorov()
    v = gamma(spec, [0.0, 0.0], 1.0, [0.0, 0.0], 0.0).value
    rel = abs(v - np.sqrt(3) / (2 * np.pi)) / (np.sqrt(3) / (2 * np.pi))
    entry = 0.0
    for t in (0.5, 1.0, 2.0):
        exact = np.array([[t, -t * t / 2], [-t * t / 2, t ** 3 / 3]])
        entry = max(entry, np.abs(covariance(spec, 0.0, t).C - exact).max())
    elapsed = time.perf_counter() - start
    record(1, rel <= 1e-10 and entry <= 1e-13 and elapsed < 1.0,
           f"Example value rel err {rel:.2e} (<=1e-10), C(t) max entry err {entry:.2e} (<=1e-13), "
           f"{elapsed:.3f} s (<1 s)")


def test_criterion_02_mass_identities(record):
    start = time.perf_counter()
    worst, where = 0.0, ""
    rng = np.random.default_rng(2)
    for name in ("heat", "ou", "kolmogorov", "chain3"):
        spec = fixtures.get(name)
        for tau in (0.1, 1.0, 5.0):
            x0 = rng.standard_normal(spec.N)
            ix, iy = mass_integrals(spec, x0, 0.3, 0.3 + tau)
            target = np.exp(-tau * spec.trace_B)
            err = max(abs(ix - target) / target, abs(iy - 1.0))
            if err > worst:
                worst, where = err, f"{name}, t-t0={tau:g}"
    elapsed = time.perf_counter() - start
    record(2, worst <= 1e-6 and elapsed < 10.0,
           f"worst mass error {worst:.2e} (<=1e-6) at {where}, {elapsed:.2f} s (<10 s)")


def test_criterion_03_pde_residuals(record):
    start = time.perf_counter()
    worst = {}
    for name in ALL:
        spec = fixtures.get(name)
        worst[name] = max(pde_residual(spec, samples=100).checks[0].worst,
                          adjoint_residual(spec, samples=100).checks[0].worst)
    elapsed = time.perf_counter() - start
    top = max(worst, key=worst.get)
    record(3, worst[top] <= 1e-4 and elapsed < 30.0,
           f"worst L/L* residual {worst[top]:.2e} (<=1e-4) on {top}, 100 samples x {len(ALL)} fixtures, "
           f"{elapsed:.2f} s (<30 s)")


def test_criterion_04_trace_identities(record):
    worst, where = 0.0, ""
    for name in ALL:
        rep = trace_check(fixtures.get(name), samples=20)
        for c in rep.checks:
            if c.worst > worst:
                worst, where = c.worst, f"{c.check_id} on {name}"
    record(4, worst <= 1e-5, f"worst trace-identity residual {worst:.2e} (<=1e-5) at {where}, 20 samples per fixture")


def test_criterion_05_comparison(record):
    rep = comparison_sweep(fixtures.kolmogorov_piecewise(), samples=10_000)
    c = rep.checks[0]
    eq = comparison_sweep(fixtures.kolmogorov(), samples=2000).checks[0]
    gap = eq.details["max_gap_to_bounds"]
    record(5, c.passed and c.details["violations"] == 0 and gap <= 1e-12,
           f"piecewise sandwich worst log-excess {c.worst:.2e} (<=1e-12) over {c.samples} samples, "
           f"nu=1 max gap {gap:.2e} (<=1e-12)")


def test_criterion_06_short_time_slope(record):
    parts, ok = [], True
    for name, Q in (("heat2d", 2), ("kolmogorov", 4), ("chain3", 9)):
        Q_fit, _ = short_time_slope(fixtures.get(name))
        err = abs(Q_fit - Q) / Q
        ok &= err <= 0.01
        parts.append(f"{name} Q_fit={Q_fit:.6f} vs {Q} ({err:.1e})")
    record(6, ok, "; ".join(parts) + " (<=1%)")


def test_criterion_07_reproduction(record):
    res = {
        "kolmogorov": reproduction_residual(fixtures.kolmogorov(), [1.0, 1.0], 1.0, [0.0, 0.0], 0.0, 0.5),
        "ou": reproduction_residual(fixtures.ornstein_uhlenbeck(), [0.0], 2.0, [0.0], 0.0, 1.0),
        "heat": reproduction_residual(fixtures.heat(), [0.0], 1.0, [0.0], 0.0, 0.5),
    }
    ok = res["kolmogorov"] <= 1e-6 and res["ou"] <= 1e-6 and res["heat"] <= 1e-8
    record(7, ok, f"Example {res['kolmogorov']:.2e} (<=1e-6), OU {res['ou']:.2e} (<=1e-6), "
                  f"heat {res['heat']:.2e} (<=1e-8)")


def test_criterion_08_horizon(record):
    spec = fixtures.heat()
    raw = horizon(spec, 1.0).raw
    f = GaussianGrowth(compile_expression("exp(x1^2)", 1), alpha=1.0)
    u = float(solve_at(spec, f, 0.0, [0.0], 0.1))
    target = 1 / np.sqrt(0.6)
    record(8, abs(raw - 0.25) <= 1e-4 and abs(u - target) <= 1e-6,
           f"raw horizon {raw:.10f} (0.25 +- 1e-4), u(0, 0.1) = {u:.12f} vs {target:.12f} "
           f"(err {abs(u - target):.1e} <= 1e-6)")


def test_criterion_09_monte_carlo(record):
    start = time.perf_counter()
    worst, where = 0.0, ""
    failed = []
    for name in ALL:
        spec = fixtures.get(name)
        x0 = np.linspace(0.5, -0.5, spec.N)
        rep = mc_crosscheck(spec, x0, 0.0, 1.0, SdeConfig(paths=100_000, dt=1e-3))
        for c in rep.checks:
            if c.worst > worst:
                worst, where = c.worst, f"{c.check_id} on {name}"
            if not c.passed:
                failed.append(f"{c.check_id} on {name}")
    elapsed = time.perf_counter() - start
    record(9, not failed and elapsed < 60.0,
           f"worst deviation {worst:.2f} standard errors (<=5) at {where}, 1e5 paths, dt=1e-3, "
           f"{elapsed:.1f} s (<60 s)")


def test_criterion_10_derivative_oracle(record):
    worst, where = 0.0, ""
    for name in ALL:
        for c in derivative_oracle(fixtures.get(name), samples=200).checks:
            if c.worst > worst:
                worst, where = c.worst, f"{c.check_id} on {name}"
    record(10, worst <= 1e-5, f"worst relative FD mismatch {worst:.2e} (<=1e-5) at {where}, 200 points per fixture")
