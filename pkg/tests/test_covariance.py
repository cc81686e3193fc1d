import numpy as np
import pytest
from scipy.integrate import quad

from kfpkernel import fixtures
from kfpkernel.covariance import (
    adjoint_trace_identity_residual,
    covariance,
    model_covariance,
    ordering_check,
    propagator,
    trace_identity_residual,
)
from kfpkernel.errors import BreakpointTooClose, NotAfterInitialTime
from kfpkernel.operator import CoefficientTrack, OperatorSpec


def kolmogorov_C(t):
    return np.array([[t, -t * t / 2], [-t * t / 2, t ** 3 / 3]])


def test_propagator_examples():
    np.testing.assert_array_equal(propagator(fixtures.kolmogorov(), 0.0), np.eye(2))
    np.testing.assert_allclose(propagator(fixtures.kolmogorov(), 1.7), [[1, 0], [-1.7, 1]], atol=1e-15)
    assert propagator(fixtures.ornstein_uhlenbeck(), 2.0)[0, 0] == pytest.approx(np.exp(-2.0), rel=1e-14)


@pytest.mark.parametrize("t", [0.5, 1.0, 2.0])
def test_example_closed_form(t):
    b = covariance(fixtures.kolmogorov(), 0.0, t)
    np.testing.assert_allclose(b.C, kolmogorov_C(t), rtol=0, atol=1e-13)
    assert b.det == pytest.approx(t ** 4 / 12, rel=1e-13)


def test_example_at_one():
    b = covariance(fixtures.kolmogorov(), 0.0, 1.0)
    np.testing.assert_allclose(b.C, [[1, -0.5], [-0.5, 1 / 3]], atol=1e-15)
    assert b.log_det == pytest.approx(np.log(1 / 12), rel=1e-13)
    np.testing.assert_allclose(b.C @ b.C_inv, np.eye(2), atol=1e-12)


@pytest.mark.parametrize("t", [0.01, 1.0, 7.5])
def test_heat_and_ou(t):
    assert covariance(fixtures.heat(), 0.0, t).C[0, 0] == pytest.approx(t, rel=1e-14)
    ou = covariance(fixtures.ornstein_uhlenbeck(), 0.0, t).C[0, 0]
    assert ou == pytest.approx(-np.expm1(-2 * t) / 2, rel=1e-13)


def test_time_translation_for_constant_coefficients():
    spec = fixtures.chain3()
    np.testing.assert_allclose(covariance(spec, 3.25, 4.0).C, covariance(spec, 0.0, 0.75).C,
                               rtol=1e-13, atol=1e-17)


def test_piecewise_against_adaptive_quadrature():
    spec = fixtures.kolmogorov_piecewise()
    t0, t = -0.3, 1.9
    C = covariance(spec, t0, t).C

    def integrand(sig, i, j):
        E = np.array([[1.0, 0.0], [-(t - sig), 1.0]])
        return (E @ spec.A_at(sig) @ E.T)[i, j]

    bps = [b for b in spec.track.breakpoints if t0 < b < t]
    for i in range(2):
        for j in range(2):
            ref = quad(integrand, t0, t, args=(i, j), points=bps, epsabs=1e-14, epsrel=1e-13, limit=200)[0]
            assert C[i, j] == pytest.approx(ref, rel=1e-11, abs=1e-14)


def test_model_covariance_examples():
    np.testing.assert_allclose(model_covariance(fixtures.kolmogorov(), 1.0).C, kolmogorov_C(1.0), atol=1e-15)
    np.testing.assert_allclose(model_covariance(fixtures.heat2d(), 0.7).C, 0.7 * np.eye(2), rtol=1e-14)
    # A0 = nu I scales the covariance by nu
    B = [[0.0, 0.0], [1.0, 0.0]]
    scaled = OperatorSpec.build(B, [1, 1], CoefficientTrack.constant([[0.3]]))
    np.testing.assert_allclose(covariance(scaled, 2.0, 3.5).C, 0.3 * model_covariance(scaled, 1.5).C,
                               rtol=1e-13)


def test_requires_positive_elapsed_time():
    with pytest.raises(NotAfterInitialTime):
        covariance(fixtures.heat(), 1.0, 1.0)
    with pytest.raises(NotAfterInitialTime):
        model_covariance(fixtures.heat(), 0.0)


def test_additivity(any_spec, rng):
    for _ in range(5):
        t0 = rng.uniform(-1, 2)
        tau = t0 + rng.uniform(0.1, 2)
        t = tau + rng.uniform(0.1, 2)
        E = propagator(any_spec, t - tau)
        lhs = covariance(any_spec, t0, t).C
        rhs = covariance(any_spec, tau, t).C + E @ covariance(any_spec, t0, tau).C @ E.T
        np.testing.assert_allclose(lhs, rhs, rtol=1e-10, atol=1e-10 * np.abs(lhs).max())


def test_positivity_over_range(any_spec):
    for tau in np.geomspace(1e-3, 10, 9):
        C = covariance(any_spec, 0.1, 0.1 + tau).C
        assert np.linalg.eigvalsh(C)[0] > 0


def test_sandwich_and_determinant(rng):
    spec = fixtures.kolmogorov_piecewise()
    nu, N = spec.nu, spec.N
    for _ in range(10):
        t0 = rng.uniform(-1, 2)
        t = t0 + rng.uniform(0.05, 3)
        C = covariance(spec, t0, t)
        C0 = model_covariance(spec, t - t0)
        lower = ordering_check(nu * C0.C, C.C, samples=1000, rng=rng)
        upper = ordering_check(C.C, C0.C / nu, samples=1000, rng=rng)
        assert lower.hypothesis_holds and lower.conclusion_holds
        assert upper.hypothesis_holds and upper.conclusion_holds
        assert N * np.log(nu) + C0.log_det <= C.log_det + 1e-12
        assert C.log_det <= -N * np.log(nu) + C0.log_det + 1e-12


def test_ordering_examples(rng):
    r = ordering_check(np.eye(3), 2 * np.eye(3), rng=rng)
    assert r.hypothesis_holds and r.conclusion_holds and r.violations == []
    assert r.inverse_margin == pytest.approx(0.5, abs=1e-11)
    assert r.det_margin == pytest.approx(3 * np.log(2), rel=1e-12)
    same = ordering_check(np.diag([1.0, 2.0]), np.diag([1.0, 2.0]), rng=rng)
    assert same.hypothesis_holds and same.conclusion_holds
    assert abs(same.inverse_margin) < 1e-11
    flipped = ordering_check(2 * np.eye(2), np.eye(2), rng=rng)
    assert not flipped.hypothesis_holds


@pytest.mark.parametrize("name", ["heat", "kolmogorov", "ou"])
def test_trace_identities_at_one(name):
    spec = fixtures.get(name)
    assert trace_identity_residual(spec, 0.0, 1.0) <= 1e-6
    assert adjoint_trace_identity_residual(spec, 0.0, 1.0) <= 1e-6


def test_adjoint_trace_closed_form_heat():
    # C = t - s, C' = 1/(t - s): d/ds log det C / 2 = -1/(2(t-s))
    spec = fixtures.heat()
    assert adjoint_trace_identity_residual(spec, 0.0, 2.0) <= 1e-8
    C_prime = covariance(spec, 0.0, 2.0).C_prime
    assert -0.5 * C_prime[0, 0] == pytest.approx(-1 / (2 * 2.0))


def test_trace_identity_refuses_breakpoints():
    spec = fixtures.kolmogorov_piecewise()
    with pytest.raises(BreakpointTooClose):
        trace_identity_residual(spec, 0.0, 1.0)
    with pytest.raises(BreakpointTooClose):
        adjoint_trace_identity_residual(spec, 1.5, 3.0)
    assert trace_identity_residual(spec, 0.0, 1.25) <= 1e-6


def test_cache_returns_same_bundle():
    spec = fixtures.kolmogorov()
    assert covariance(spec, 0.0, 1.0) is covariance(spec, 0.0, 1.0)
    assert covariance(spec, 0.0, 1.0) is not covariance(spec, 0.0, np.nextafter(1.0, 2.0))


def test_cache_is_thread_safe():
    from concurrent.futures import ThreadPoolExecutor

    spec = fixtures.chain3()
    times = np.linspace(0.1, 2.0, 40)
    with ThreadPoolExecutor(8) as pool:
        got = list(pool.map(lambda t: covariance(spec, 0.0, t).C, list(times) * 3))
    for C, t in zip(got, list(times) * 3):
        np.testing.assert_array_equal(C, covariance(spec, 0.0, t).C)
