import numpy as np
import pytest

from kfpkernel import fixtures
from kfpkernel.errors import HorizonExceeded, NotAfterInitialTime
from kfpkernel.kernel import (
    ShortTimeConstants,
    comparison_log_bounds,
    derivatives,
    gamma,
    gamma_model,
    log_gamma,
    log_short_time_upper,
)
from kfpkernel.operator import CoefficientTrack, OperatorSpec


def kolmogorov_closed_form(x, t):
    x1, x2 = x
    q = (x1 * x1 / t + 3 * x1 * x2 / t ** 2 + 3 * x2 * x2 / t ** 3)
    return np.sqrt(3) / (2 * np.pi * t * t) * np.exp(-q)


def test_heat_value_at_centre():
    assert gamma(fixtures.heat(), [0.0], 1.0, [0.0], 0.0).value == pytest.approx(0.2820947917738781,
                                                                                 rel=1e-14)


def test_example_value_at_centre():
    v = gamma(fixtures.kolmogorov(), [0.0, 0.0], 1.0, [0.0, 0.0], 0.0).value
    assert v == pytest.approx(np.sqrt(3) / (2 * np.pi), rel=1e-10)


@pytest.mark.parametrize("x,t", [((0.3, -0.4), 0.5), ((1.0, 2.0), 2.0), ((-2.0, 0.1), 1.3)])
def test_example_closed_form_off_centre(x, t):
    v = gamma(fixtures.kolmogorov(), x, t, [0.0, 0.0], 0.0).value
    assert v == pytest.approx(kolmogorov_closed_form(x, t), rel=1e-10)


def test_zero_before_pole():
    spec = fixtures.kolmogorov()
    ev = gamma(spec, [0.1, 0.2], 0.5, [0.0, 0.0], 0.5)
    assert ev.value == 0.0 and ev.log_value == -np.inf
    ev = gamma(spec, [[0.1, 0.2], [0.0, 0.0]], -1.0, [0.0, 0.0], 0.0)
    assert np.all(ev.value == 0) and np.all(ev.log_value == -np.inf)


def test_model_matches_kernel_for_constant_coefficients(rng):
    alpha = 0.7
    spec = OperatorSpec.build([[0.0, 0.0], [1.0, 0.0]], [1, 1], CoefficientTrack.constant([[alpha]]))
    X = rng.normal(size=(100, 2))
    Y = rng.normal(size=(100, 2))
    a = gamma(spec, X, 1.3, Y, 0.2).value
    b = gamma_model(alpha, spec, X, 1.3, Y, 0.2).value
    np.testing.assert_allclose(a, b, rtol=1e-12)


def test_model_time_translation(rng):
    spec = fixtures.chain3()
    X = rng.normal(size=(20, 3))
    a = gamma_model(1.5, spec, X, 1.0, np.zeros(3), 0.0).log_value
    b = gamma_model(1.5, spec, X, 4.25, np.zeros(3), 3.25).log_value
    np.testing.assert_allclose(a, b, rtol=1e-13)


def test_model_rejects_nonpositive_alpha():
    with pytest.raises(ValueError):
        gamma_model(0.0, fixtures.heat(), [0.0], 1.0, [0.0], 0.0)


def test_gradient_vanishes_at_centre(any_spec):
    N = any_spec.N
    y = np.linspace(-0.5, 0.5, N)
    from kfpkernel.covariance import propagator

    x = propagator(any_spec, 1.2) @ y
    d = derivatives(any_spec, x, 1.7, y, 0.5)
    assert np.max(np.abs(d.grad_x)) < 1e-12 * d.value


def test_heat_gradient_closed_form():
    x = np.array([[0.3], [-1.2], [2.0]])
    d = derivatives(fixtures.heat(), x, 1.0, [0.0], 0.0)
    np.testing.assert_allclose(d.grad_x[:, 0], -(x[:, 0] / 2) * d.value, rtol=1e-13)
    # heat equation: dt = u_xx
    np.testing.assert_allclose(d.dt, d.hess_x[:, 0, 0], rtol=1e-13)


def test_hessians_are_symmetric(any_spec, rng):
    N = any_spec.N
    d = derivatives(any_spec, rng.normal(size=(10, N)), 1.1, rng.normal(size=(10, N)), 0.2)
    np.testing.assert_allclose(d.hess_x, np.swapaxes(d.hess_x, -1, -2), rtol=1e-13, atol=0)
    np.testing.assert_allclose(d.hess_y, np.swapaxes(d.hess_y, -1, -2), rtol=1e-13, atol=0)


def test_derivatives_need_order():
    with pytest.raises(NotAfterInitialTime):
        derivatives(fixtures.heat(), [0.0], 0.0, [0.0], 1.0)


def test_comparison_equality_when_nu_is_one(rng):
    spec = fixtures.kolmogorov()
    X = rng.normal(size=(50, 2))
    lo, hi = comparison_log_bounds(spec, X, 1.0, [0.0, 0.0], 0.0)
    lg = log_gamma(spec, X, 1.0, [0.0, 0.0], 0.0)
    np.testing.assert_allclose(lo, lg, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(hi, lg, rtol=1e-12, atol=1e-12)


def test_comparison_piecewise_strict():
    spec = fixtures.kolmogorov_piecewise()
    lo, hi = comparison_log_bounds(spec, [1.0, 1.0], 1.0, [0.0, 0.0], 0.0)
    lg = log_gamma(spec, [1.0, 1.0], 1.0, [0.0, 0.0], 0.0)
    assert lo < lg < hi


def test_comparison_tight_at_centre_for_constant_two():
    # a = 2, nu = 1/2: at x = 0 the lower bound is attained and the upper one is off by 2
    spec = OperatorSpec.build([[0.0]], [1], CoefficientTrack.constant([[2.0]]), nu=0.5)
    lo, hi = comparison_log_bounds(spec, [0.0], 1.0, [0.0], 0.0)
    lg = log_gamma(spec, [0.0], 1.0, [0.0], 0.0)
    assert lo == pytest.approx(lg, abs=1e-13)
    assert hi - lg == pytest.approx(np.log(2.0), rel=1e-12)
    lo, hi = comparison_log_bounds(spec, [3.0], 1.0, [0.0], 0.0)
    assert lo < log_gamma(spec, [3.0], 1.0, [0.0], 0.0) < hi


def test_spatial_decay_is_monotone():
    spec = fixtures.kolmogorov()
    logs = [log_gamma(spec, [r, 0.0], 1.0, [0.0, 0.0], 0.0) for r in (10.0, 20.0, 40.0)]
    assert logs[0] > logs[1] > logs[2]
    assert np.isfinite(logs[2])
    assert gamma(spec, [40.0, 0.0], 1.0, [0.0, 0.0], 0.0).value == 0.0


def test_continuity_near_pole():
    spec = fixtures.kolmogorov()
    base = log_gamma(spec, [0.5, -0.3], 1.0, [0.0, 0.0], 0.0)
    near = log_gamma(spec, [0.5 + 1e-9, -0.3], 1.0 + 1e-9, [0.0, 0.0], 0.0)
    assert abs(near - base) < 1e-6


def test_short_time_envelope_far_from_centre():
    spec = fixtures.heat()
    fitted = ShortTimeConstants(c=0.2, delta=0.5)
    for tau in (0.01, 0.1, 0.5):
        for x in (0.0, 1.0, 5.0, 30.0):
            ub = log_short_time_upper(spec, [x], tau, [0.0], 0.0, fitted)
            assert log_gamma(spec, [x], tau, [0.0], 0.0) <= ub


def test_short_time_envelope_horizon():
    with pytest.raises(HorizonExceeded):
        log_short_time_upper(fixtures.heat(), [0.0], 1.0, [0.0], 0.0, ShortTimeConstants(0.2, 0.5))


def test_vectorized_shapes(rng):
    spec = fixtures.chain3()
    X = rng.normal(size=(7, 3))
    assert np.shape(gamma(spec, X, 1.0, np.zeros(3), 0.0).value) == (7,)
    assert np.shape(gamma(spec, X[:, None, :], 1.0, X[None], 0.0).value) == (7, 7)
    assert np.isscalar(gamma(spec, X[0], 1.0, np.zeros(3), 0.0).value)
    d = derivatives(spec, X, 1.0, np.zeros(3), 0.0)
    assert d.hess_x.shape == (7, 3, 3) and d.grad_y.shape == (7, 3) and d.ds.shape == (7,)
    with pytest.raises(ValueError):
        gamma(spec, np.zeros((4, 2)), 1.0, np.zeros(3), 0.0)
