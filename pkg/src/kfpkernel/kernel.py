"""Evaluation of the fundamental solution and the objects built from it.

Everything is computed in the log domain and exponentiated last: the
quadratic form in the exponent easily reaches -1e5, so a zero value with
``log_value == -inf`` is a legitimate answer.

Points may be given as a single vector of length N or as an (M, N) array;
outputs follow the same leading shape.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .covariance import covariance, model_covariance, propagator
from .errors import HorizonExceeded, NotAfterInitialTime
from .operator import OperatorSpec

LOG_4PI = float(np.log(4 * np.pi))


@dataclass(frozen=True)
class KernelEval:
    value: np.ndarray | float
    log_value: np.ndarray | float
    point: tuple
    pole: tuple


@dataclass(frozen=True)
class DerivBundle:
    value: np.ndarray
    grad_x: np.ndarray
    hess_x: np.ndarray
    grad_y: np.ndarray
    hess_y: np.ndarray
    dt: np.ndarray
    ds: np.ndarray


def _points(x, N):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != N:
        raise ValueError(f"points must have trailing dimension {N}, got shape {x.shape}")
    return x


def _whitened_norm2(L, r):
    """``r^T (L L^T)^{-1} r`` through a triangular solve; better conditioned than forming the inverse."""
    flat = r.reshape(-1, r.shape[-1])
    w = solve_triangular(L, flat.T, lower=True)
    return np.sum(w * w, axis=0).reshape(r.shape[:-1])


def _wrap(logv, x, t, x0, t0):
    logv = np.asarray(logv, dtype=float)
    value = np.exp(logv)
    if logv.ndim == 0:
        return KernelEval(float(value), float(logv), (x, t), (x0, t0))
    return KernelEval(value, logv, (x, t), (x0, t0))


def log_gamma(spec: OperatorSpec, x, t: float, x0, t0: float) -> np.ndarray:
    x = _points(x, spec.N)
    x0 = _points(x0, spec.N)
    if not t > t0:
        return np.full(np.broadcast_shapes(x.shape[:-1], x0.shape[:-1]), -np.inf)[()]
    b = covariance(spec, t0, t)
    r = x - x0 @ b.E_fwd.T
    return (-0.5 * spec.N * LOG_4PI - 0.5 * b.log_det
            - 0.25 * _whitened_norm2(b.factor.lower_factor, r) - (t - t0) * spec.trace_B)


def gamma(spec: OperatorSpec, x, t: float, x0, t0: float) -> KernelEval:
    """Fundamental solution with pole ``(x0, t0)`` evaluated at ``(x, t)``; zero for t <= t0."""
    return _wrap(log_gamma(spec, x, t, x0, t0), x, t, x0, t0)


def log_gamma_model(alpha: float, spec: OperatorSpec, x, t: float, x0, t0: float) -> np.ndarray:
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    x = _points(x, spec.N)
    x0 = _points(x0, spec.N)
    if not t > t0:
        return np.full(np.broadcast_shapes(x.shape[:-1], x0.shape[:-1]), -np.inf)[()]
    tau = t - t0
    b = model_covariance(spec, tau)
    r = x - x0 @ b.E_fwd.T
    return (-0.5 * spec.N * (LOG_4PI + np.log(alpha)) - 0.5 * b.log_det
            - _whitened_norm2(b.factor.lower_factor, r) / (4 * alpha) - tau * spec.trace_B)


def gamma_model(alpha: float, spec: OperatorSpec, x, t: float, x0, t0: float) -> KernelEval:
    """Kernel of the model operator with constant diffusion ``alpha * I_q`` and the drift of ``spec``."""
    return _wrap(log_gamma_model(alpha, spec, x, t, x0, t0), x, t, x0, t0)


def derivatives(spec: OperatorSpec, x, t: float, y, s: float) -> DerivBundle:
    """Closed-form first and second derivatives in ``x`` and in the pole ``y``.

    ``dt`` comes from the equation itself, using the coefficient value
    active at ``t``; ``ds`` likewise from the transposed equation at ``s``.
    """
    if not t > s:
        raise NotAfterInitialTime(f"derivatives need t > s, got t = {t}, s = {s}")
    x = _points(x, spec.N)
    y = _points(y, spec.N)
    b = covariance(spec, s, t)
    G = np.exp(log_gamma(spec, x, t, y, s))
    Gc = G[..., None]
    Gm = G[..., None, None]

    rx = x - y @ b.E_fwd.T
    gx = rx @ b.C_inv
    grad_x = -0.5 * Gc * gx
    hess_x = Gm * (0.25 * gx[..., :, None] * gx[..., None, :] - 0.5 * b.C_inv)

    E_back = propagator(spec, s - t)
    ry = y - x @ E_back.T
    gy = ry @ b.C_prime
    grad_y = -0.5 * Gc * gy
    hess_y = Gm * (0.25 * gy[..., :, None] * gy[..., None, :] - 0.5 * b.C_prime)

    A_t = spec.A_at(t)
    A_s = spec.A_at(s)
    Bx = x @ spec.B.T
    By = y @ spec.B.T
    dt = np.einsum("ij,...ij->...", A_t, hess_x) + np.einsum("...j,...j->...", Bx, grad_x)
    ds = (-np.einsum("ij,...ij->...", A_s, hess_y) + np.einsum("...j,...j->...", By, grad_y)
          + G * spec.trace_B)
    return DerivBundle(value=G, grad_x=grad_x, hess_x=hess_x, grad_y=grad_y,
                       hess_y=hess_y, dt=dt, ds=ds)


def comparison_log_bounds(spec: OperatorSpec, x, t, x0, t0, nu: float | None = None):
    """Log of ``(nu^N Gamma_nu, nu^-N Gamma_{1/nu})``."""
    if not t > t0:
        raise NotAfterInitialTime(f"need t > t0, got t = {t}, t0 = {t0}")
    nu = spec.nu if nu is None else float(nu)
    lnu = np.log(nu)
    lower = spec.N * lnu + log_gamma_model(nu, spec, x, t, x0, t0)
    upper = -spec.N * lnu + log_gamma_model(1.0 / nu, spec, x, t, x0, t0)
    return lower, upper


def comparison_bounds(spec: OperatorSpec, x, t, x0, t0, nu: float | None = None):
    """Two-sided bounds ``(lower, upper)`` that sandwich ``gamma`` at the same point."""
    lower, upper = comparison_log_bounds(spec, x, t, x0, t0, nu)
    return np.exp(lower), np.exp(upper)


@dataclass(frozen=True)
class ShortTimeConstants:
    c: float
    delta: float


def log_short_time_upper(spec: OperatorSpec, x, t, x0, t0, fitted: ShortTimeConstants):
    tau = t - t0
    if not tau > 0:
        raise NotAfterInitialTime(f"need t > t0, got t = {t}, t0 = {t0}")
    if tau > fitted.delta:
        raise HorizonExceeded(tau, fitted.delta, fitted.delta)
    x = _points(x, spec.N)
    r = x - _points(x0, spec.N) @ propagator(spec, tau).T
    Q = spec.structure.Q
    return -np.log(fitted.c) - 0.5 * Q * np.log(tau) - fitted.c * np.sum(r * r, axis=-1) / tau


def short_time_upper(spec: OperatorSpec, x, t, x0, t0, fitted: ShortTimeConstants):
    """Short-time Gaussian envelope with empirically fitted constants (a diagnostic, not a theorem)."""
    return np.exp(log_short_time_upper(spec, x, t, x0, t0, fitted))

