"""Propagator, covariance matrices and the identities they satisfy.

``C(t, t0)`` is the integral over ``(t0, t)`` of ``E(t-s) A(s) E(t-s)^T``
with ``E(s) = exp(-s B)``.  Because ``A`` is piecewise constant the
integral is split at the coefficient breakpoints, and each piece is
integrated with Gauss-Legendre plus adaptive bisection.
"""
from __future__ import annotations

import threading
import weakref
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import (
    BreakpointTooClose,
    CovarianceFailure,
    NotAfterInitialTime,
    NotPositiveDefinite,
)
from .linalg import SpdFactor, mat_exp, mat_exp_many, spd_factor, symmetrize
from .operator import CoefficientTrack, OperatorSpec

GL_NODES = 16
REFINE_RTOL = 1e-12
MAX_BISECTIONS = 10
_CACHE_LIMIT = 200_000

_gl_x, _gl_w = leggauss(GL_NODES)


@dataclass(frozen=True, eq=False)
class CovarianceBundle:
    t0: float
    t: float
    C: np.ndarray
    factor: SpdFactor
    C_inv: np.ndarray
    E_fwd: np.ndarray
    C_prime: np.ndarray

    @property
    def log_det(self) -> float:
        return self.factor.log_det

    @property
    def det(self) -> float:
        return float(np.exp(self.factor.log_det))


def propagator(spec: OperatorSpec, s: float) -> np.ndarray:
    """``E(s) = exp(-s B)``."""
    return mat_exp(-np.asarray(spec.B), s)


# -- quadrature --------------------------------------------------------------

def _gl_panels(B: np.ndarray, A: np.ndarray, panels) -> list[np.ndarray]:
    """Gauss-Legendre integrals over several ``(a, b)`` panels of elapsed time, in one batch.

    The integration variable is the elapsed time u = t - sigma, so nodes
    carry no rounding from the absolute size of t.
    """
    panels = np.asarray(panels, dtype=float)
    half = 0.5 * (panels[:, 1] - panels[:, 0])
    u = (0.5 * (panels[:, 0] + panels[:, 1]))[:, None] + half[:, None] * _gl_x[None]
    E = mat_exp_many(-B, u.reshape(-1))
    with np.errstate(over="ignore", invalid="ignore"):
        vals = (E @ A @ np.swapaxes(E, 1, 2)).reshape(len(panels), GL_NODES, *A.shape)
    if not np.all(np.isfinite(vals)):
        raise CovarianceFailure("covariance integrand overflows double precision")
    return list(half[:, None, None] * np.tensordot(_gl_w, vals, axes=(0, 1)))


def _converged(coarse: np.ndarray, fine: np.ndarray) -> bool:
    d = np.sqrt(np.abs(np.diag(fine)))
    floor = 1e-15 * np.outer(d, d)
    return bool(np.all(np.abs(fine - coarse) <= REFINE_RTOL * np.abs(fine) + floor))


def _integrate_piece(B, A, a, b, depth=0, whole=None):
    mid = 0.5 * (a + b)
    if whole is None:
        whole, left, right = _gl_panels(B, A, [(a, b), (a, mid), (mid, b)])
    else:
        left, right = _gl_panels(B, A, [(a, mid), (mid, b)])
    halves = left + right
    if depth >= MAX_BISECTIONS or _converged(whole, halves):
        return halves
    return (_integrate_piece(B, A, a, mid, depth + 1, left)
            + _integrate_piece(B, A, mid, b, depth + 1, right))


def integrate_covariance(B: np.ndarray, q: int, track: CoefficientTrack,
                         t0: float, t: float) -> np.ndarray:
    """Quadrature of the covariance integral for an arbitrary coefficient track."""
    if not t > t0:
        raise NotAfterInitialTime(f"need t > t0, got t = {t!r}, t0 = {t0!r}")
    B = np.asarray(B, dtype=float)
    N = B.shape[0]
    # sub-intervals short enough that exp(-uB) varies by a bounded factor
    bnorm = float(np.abs(B).sum(axis=0).max()) if B.size else 0.0
    # elapsed-time edges, running from 0 (sigma = t) to t - t0 (sigma = t0)
    edges = [0.0, *(t - bp for bp in reversed(track.interior_breakpoints(t0, t))), t - t0]
    total = np.zeros((N, N))
    for a, b in zip(edges[:-1], edges[1:]):
        A = np.zeros((N, N))
        A[:q, :q] = track.pieces[track.piece_index(t - 0.5 * (a + b))]
        n_sub = max(1, int(np.ceil((b - a) * bnorm / 2.0)))
        grid = np.linspace(a, b, n_sub + 1)
        for lo, hi in zip(grid[:-1], grid[1:]):
            total += _integrate_piece(B, A, lo, hi)
    return symmetrize(total)


def _make_bundle(spec: OperatorSpec, C: np.ndarray, t0: float, t: float) -> CovarianceBundle:
    try:
        factor = spd_factor(C)
    except NotPositiveDefinite as exc:
        raise CovarianceFailure(
            f"C({t}, {t0}) is not positive definite ({exc}); check the Kalman rank condition"
        ) from None
    C_inv = factor.inverse()
    E = propagator(spec, t - t0)
    C_prime = symmetrize(E.T @ C_inv @ E)
    for arr in (C, C_inv, E, C_prime):
        arr.setflags(write=False)
    return CovarianceBundle(t0=t0, t=t, C=C, factor=factor, C_inv=C_inv, E_fwd=E, C_prime=C_prime)


class _Cache:
    def __init__(self):
        self.lock = threading.Lock()
        self.full: dict[tuple[float, float], CovarianceBundle] = {}
        self.model: dict[float, CovarianceBundle] = {}

    def get(self, table, key, build):
        with self.lock:
            hit = table.get(key)
        if hit is not None:
            return hit
        value = build()
        with self.lock:
            if len(table) >= _CACHE_LIMIT:
                table.clear()
            return table.setdefault(key, value)


_caches: "weakref.WeakKeyDictionary[OperatorSpec, _Cache]" = weakref.WeakKeyDictionary()
_caches_lock = threading.Lock()


def _cache_for(spec: OperatorSpec) -> _Cache:
    with _caches_lock:
        cache = _caches.get(spec)
        if cache is None:
            cache = _caches[spec] = _Cache()
        return cache


def covariance(spec: OperatorSpec, t0: float, t: float) -> CovarianceBundle:
    """Covariance bundle for ``C(t, t0)``, memoized on the exact pair of times."""
    t0, t = float(t0), float(t)
    if not t > t0:
        raise NotAfterInitialTime(f"need t > t0, got t = {t!r}, t0 = {t0!r}")

    def build():
        C = integrate_covariance(spec.B, spec.q, spec.track, t0, t)
        return _make_bundle(spec, C, t0, t)

    return _cache_for(spec).get(_cache_for(spec).full, (t0, t), build)


def model_covariance(spec: OperatorSpec, t: float) -> CovarianceBundle:
    """``C0(t)``: the covariance over ``(0, t)`` with ``A0`` replaced by the identity."""
    t = float(t)
    if not t > 0:
        raise NotAfterInitialTime(f"need t > 0, got {t!r}")

    def build():
        unit = CoefficientTrack.constant(np.eye(spec.q))
        C = integrate_covariance(spec.B, spec.q, unit, 0.0, t)
        return _make_bundle(spec, C, 0.0, t)

    cache = _cache_for(spec)
    return cache.get(cache.model, t, build)


# -- matrix ordering ---------------------------------------------------------

@dataclass
class OrderingReport:
    """Worst sampled margins; non-negative margins mean the ordering holds."""

    hypothesis_margin: float
    inverse_margin: float
    det_margin: float
    samples: int

    @property
    def hypothesis_holds(self) -> bool:
        return self.hypothesis_margin >= 0

    @property
    def conclusion_holds(self) -> bool:
        return self.inverse_margin >= 0 and self.det_margin >= 0

    @property
    def violations(self) -> list[str]:
        out = []
        if self.hypothesis_holds and self.inverse_margin < 0:
            out.append("inverse ordering")
        if self.hypothesis_holds and self.det_margin < 0:
            out.append("determinant ordering")
        return out


def ordering_check(C1, C2, samples: int = 1000, rng=None, rtol: float = 1e-12) -> OrderingReport:
    """Sample unit vectors and measure the orderings ``C1 <= C2``,
    ``C2^{-1} <= C1^{-1}`` and ``det C1 <= det C2``.

    Margins are normalised by the size of the larger quadratic form and
    shifted by ``rtol`` so rounding at the level of equality counts as a pass.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    C1 = symmetrize(np.asarray(C1, dtype=float))
    C2 = symmetrize(np.asarray(C2, dtype=float))
    f1, f2 = spd_factor(C1), spd_factor(C2)
    xi = rng.standard_normal((samples, C1.shape[0]))
    xi /= np.linalg.norm(xi, axis=1, keepdims=True)
    q1 = np.einsum("ki,ij,kj->k", xi, C1, xi)
    q2 = np.einsum("ki,ij,kj->k", xi, C2, xi)
    i1 = np.einsum("ki,ik->k", xi, f1.solve(xi.T))
    i2 = np.einsum("ki,ik->k", xi, f2.solve(xi.T))
    hyp = np.min((q2 - q1) / np.maximum(q1, q2)) + rtol
    inv = np.min((i1 - i2) / np.maximum(i1, i2)) + rtol
    det = f2.log_det - f1.log_det + rtol * max(1.0, abs(f1.log_det))
    return OrderingReport(float(hyp), float(inv), float(det), samples)


# -- trace identities ----------------------------------------------------------

def fd_step(t: float) -> float:
    return 1e-6 * max(1.0, abs(t))


def _check_window(spec: OperatorSpec, t: float, h: float):
    if spec.track.distance_to_breakpoint(t) < 10 * h:
        raise BreakpointTooClose(f"time {t} lies within {10 * h:g} of a coefficient breakpoint")


def trace_identity_residual(spec: OperatorSpec, t0: float, t: float) -> float:
    """Residual of d/dt log det C(t,t0) / 2 = Tr(A(t) C^{-1}) / 2 - Tr B."""
    h = fd_step(t)
    _check_window(spec, t, h)
    if t - h <= t0:
        raise NotAfterInitialTime("t is too close to t0 for a central difference")
    lhs = (covariance(spec, t0, t + h).log_det - covariance(spec, t0, t - h).log_det) / (2 * h) / 2
    b = covariance(spec, t0, t)
    rhs = 0.5 * np.trace(spec.A_at(t) @ b.C_inv) - spec.trace_B
    return float(abs(lhs - rhs))


def adjoint_trace_identity_residual(spec: OperatorSpec, s: float, t: float) -> float:
    """Residual of d/ds log det C(t,s) / 2 = -Tr(A(s) C'(t,s)) / 2."""
    h = fd_step(s)
    _check_window(spec, s, h)
    if s + h >= t:
        raise NotAfterInitialTime("s is too close to t for a central difference")
    lhs = (covariance(spec, s + h, t).log_det - covariance(spec, s - h, t).log_det) / (2 * h) / 2
    b = covariance(spec, s, t)
    rhs = -0.5 * np.trace(spec.A_at(s) @ b.C_prime)
    return float(abs(lhs - rhs))
