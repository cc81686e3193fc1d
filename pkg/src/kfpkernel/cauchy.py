"""Cauchy problem ``L u = 0`` for ``t > t0``, ``u(., t0) = f``.

The solution is the integral of ``Gamma(x, t; y, t0) f(y)`` over ``y``.
For callable data the substitution ``y = E(t0 - t)(x - 2 C^{1/2} z)`` turns
it into an integral against ``exp(-|z|^2)``, which tensor Gauss-Hermite
handles well (up to three dimensions).  Grid-sampled data are integrated
directly against the kernel with trapezoid weights.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np
from numpy.polynomial.hermite import hermgauss
from numpy.polynomial.legendre import leggauss

from .covariance import covariance, propagator
from .errors import HorizonExceeded, NonFiniteDatum, NoPositiveHorizon, UnsupportedDimension
from .kernel import log_gamma
from .linalg import spd_sqrt
from .operator import OperatorSpec

MAX_HERMITE_DIM = 3


# -- data ----------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class GridSampled:
    """Samples on a uniform tensor grid over ``box`` (shape (N, 2)); zero outside."""

    box: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        box = np.asarray(self.box, dtype=float).reshape(-1, 2)
        values = np.asarray(self.values, dtype=float)
        if values.ndim != len(box):
            raise ValueError(f"values must be {len(box)}-dimensional, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("grid samples must be finite")
        if np.any(box[:, 1] <= box[:, 0]) or min(values.shape) < 2:
            raise ValueError("grid box must be non-degenerate with at least 2 samples per axis")
        object.__setattr__(self, "box", box)
        object.__setattr__(self, "values", values)

    @property
    def dim(self) -> int:
        return len(self.box)

    def axes(self) -> list[np.ndarray]:
        return [np.linspace(lo, hi, n) for (lo, hi), n in zip(self.box, self.values.shape)]

    def points(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=-1)

    def weights(self) -> np.ndarray:
        """Trapezoid weights, flattened in the same order as :meth:`points`."""
        per_axis = []
        for (lo, hi), n in zip(self.box, self.values.shape):
            w = np.full(n, (hi - lo) / (n - 1))
            w[[0, -1]] *= 0.5
            per_axis.append(w)
        out = per_axis[0]
        for w in per_axis[1:]:
            out = np.multiply.outer(out, w)
        return out.reshape(-1)

    def __call__(self, X) -> np.ndarray:
        """Multilinear interpolation of the samples, zero outside the box."""
        from scipy.interpolate import RegularGridInterpolator

        interp = RegularGridInterpolator(self.axes(), self.values, bounds_error=False, fill_value=0.0)
        X = np.asarray(X, dtype=float)
        return interp(X.reshape(-1, self.dim)).reshape(X.shape[:-1])


@dataclass(frozen=True, eq=False)
class BoundedCallable:
    func: Callable[[np.ndarray], np.ndarray]
    sup_bound: float = np.inf

    def __call__(self, X):
        return np.asarray(self.func(X), dtype=float)


@dataclass(frozen=True, eq=False)
class GaussianGrowth:
    """Continuous datum with a finite ``exp(-alpha |x|^2)``-weighted integral (trusted, not checked)."""

    func: Callable[[np.ndarray], np.ndarray]
    alpha: float
    weighted_bound: float = np.inf

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")

    def __call__(self, X):
        return np.asarray(self.func(X), dtype=float)


CauchyDatum = GridSampled | BoundedCallable | GaussianGrowth


@dataclass(frozen=True)
class SolveConfig:
    hermite_order: int = 40
    horizon_safety: float = 0.5
    horizon_cap: float = 1e3

    def __post_init__(self):
        if self.hermite_order < 8:
            raise ValueError("hermite_order must be at least 8")
        if not 0 < self.horizon_safety < 1:
            raise ValueError("horizon_safety must lie in (0, 1)")


@lru_cache(maxsize=32)
def hermite_grid(order: int, dim: int) -> tuple[np.ndarray, np.ndarray]:
    """Tensor Gauss-Hermite nodes (K, dim) and weights (K,) for the weight exp(-|z|^2)."""
    if dim > MAX_HERMITE_DIM:
        raise UnsupportedDimension(
            f"tensor Gauss-Hermite is limited to N <= {MAX_HERMITE_DIM}, got N = {dim}"
        )
    z, w = hermgauss(order)
    nodes = np.array(list(itertools.product(z, repeat=dim)))
    weights = np.prod(np.array(list(itertools.product(w, repeat=dim))), axis=1)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


# -- horizon ----------------------------------------------------------------

@dataclass(frozen=True)
class Horizon:
    raw: float
    usable: float


def _integrable(spec, alpha, t0, tau):
    b = covariance(spec, t0, t0 + tau)
    return 0.25 * np.linalg.eigvalsh(b.C_prime)[0] > alpha


def horizon(spec: OperatorSpec, alpha: float, t0: float = 0.0,
            cfg: SolveConfig = SolveConfig(), rtol: float = 1e-9) -> Horizon:
    """Largest ``T`` with ``lambda_min(C'(t0 + tau, t0)) / 4 > alpha`` for all ``tau`` in (0, T].

    The kernel times ``exp(alpha |y|^2)`` is integrable in ``y`` exactly
    when that inequality holds.  The scan is log-spaced up to
    ``cfg.horizon_cap``; the first failure is refined by bisection.
    """
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    taus = np.geomspace(1e-8, cfg.horizon_cap, 221)
    ok_prev = None
    for tau in taus:
        if _integrable(spec, alpha, t0, tau):
            ok_prev = tau
            continue
        if ok_prev is None:
            raise NoPositiveHorizon(f"integrability fails already at t - t0 = {tau:g}")
        lo, hi = ok_prev, tau
        while hi - lo > rtol * hi:
            mid = 0.5 * (lo + hi)
            if _integrable(spec, alpha, t0, mid):
                lo = mid
            else:
                hi = mid
        raw = float(0.5 * (lo + hi))
        return Horizon(raw=raw, usable=cfg.horizon_safety * raw)
    return Horizon(raw=cfg.horizon_cap, usable=cfg.horizon_safety * cfg.horizon_cap)


# -- solving ----------------------------------------------------------------

def _hermite_solve(spec, f, t0, X, t, order):
    b = covariance(spec, t0, t)
    R = spd_sqrt(b.C)
    E_back = propagator(spec, t0 - t)
    nodes, weights = hermite_grid(order, spec.N)
    shifts = 2.0 * nodes @ R.T  # (K, N)
    out = np.empty(len(X))
    chunk = max(1, 2_000_000 // len(nodes))
    for i in range(0, len(X), chunk):
        Xc = X[i:i + chunk]
        Y = (Xc[:, None, :] - shifts[None]) @ E_back.T
        fv = f(Y.reshape(-1, spec.N)).reshape(len(Xc), len(nodes))
        if not np.all(np.isfinite(fv)):
            raise NonFiniteDatum("initial datum is not finite at some quadrature node")
        out[i:i + chunk] = fv @ weights
    return out / np.pi ** (spec.N / 2)


def _grid_solve(spec, f: GridSampled, t0, X, t):
    Y = f.points()
    fw = f.values.reshape(-1) * f.weights()
    keep = fw != 0
    Y, fw = Y[keep], fw[keep]
    out = np.empty(len(X))
    chunk = max(1, 4_000_000 // max(len(Y), 1))
    for i in range(0, len(X), chunk):
        G = np.exp(log_gamma(spec, X[i:i + chunk, None, :], t, Y[None], t0))
        out[i:i + chunk] = G @ fw
    return out


def solve_at(spec: OperatorSpec, f: CauchyDatum, t0: float, x, t: float,
             cfg: SolveConfig = SolveConfig()):
    """Evaluate the solution of the Cauchy problem at ``(x, t)``; ``x`` may be (M, N)."""
    if not t > t0:
        raise ValueError(f"need t > t0, got t = {t}, t0 = {t0}")
    x = np.asarray(x, dtype=float)
    X = x.reshape(-1, spec.N)
    if isinstance(f, GaussianGrowth):
        h = horizon(spec, f.alpha, t0, cfg)
        if t - t0 >= h.usable:
            raise HorizonExceeded(t - t0, h.usable, h.raw)
    if isinstance(f, GridSampled):
        if f.dim != spec.N:
            raise ValueError(f"datum is {f.dim}-dimensional, operator has N = {spec.N}")
        out = _grid_solve(spec, f, t0, X, t)
    else:
        out = _hermite_solve(spec, f, t0, X, t, cfg.hermite_order)
    return out.reshape(x.shape[:-1])[()]


def reproduction_residual(spec: OperatorSpec, x, t: float, y, s: float, tau: float,
                          cfg: SolveConfig = SolveConfig()) -> float:
    """Relative gap between ``Gamma(x,t;y,s)`` and its composition through time ``tau``.

    The integrand in the intermediate point z is a product of two Gaussian
    factors, so Gauss-Hermite nodes are placed on that product: centre at
    its mode, scale by its precision.  Both factors are still evaluated
    through :func:`log_gamma`; the node placement only decides where to look.
    """
    if not s < tau < t:
        raise ValueError("need s < tau < t")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    lhs = log_gamma(spec, x, t, y, s)
    first = covariance(spec, s, tau)
    second = covariance(spec, tau, t)
    P = first.C_inv + second.C_prime
    rhs_lin = first.C_inv @ (first.E_fwd @ y) + second.E_fwd.T @ (second.C_inv @ x)
    mode = np.linalg.solve(P, rhs_lin)
    S = spd_sqrt(np.linalg.inv(P))
    nodes, weights = hermite_grid(cfg.hermite_order, spec.N)
    Z = mode + 2.0 * nodes @ S.T
    logf = log_gamma(spec, x, t, Z, tau) + log_gamma(spec, Z, tau, y, s)
    log_jac = spec.N * np.log(2.0) + np.linalg.slogdet(S)[1]
    terms = logf + np.sum(nodes * nodes, axis=1) + log_jac - lhs
    rhs_over_lhs = float(weights @ np.exp(terms))
    return abs(rhs_over_lhs - 1.0)


# -- initial trace -----------------------------------------------------------

@dataclass
class TraceReport:
    mode: str
    taus: list[float]
    discrepancies: list[float]
    p: Optional[float] = None

    @property
    def monotone(self) -> bool:
        d = np.asarray(self.discrepancies)
        return bool(np.all(np.diff(d) <= 1e-12 + 1e-9 * np.abs(d[:-1])))

    @property
    def final(self) -> float:
        return self.discrepancies[-1]


def initial_trace_report(spec: OperatorSpec, f: CauchyDatum, t0: float, mode: str,
                         schedule: Optional[Sequence[float]] = None, *, p: float = 1.0,
                         x0=None, grid: Optional[GridSampled] = None, span: float = 1.0,
                         cfg: SolveConfig = SolveConfig()) -> TraceReport:
    """Track how ``u(., t0 + tau)`` approaches the datum as ``tau`` decreases.

    ``mode`` is ``"Lp"`` (grid L^p norm), ``"uniform"`` (sup over the grid) or
    ``"pointwise"`` (|u(x, t) - f(x0)| along a parabolic approach to ``x0``).
    The grid is the datum's own for :class:`GridSampled` data, otherwise
    ``grid`` supplies the evaluation points; only grid-sup can be reported
    in uniform mode.
    """
    taus = [span * 10.0 ** (-k) for k in range(1, 6)] if schedule is None else list(schedule)
    out = []
    if mode == "pointwise":
        if x0 is None:
            raise ValueError("pointwise mode needs x0")
        x0 = np.asarray(x0, dtype=float)
        target = float(np.asarray(f(x0[None]))[0])
        direction = np.ones(spec.N) / np.sqrt(spec.N)
        for tau in taus:
            x = x0 + np.sqrt(tau) * direction
            out.append(abs(float(solve_at(spec, f, t0, x, t0 + tau, cfg)) - target))
        return TraceReport(mode, taus, out)
    if mode not in ("Lp", "uniform"):
        raise ValueError(f"unknown mode {mode!r}")
    ref = f if isinstance(f, GridSampled) else grid
    if ref is None:
        raise ValueError("callable data need an evaluation grid in Lp/uniform mode")
    X = ref.points()
    fX = ref.values.reshape(-1) if ref is f else f(X)
    w = ref.weights()
    for tau in taus:
        d = np.abs(solve_at(spec, f, t0, X, t0 + tau, cfg) - fX)
        out.append(float(np.sum(w * d ** p) ** (1 / p)) if mode == "Lp" else float(d.max()))
    return TraceReport(mode, taus, out, p if mode == "Lp" else None)


def growth_class_certificate(spec: OperatorSpec, f: CauchyDatum, t0: float, T: float,
                             Cgrowth: float, cfg: SolveConfig = SolveConfig(), *,
                             n_space: int = 41, n_time: int = 8,
                             half_width: Optional[float] = None) -> float:
    """Finite estimate of the space-time integral of ``|u| exp(-Cgrowth |x|^2)`` over (t0, T).

    A sanity certificate on a truncated box, not a proof.  The default
    half-width puts the Gaussian weight below 1e-12 at the box edge.
    """
    if isinstance(f, GaussianGrowth):
        h = horizon(spec, f.alpha, t0, cfg)
        if T - t0 > h.usable:
            raise HorizonExceeded(T - t0, h.usable, h.raw)
    R = np.sqrt(np.log(1e12) / Cgrowth) if half_width is None else float(half_width)
    zs, ws = leggauss(n_space)
    zt, wt = leggauss(n_time)
    xs = R * zs
    mesh = np.meshgrid(*([xs] * spec.N), indexing="ij")
    X = np.stack([m.reshape(-1) for m in mesh], axis=-1)
    wx = ws * R
    W = wx
    for _ in range(spec.N - 1):
        W = np.multiply.outer(W, wx)
    W = W.reshape(-1) * np.exp(-Cgrowth * np.sum(X * X, axis=1))
    half = 0.5 * (T - t0)
    total = 0.0
    for z, w in zip(zt, wt):
        u = solve_at(spec, f, t0, X, t0 + half * (z + 1), cfg)
        total += half * w * float(np.abs(u) @ W)
    return total
