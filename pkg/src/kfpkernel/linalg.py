"""Small dense linear-algebra kernel.

Matrices here are tiny (N rarely exceeds 10) so every routine favours
robustness over speed.  All functions are pure and accept plain numpy arrays.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import MatrixExpOverflow, NotPositiveDefinite

DEFAULT_RANK_TOL = 1e-10


def as_square(M) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix has non-finite entries")
    return M


def symmetrize(S: np.ndarray) -> np.ndarray:
    return 0.5 * (S + np.swapaxes(S, -1, -2))


def mat_exp(M, s: float = 1.0) -> np.ndarray:
    """Return ``exp(s * M)``.

    Accepts a single matrix, or a stack of matrices with shape (k, n, n)
    when ``s`` is a scalar.  Scaling-and-squaring with a Padé core
    (scipy's implementation) does the work.
    """
    M = np.asarray(M, dtype=float)
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix has non-finite entries")
    with np.errstate(over="ignore", invalid="ignore"):
        out = scipy.linalg.expm(s * M)
    if not np.all(np.isfinite(out)):
        raise MatrixExpOverflow(
            f"exp(s*M) overflows double precision (||s*M||_1 = {np.abs(s * M).sum(axis=-2).max():.3g})"
        )
    return out


_TAYLOR_DEGREE = 18


def mat_exp_many(M, s_values) -> np.ndarray:
    """``exp(s_k * M)`` for every ``s_k`` in ``s_values``; shape (k, n, n).

    The quadrature calls this with dozens of tiny matrices at a time, where
    per-call overhead dominates, so the whole stack goes through one
    vectorized Taylor polynomial with a common scaling-and-squaring depth
    (truncation below 1e-19 once the scaled norm is at most 1/2).
    """
    M = as_square(M)
    s_values = np.asarray(s_values, dtype=float).reshape(-1)
    if not np.all(np.isfinite(M)) or not np.all(np.isfinite(s_values)):
        raise ValueError("matrix or scale has non-finite entries")
    n = M.shape[0]
    X = s_values[:, None, None] * M[None, :, :]
    norm = float(np.abs(X).sum(axis=-2).max()) if X.size else 0.0
    if norm > 700.0:
        raise MatrixExpOverflow(f"exp(s*M) overflows double precision (||s*M||_1 = {norm:.3g})")
    squarings = max(0, int(np.ceil(np.log2(norm / 0.5)))) if norm > 0.5 else 0
    X = X / 2.0 ** squarings
    eye = np.eye(n)
    out = np.broadcast_to(eye, X.shape).copy()
    for k in range(_TAYLOR_DEGREE, 0, -1):
        out = eye + (X @ out) / k
    for _ in range(squarings):
        out = out @ out
    if not np.all(np.isfinite(out)):
        raise MatrixExpOverflow("exp(s*M) overflows double precision")
    return out


@dataclass(frozen=True, eq=False)
class SpdFactor:
    """Cholesky factor of a symmetric positive definite matrix."""

    lower_factor: np.ndarray
    log_det: float

    @property
    def n(self) -> int:
        return self.lower_factor.shape[0]

    def solve(self, b: np.ndarray) -> np.ndarray:
        return scipy.linalg.cho_solve((self.lower_factor, True), b)

    def inverse(self) -> np.ndarray:
        return symmetrize(self.solve(np.eye(self.n)))


def spd_factor(S) -> SpdFactor:
    """Cholesky-factor ``S`` after symmetrizing it.

    Raises NotPositiveDefinite if the factorization breaks down.
    """
    S = symmetrize(as_square(S))
    try:
        L = np.linalg.cholesky(S)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(f"matrix is not positive definite: {exc}") from None
    d = np.diag(L)
    if not np.all(d > 0) or not np.all(np.isfinite(L)):
        raise NotPositiveDefinite("Cholesky factor has a non-positive diagonal")
    return SpdFactor(lower_factor=L, log_det=float(2.0 * np.sum(np.log(d))))


def spd_sqrt(S) -> np.ndarray:
    """Symmetric positive square root via an eigendecomposition."""
    S = symmetrize(as_square(S))
    w, V = np.linalg.eigh(S)
    if w[0] <= 0:
        raise NotPositiveDefinite(f"smallest eigenvalue {w[0]:.3g} is not positive")
    return symmetrize((V * np.sqrt(w)) @ V.T)


def rank_with_tolerance(M, tol_rel: float = DEFAULT_RANK_TOL) -> int:
    """Numerical rank: singular values above ``tol_rel`` times the largest."""
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        return 0
    sv = np.linalg.svd(M, compute_uv=False)
    if sv[0] == 0:
        return 0
    return int(np.sum(sv > tol_rel * sv[0]))
