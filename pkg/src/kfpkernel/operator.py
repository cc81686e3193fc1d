"""Problem model for KFP operators.

An operator is described by its drift matrix ``B`` (which must have the
block-subdiagonal form with full-rank blocks ``B_j``), a piecewise-constant
diffusion track ``A0(t)`` acting on the first ``q`` variables, and an
ellipticity constant ``nu``.
"""
from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (
    BadBlockShape,
    NonPositivePiece,
    NonZeroForbiddenBlock,
    RankDeficientBlock,
    ValidationError,
)
from .linalg import DEFAULT_RANK_TOL, as_square, rank_with_tolerance

FORBIDDEN_BLOCK_TOL = 1e-14


@dataclass(frozen=True)
class BlockStructure:
    m: tuple[int, ...]
    sigma: tuple[int, ...]

    @property
    def kappa(self) -> int:
        return len(self.m) - 1

    @property
    def N(self) -> int:
        return sum(self.m)

    @property
    def Q(self) -> int:
        return sum(self.sigma)

    @classmethod
    def from_blocks(cls, m: Sequence[int]) -> "BlockStructure":
        m = tuple(int(v) for v in m)
        if not m or any(v < 1 for v in m):
            raise BadBlockShape(f"block sizes must be positive integers, got {list(m)}")
        if any(a < b for a, b in zip(m, m[1:])):
            raise BadBlockShape(f"block sizes must be nonincreasing, got {list(m)}")
        sigma = tuple(2 * j + 1 for j, mj in enumerate(m) for _ in range(mj))
        return cls(m=m, sigma=sigma)


@dataclass(frozen=True, eq=False)
class CoefficientTrack:
    """Piecewise-constant symmetric q x q coefficient matrix A0(t).

    ``pieces[i]`` is active on ``[breakpoints[i], breakpoints[i+1])``; the
    first piece is extended to the left and the last one to the right.
    """

    breakpoints: np.ndarray
    pieces: np.ndarray  # shape (k, q, q)

    def __post_init__(self):
        bp = np.asarray(self.breakpoints, dtype=float).reshape(-1)
        pieces = np.asarray(self.pieces, dtype=float)
        if pieces.ndim == 2:
            pieces = pieces[None]
        if pieces.ndim != 3 or pieces.shape[1] != pieces.shape[2]:
            raise ValidationError(f"pieces must be a stack of square matrices, got {pieces.shape}")
        if len(bp) != len(pieces):
            raise ValidationError(
                f"need one breakpoint per piece ({len(pieces)} pieces, {len(bp)} breakpoints)"
            )
        if np.any(np.diff(bp) <= 0):
            raise ValidationError("breakpoints must be strictly increasing")
        if not np.all(np.isfinite(pieces)) or not np.all(np.isfinite(bp)):
            raise ValidationError("coefficient track contains non-finite values")
        asym = np.abs(pieces - np.swapaxes(pieces, 1, 2)).max()
        if asym > 1e-12 * max(1.0, np.abs(pieces).max()):
            raise ValidationError("coefficient pieces must be symmetric")
        pieces = 0.5 * (pieces + np.swapaxes(pieces, 1, 2))
        bp.setflags(write=False)
        pieces.setflags(write=False)
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "pieces", pieces)

    @classmethod
    def constant(cls, A0) -> "CoefficientTrack":
        A0 = np.atleast_2d(np.asarray(A0, dtype=float))
        return cls(breakpoints=np.array([0.0]), pieces=A0[None])

    @property
    def q(self) -> int:
        return self.pieces.shape[1]

    def piece_index(self, t: float) -> int:
        return max(bisect.bisect_right(self.breakpoints.tolist(), float(t)) - 1, 0)

    def interior_breakpoints(self, t0: float, t: float) -> list[float]:
        """Breakpoints strictly inside (t0, t) where the active piece changes."""
        return [float(b) for b in self.breakpoints[1:] if t0 < b < t]

    def distance_to_breakpoint(self, t: float) -> float:
        if len(self.breakpoints) < 2:
            return np.inf
        return float(np.min(np.abs(self.breakpoints[1:] - t)))


def coefficient_at(track: CoefficientTrack, t: float) -> np.ndarray:
    """Right-continuous lookup of A0(t)."""
    return track.pieces[track.piece_index(t)]


def nu_of(track: CoefficientTrack) -> float:
    """Largest nu <= 1 with nu <= lambda_min and lambda_max <= 1/nu on every piece."""
    eig = np.linalg.eigvalsh(track.pieces)
    lo, hi = float(eig.min()), float(eig.max())
    if lo <= 0:
        raise NonPositivePiece(f"coefficient piece has eigenvalue {lo:.3g} <= 0")
    return min(1.0, lo, 1.0 / hi)


def validate_structure(B, m: Sequence[int]) -> BlockStructure:
    """Check that ``B`` has the block pattern required for hypoellipticity.

    Blocks below the first block-subdiagonal must vanish and each
    subdiagonal block ``B_j`` (size m_j x m_{j-1}) must have rank m_j.
    """
    B = as_square(B)
    structure = BlockStructure.from_blocks(m)
    if structure.N != B.shape[0]:
        raise BadBlockShape(f"block sizes sum to {structure.N} but B is {B.shape[0]}x{B.shape[0]}")
    offsets = np.concatenate([[0], np.cumsum(structure.m)])

    def block(i, j):
        return B[offsets[i]:offsets[i + 1], offsets[j]:offsets[j + 1]]

    k = structure.kappa
    for i in range(k + 1):
        for j in range(i - 1):
            blk = block(i, j)
            if blk.size and np.abs(blk).max() > FORBIDDEN_BLOCK_TOL:
                raise NonZeroForbiddenBlock(i, j, float(np.abs(blk).max()))
    for j in range(1, k + 1):
        r = rank_with_tolerance(block(j, j - 1), DEFAULT_RANK_TOL)
        if r != structure.m[j]:
            raise RankDeficientBlock(j, r, structure.m[j])
    return structure


def controllability_matrix(B, q: int) -> np.ndarray:
    B = as_square(B)
    n = B.shape[0]
    cols = [np.eye(n)[:, :q]]
    for _ in range(n - 1):
        cols.append(B @ cols[-1])
    return np.hstack(cols)


def kalman_hypoelliptic(B, q: int) -> bool:
    """Kalman rank test: rank [J, BJ, ..., B^{N-1} J] == N with J = first q columns of I."""
    B = as_square(B)
    return rank_with_tolerance(controllability_matrix(B, q)) == B.shape[0]


@dataclass(frozen=True, eq=False)
class OperatorSpec:
    """Full KFP problem: drift ``B``, block sizes, coefficient track and ``nu``.

    Build it with :meth:`build`, which validates everything.  Instances are
    immutable and compared by identity (the covariance cache keys on them).
    """

    B: np.ndarray
    structure: BlockStructure
    track: CoefficientTrack
    nu: float
    name: str = field(default="")

    @property
    def N(self) -> int:
        return self.B.shape[0]

    @property
    def q(self) -> int:
        return self.structure.m[0]

    @property
    def trace_B(self) -> float:
        return float(np.trace(self.B))

    @classmethod
    def build(cls, B, m: Sequence[int], track: CoefficientTrack, nu: float | None = None,
              name: str = "") -> "OperatorSpec":
        B = np.array(as_square(B), dtype=float)
        structure = validate_structure(B, m)
        if track.q != structure.m[0]:
            raise ValidationError(
                f"coefficient pieces are {track.q}x{track.q} but q = m0 = {structure.m[0]}"
            )
        computed = nu_of(track)
        if nu is None:
            nu = computed
        else:
            nu = float(nu)
            if not 0 < nu <= 1:
                raise ValidationError(f"nu must lie in (0, 1], got {nu}")
            if nu > computed * (1 + 1e-12):
                raise ValidationError(
                    f"declared nu = {nu} violates the ellipticity bounds (largest admissible {computed})"
                )
        B.setflags(write=False)
        return cls(B=B, structure=structure, track=track, nu=nu, name=name)

    def embed(self, A0: np.ndarray) -> np.ndarray:
        """N x N matrix with ``A0`` in the top-left q x q block."""
        A = np.zeros((self.N, self.N))
        A[: self.q, : self.q] = A0
        return A

    def A_at(self, t: float) -> np.ndarray:
        return self.embed(coefficient_at(self.track, t))

    def with_track(self, track: CoefficientTrack, nu: float | None = None) -> "OperatorSpec":
        return OperatorSpec.build(self.B, self.structure.m, track, nu=nu, name=self.name)
