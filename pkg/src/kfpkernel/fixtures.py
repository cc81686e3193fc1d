"""Reference operators used by the test-suite, the verification engine and the CLI."""
from __future__ import annotations

import numpy as np

from .operator import CoefficientTrack, OperatorSpec

# breakpoints of the alternating piecewise coefficient a(t) in {2, 1/2}
PIECEWISE_BREAKPOINTS = tuple(np.round(np.arange(-2.0, 8.0, 0.5), 12))


def heat() -> OperatorSpec:
    """u_xx - u_t in one space dimension."""
    return OperatorSpec.build([[0.0]], [1], CoefficientTrack.constant([[1.0]]), name="heat")


def heat2d() -> OperatorSpec:
    return OperatorSpec.build(np.zeros((2, 2)), [2], CoefficientTrack.constant(np.eye(2)),
                              name="heat2d")


def ornstein_uhlenbeck() -> OperatorSpec:
    """u_xx + x u_x - u_t, i.e. B = [[1]] (Tr B = 1)."""
    return OperatorSpec.build([[1.0]], [1], CoefficientTrack.constant([[1.0]]), name="ou")


def kolmogorov(a: float = 1.0) -> OperatorSpec:
    """a u_{x1 x1} + x1 u_{x2} - u_t."""
    return OperatorSpec.build([[0.0, 0.0], [1.0, 0.0]], [1, 1],
                              CoefficientTrack.constant([[a]]), name="kolmogorov")


def kolmogorov_piecewise() -> OperatorSpec:
    """Kolmogorov operator with a(t) alternating between 2 and 1/2 every half time unit."""
    bp = np.array(PIECEWISE_BREAKPOINTS)
    pieces = np.array([[[2.0]] if i % 2 == 0 else [[0.5]] for i in range(len(bp))])
    return OperatorSpec.build([[0.0, 0.0], [1.0, 0.0]], [1, 1],
                              CoefficientTrack(bp, pieces), name="kolmogorov_piecewise")


def chain3() -> OperatorSpec:
    """Three-step chain (kappa = 2): x1 drives x2, x2 drives x3."""
    B = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    return OperatorSpec.build(B, [1, 1, 1], CoefficientTrack.constant([[1.0]]), name="chain3")


FIXTURES = {
    "heat": heat,
    "heat2d": heat2d,
    "ou": ornstein_uhlenbeck,
    "kolmogorov": kolmogorov,
    "kolmogorov_piecewise": kolmogorov_piecewise,
    "chain3": chain3,
}


def get(name: str) -> OperatorSpec:
    try:
        return FIXTURES[name]()
    except KeyError:
        raise KeyError(f"unknown fixture {name!r}; choose from {sorted(FIXTURES)}") from None
