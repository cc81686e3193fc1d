import numpy as np
import pytest

from kfpkernel.errors import ExpressionError
from kfpkernel.expr import compile_expression


def test_arithmetic_and_caret_power():
    f = compile_expression("2*x1^2 - x2/4 + 3", 2)
    X = np.array([[1.0, 4.0], [0.5, -2.0]])
    np.testing.assert_allclose(f(X), [4.0, 4.0])


def test_functions_and_constants():
    f = compile_expression("exp(-x1) * cos(pi * x1) + sqrt(abs(x1)) + sin(e - e)", 1)
    x = np.array([[0.0], [1.0], [-4.0]])
    np.testing.assert_allclose(f(x), np.exp(-x[:, 0]) * np.cos(np.pi * x[:, 0]) + np.sqrt(np.abs(x[:, 0])))


def test_constant_expression_broadcasts():
    assert compile_expression("1", 3)(np.zeros((5, 3))).shape == (5,)
    assert compile_expression("-(+2)", 1)(np.zeros((1, 1)))[0] == -2.0


@pytest.mark.parametrize("src", [
    "__import__('os')",
    "import os",
    "x1.real",
    "x1[0]",
    "open('f')",
    "lambda: 1",
    "x1 if x1 else 0",
    "x1 < 2",
    "y",
    "x0",
    "exp(x1, x1)",
    "'abc'",
    "True",
    "x1 % 2",
    "not x1",
    "[x1]",
    "1 +",
])
def test_rejected(src):
    with pytest.raises(ExpressionError):
        compile_expression(src, 2)


def test_dimension_bound():
    compile_expression("x3", 3)
    with pytest.raises(ExpressionError):
        compile_expression("x3", 2)


def test_errors_do_not_raise_on_evaluation():
    f = compile_expression("1 / x1 + sqrt(x1)", 1)
    out = f(np.array([[0.0], [-1.0]]))
    assert not np.any(np.isfinite(out))
