"""
Random piecewise-smooth expressions shared by the calculus tests.
"""
import numpy as np
import pytest

from src.calculus.expression import (
    ExprNode,
    abs_of,
    affine,
    max_of,
    min_of,
    neg,
    quadratic,
    scale,
    sum_of,
)


def random_atom(rng: np.random.Generator, dim: int) -> ExprNode:
    if rng.random() < 0.5:
        return affine(rng.uniform(-1.0, 1.0, dim), float(rng.uniform(-1.0, 1.0)))
    M = rng.uniform(-1.0, 1.0, (dim, dim))
    return quadratic(M + M.T, rng.uniform(-1.0, 1.0, dim), float(rng.uniform(-1.0, 1.0)))


def random_expr(rng: np.random.Generator, dim: int, depth: int) -> ExprNode:
    """Random expression tree of at most ``depth`` combinator levels over ``dim`` inputs."""
    if depth == 0 or rng.random() < 0.2:
        return random_atom(rng, dim)
    kind = rng.integers(6)
    if kind < 3:
        children = [random_expr(rng, dim, depth - 1) for _ in range(int(rng.integers(2, 4)))]
        return (sum_of, max_of, min_of)[kind](*children)
    child = random_expr(rng, dim, depth - 1)
    if kind == 3:
        return abs_of(child)
    if kind == 4:
        return scale(float(rng.uniform(0.0, 2.0)), child)
    return neg(child)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
