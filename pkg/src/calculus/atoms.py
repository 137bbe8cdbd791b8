"""
Smooth atoms: the strictly differentiable building blocks of piecewise-smooth expressions.

Built-in atoms are pydantic models so that expressions serialize; each registers under
its ``name`` in ``ATOM_REGISTRY``. ``CallableAtom`` wraps arbitrary Python callables for
in-process use and cannot be serialized.

Values are computed on batches of points (rows of an ``(N, arity)`` array) with
elementwise products and row sums only, so a row's value never depends on the batch
it was evaluated in.
"""
from abc import abstractmethod
from itertools import product
from typing import Callable, Dict, Literal, Optional, Sequence, Tuple, Type

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

Vector = Tuple[float, ...]


class SmoothAtom(BaseModel):
    """Strictly differentiable map R^arity -> R with an explicit gradient."""

    model_config = ConfigDict(frozen=True)

    @property
    @abstractmethod
    def arity(self) -> int:
        """Input dimension."""

    @abstractmethod
    def eval_batch(self, X: np.ndarray) -> np.ndarray:
        """Values at the rows of ``X``."""

    @abstractmethod
    def grad(self, x: np.ndarray) -> np.ndarray:
        """Gradient at ``x``."""

    @abstractmethod
    def lipschitz_bound(self, lower: Sequence[float], upper: Sequence[float]) -> float:
        """A valid Lipschitz constant (Euclidean norm) on the box [lower, upper]."""

    def eval(self, x: np.ndarray) -> float:
        return float(self.eval_batch(np.asarray(x, dtype=float).reshape(1, -1))[0])


def _corners(lower: Sequence[float], upper: Sequence[float]) -> np.ndarray:
    return np.array(list(product(*zip(lower, upper))), dtype=float).reshape(-1, len(lower))


def _dot_rows(X: np.ndarray, a: Sequence[float]) -> np.ndarray:
    return (X * np.asarray(a, dtype=float)).sum(axis=1)


class AffineAtom(SmoothAtom):
    """a·x + c."""

    name: Literal["affine"] = "affine"
    a: Vector
    c: float = 0.0

    @property
    def arity(self) -> int:
        return len(self.a)

    def eval_batch(self, X: np.ndarray) -> np.ndarray:
        return _dot_rows(X, self.a) + self.c

    def grad(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(self.a, dtype=float)

    def lipschitz_bound(self, lower: Sequence[float], upper: Sequence[float]) -> float:
        return float(np.linalg.norm(self.a))


class QuadraticAtom(SmoothAtom):
    """½ xᵀQx + b·x + c."""

    name: Literal["quadratic"] = "quadratic"
    Q: Tuple[Vector, ...]
    b: Optional[Vector] = None
    c: float = 0.0

    @model_validator(mode="after")
    def check_shape(self) -> "QuadraticAtom":
        n = len(self.Q)
        if n == 0:
            raise ValueError("Q must be nonempty")
        if any(len(row) != n for row in self.Q):
            raise ValueError("Q must be square")
        if self.b is not None and len(self.b) != n:
            raise ValueError(f"b has length {len(self.b)}, expected {n}")
        return self

    @property
    def arity(self) -> int:
        return len(self.Q)

    def _matrix(self) -> np.ndarray:
        return np.asarray(self.Q, dtype=float).reshape(self.arity, self.arity)

    def _linear(self) -> np.ndarray:
        return np.zeros(self.arity) if self.b is None else np.asarray(self.b, dtype=float)

    def eval_batch(self, X: np.ndarray) -> np.ndarray:
        QX = (X[:, None, :] * self._matrix()[None, :, :]).sum(axis=2)
        return 0.5 * (QX * X).sum(axis=1) + _dot_rows(X, self._linear()) + self.c

    def grad(self, x: np.ndarray) -> np.ndarray:
        Q = self._matrix()
        return 0.5 * (Q + Q.T) @ x + self._linear()

    def lipschitz_bound(self, lower: Sequence[float], upper: Sequence[float]) -> float:
        # ‖Sx + b‖ is convex, so its max over the box sits at a corner
        Q = self._matrix()
        S = 0.5 * (Q + Q.T)
        return float(max(np.linalg.norm(S @ v + self._linear()) for v in _corners(lower, upper)))


class ExpAffineAtom(SmoothAtom):
    """scale·exp(a·x + c)."""

    name: Literal["exp_affine"] = "exp_affine"
    a: Vector
    c: float = 0.0
    scale: float = 1.0

    @property
    def arity(self) -> int:
        return len(self.a)

    def eval_batch(self, X: np.ndarray) -> np.ndarray:
        return self.scale * np.exp(_dot_rows(X, self.a) + self.c)

    def grad(self, x: np.ndarray) -> np.ndarray:
        return self.eval(x) * np.asarray(self.a, dtype=float)

    def lipschitz_bound(self, lower: Sequence[float], upper: Sequence[float]) -> float:
        a = np.asarray(self.a, dtype=float)
        peak = float(np.sum(np.maximum(a * np.asarray(lower), a * np.asarray(upper)))) + self.c
        return abs(self.scale) * float(np.exp(peak)) * float(np.linalg.norm(a))


class NormSquaredAtom(SmoothAtom):
    """½·weight·‖x − center‖²."""

    name: Literal["norm_squared"] = "norm_squared"
    center: Vector
    weight: float = Field(default=1.0, ge=0.0)

    @property
    def arity(self) -> int:
        return len(self.center)

    def eval_batch(self, X: np.ndarray) -> np.ndarray:
        D = X - np.asarray(self.center, dtype=float)
        return 0.5 * self.weight * (D * D).sum(axis=1)

    def grad(self, x: np.ndarray) -> np.ndarray:
        return self.weight * (x - np.asarray(self.center, dtype=float))

    def lipschitz_bound(self, lower: Sequence[float], upper: Sequence[float]) -> float:
        center = np.asarray(self.center, dtype=float)
        return self.weight * float(max(np.linalg.norm(v - center) for v in _corners(lower, upper)))


class CallableAtom(SmoothAtom):
    """User-supplied value/gradient callables; in-process only (not serializable)."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    name: Literal["callable"] = "callable"
    dim: int = Field(..., gt=0)
    fn: Callable[[np.ndarray], float] = Field(..., exclude=True)
    gradient: Callable[[np.ndarray], np.ndarray] = Field(..., exclude=True)
    lipschitz: Optional[float] = Field(default=None, ge=0.0, description="Declared bound")
    label: str = "callable"

    @property
    def arity(self) -> int:
        return self.dim

    def eval_batch(self, X: np.ndarray) -> np.ndarray:
        return np.array([float(self.fn(row)) for row in X], dtype=float)

    def grad(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(self.gradient(x), dtype=float).reshape(self.dim)

    def lipschitz_bound(self, lower: Sequence[float], upper: Sequence[float]) -> float:
        if self.lipschitz is None:
            raise ValueError(f"Atom '{self.label}' declares no Lipschitz bound")
        return self.lipschitz


# Serializable built-ins, keyed by the JSON "name"
ATOM_REGISTRY: Dict[str, Type[SmoothAtom]] = {
    "affine": AffineAtom,
    "quadratic": QuadraticAtom,
    "exp_affine": ExpAffineAtom,
    "norm_squared": NormSquaredAtom,
}


def get_atom_class(name: str) -> Type[SmoothAtom]:
    """Look up a built-in atom class by its serialized name."""
    if name not in ATOM_REGISTRY:
        raise ValueError(f"No atom registered under name: {name}")
    return ATOM_REGISTRY[name]
