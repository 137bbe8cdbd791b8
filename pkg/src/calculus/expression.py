"""
Piecewise-smooth expressions: a DAG of smooth atoms under sum, nonnegative scaling,
negation, max, min, abs, partial binding and coordinate picking.

Every node kind is a frozen pydantic model discriminated on ``kind``; the tagged union
``Expr`` is what travels through JSON. Node methods work on numpy arrays and are the
single recursion used by evaluation, Clarke gradients and the regularity certificate
(see ``clarke``).
"""
from typing import Annotated, Any, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.geometry.polytope import DEDUP_TOL
from src.nsdp.exceptions import UndefinedGradientError

from .atoms import (
    AffineAtom,
    CallableAtom,
    ExpAffineAtom,
    NormSquaredAtom,
    QuadraticAtom,
)

AtomSpec = Annotated[
    Union[AffineAtom, QuadraticAtom, ExpAffineAtom, NormSquaredAtom, CallableAtom],
    Field(discriminator="name"),
]


class Regularity(BaseModel):
    """Structural verdict for one node at one point."""

    regular: bool
    smooth: bool
    reasons: List[str] = Field(default_factory=list)


def _dedupe_rows(G: np.ndarray) -> np.ndarray:
    kept: List[np.ndarray] = []
    for row in G:
        if any(np.max(np.abs(row - other), initial=0.0) <= DEDUP_TOL for other in kept):
            continue
        kept.append(row)
    return np.vstack(kept) if kept else G


def _active(values: Sequence[float], tol: float, largest: bool) -> List[int]:
    if largest:
        top = max(values)
        return [i for i, v in enumerate(values) if v >= top - tol]
    bottom = min(values)
    return [i for i, v in enumerate(values) if v <= bottom + tol]


class ExprNode(BaseModel):
    """Common behaviour of all expression nodes."""

    model_config = ConfigDict(frozen=True)

    @property
    def dim(self) -> int:
        raise NotImplementedError

    def values(self, X: np.ndarray) -> np.ndarray:
        """Values at the rows of an (N, dim) array."""
        raise NotImplementedError

    def generators(self, x: np.ndarray, tol: float) -> Tuple[float, np.ndarray]:
        """Value at ``x`` and the Clarke gradient generators as rows."""
        raise NotImplementedError

    def regularity(self, x: np.ndarray, tol: float, path: str) -> Regularity:
        raise NotImplementedError

    def lipschitz(self, lower: np.ndarray, upper: np.ndarray) -> float:
        """Euclidean Lipschitz bound on the box [lower, upper]."""
        raise NotImplementedError

    def value_at(self, x: np.ndarray) -> float:
        return float(self.values(np.asarray(x, dtype=float).reshape(1, -1))[0])

    # Operator sugar

    def __add__(self, other: Any) -> "SumNode":
        if not isinstance(other, ExprNode):
            return NotImplemented
        return SumNode(children=(self, other))

    def __radd__(self, other: Any) -> "ExprNode":
        # sum() starts from the integer 0
        if isinstance(other, (int, float)) and other == 0:
            return self
        return NotImplemented

    def __neg__(self) -> "NegNode":
        return NegNode(child=self)

    def __sub__(self, other: Any) -> "SumNode":
        if not isinstance(other, ExprNode):
            return NotImplemented
        return SumNode(children=(self, NegNode(child=other)))

    def __mul__(self, factor: Any) -> "ExprNode":
        if not isinstance(factor, (int, float)):
            return NotImplemented
        if factor < 0:
            return NegNode(child=ScaleNode(factor=-float(factor), child=self))
        return ScaleNode(factor=float(factor), child=self)

    __rmul__ = __mul__


class AtomNode(ExprNode):
    kind: Literal["atom"] = "atom"
    atom: AtomSpec

    @property
    def dim(self) -> int:
        return self.atom.arity

    def values(self, X: np.ndarray) -> np.ndarray:
        return self.atom.eval_batch(X)

    def generators(self, x: np.ndarray, tol: float) -> Tuple[float, np.ndarray]:
        gradient = np.asarray(self.atom.grad(x), dtype=float).reshape(1, -1)
        if not np.all(np.isfinite(gradient)):
            raise UndefinedGradientError(
                f"Gradient of atom '{self.atom.name}' is not finite at {tuple(x)}"
            )
        return self.atom.eval(x), gradient

    def regularity(self, x: np.ndarray, tol: float, path: str) -> Regularity:
        return Regularity(regular=True, smooth=True)

    def lipschitz(self, lower: np.ndarray, upper: np.ndarray) -> float:
        return self.atom.lipschitz_bound(lower, upper)


class _Children(ExprNode):
    children: Tuple["Expr", ...]

    @model_validator(mode="after")
    def check_children(self) -> "_Children":
        if not self.children:
            kind = self.kind  # type: ignore[attr-defined]
            raise ValueError(f"'{kind}' node needs at least one child")
        dims = {child.dim for child in self.children}
        if len(dims) != 1:
            kind = self.kind  # type: ignore[attr-defined]
            raise ValueError(f"Children of '{kind}' disagree on input dimension: {sorted(dims)}")
        return self

    @property
    def dim(self) -> int:
        return self.children[0].dim

    def lipschitz(self, lower: np.ndarray, upper: np.ndarray) -> float:
        return max(child.lipschitz(lower, upper) for child in self.children)


class SumNode(_Children):
    kind: Literal["sum"] = "sum"

    def values(self, X: np.ndarray) -> np.ndarray:
        total = np.zeros(X.shape[0])
        for child in self.children:
            total = total + child.values(X)
        return total

    def generators(self, x: np.ndarray, tol: float) -> Tuple[float, np.ndarray]:
        value = 0.0
        G = np.zeros((1, self.dim))
        for child in self.children:
            v, H = child.generators(x, tol)
            value += v
            G = _dedupe_rows((G[:, None, :] + H[None, :, :]).reshape(-1, self.dim))
        return value, G

    def regularity(self, x: np.ndarray, tol: float, path: str) -> Regularity:
        parts = [c.regularity(x, tol, f"{path}/sum[{i}]") for i, c in enumerate(self.children)]
        return Regularity(
            regular=all(p.regular for p in parts),
            smooth=all(p.smooth for p in parts),
            reasons=[r for p in parts for r in p.reasons],
        )

    def lipschitz(self, lower: np.ndarray, upper: np.ndarray) -> float:
        return sum(child.lipschitz(lower, upper) for child in self.children)


class MaxNode(_Children):
    kind: Literal["max"] = "max"

    def values(self, X: np.ndarray) -> np.ndarray:
        return np.max(np.vstack([child.values(X) for child in self.children]), axis=0)

    def generators(self, x: np.ndarray, tol: float) -> Tuple[float, np.ndarray]:
        results = [child.generators(x, tol) for child in self.children]
        values = [v for v, _ in results]
        active = _active(values, tol, largest=True)
        return max(values), _dedupe_rows(np.vstack([results[i][1] for i in active]))

    def regularity(self, x: np.ndarray, tol: float, path: str) -> Regularity:
        values = [child.value_at(x) for child in self.children]
        active = _active(values, tol, largest=True)
        parts = [self.children[i].regularity(x, tol, f"{path}/max[{i}]") for i in active]
        return Regularity(
            regular=all(p.regular for p in parts),
            smooth=len(active) == 1 and parts[0].smooth,
            reasons=[r for p in parts for r in p.reasons],
        )


class MinNode(_Children):
    """Evaluated as the negation of the max of negations."""

    kind: Literal["min"] = "min"

    def values(self, X: np.ndarray) -> np.ndarray:
        return np.min(np.vstack([child.values(X) for child in self.children]), axis=0)

    def generators(self, x: np.ndarray, tol: float) -> Tuple[float, np.ndarray]:
        results = [child.generators(x, tol) for child in self.children]
        values = [v for v, _ in results]
        active = _active(values, tol, largest=False)
        return min(values), _dedupe_rows(np.vstack([results[i][1] for i in active]))

    def regularity(self, x: np.ndarray, tol: float, path: str) -> Regularity:
        values = [child.value_at(x) for child in self.children]
        active = _active(values, tol, largest=False)
        if len(active) > 1:
            return Regularity(
                regular=False,
                smooth=False,
                reasons=[f"{path}/min: {len(active)} active branches {active}"],
            )
        # near x the min coincides with its only active branch
        return self.children[active[0]].regularity(x, tol, f"{path}/min[{active[0]}]")


class ScaleNode(ExprNode):
    kind: Literal["scale"] = "scale"
    factor: float = Field(..., ge=0.0, allow_inf_nan=False)
    child: "Expr"

    @property
    def dim(self) -> int:
        return self.child.dim

    def values(self, X: np.ndarray) -> np.ndarray:
        return self.factor * self.child.values(X)

    def generators(self, x: np.ndarray, tol: float) -> Tuple[float, np.ndarray]:
        value, G = self.child.generators(x, tol)
        return self.factor * value, _dedupe_rows(self.factor * G)

    def regularity(self, x: np.ndarray, tol: float, path: str) -> Regularity:
        if self.factor == 0.0:
            return Regularity(regular=True, smooth=True)
        return self.child.regularity(x, tol, f"{path}/scale")

    def lipschitz(self, lower: np.ndarray, upper: np.ndarray) -> float:
        return self.factor * self.child.lipschitz(lower, upper)


class NegNode(ExprNode):
    kind: Literal["neg"] = "neg"
    child: "Expr"

    @property
    def dim(self) -> int:
        return self.child.dim

    def values(self, X: np.ndarray) -> np.ndarray:
        return -self.child.values(X)

    def generators(self, x: np.ndarray, tol: float) -> Tuple[float, np.ndarray]:
        value, G = self.child.generators(x, tol)
        return -value, -G

    def regularity(self, x: np.ndarray, tol: float, path: str) -> Regularity:
        inner = self.child.regularity(x, tol, f"{path}/neg")
        if inner.smooth:
            return Regularity(regular=True, smooth=True)
        return Regularity(
            regular=False,
            smooth=False,
            reasons=inner.reasons + [f"{path}/neg: negated child is not smooth"],
        )

    def lipschitz(self, lower: np.ndarray, upper: np.ndarray) -> float:
        return self.child.lipschitz(lower, upper)


class AbsNode(ExprNode):
    """|c| handled as max(c, -c)."""

    kind: Literal["abs"] = "abs"
    child: "Expr"

    @property
    def dim(self) -> int:
        return self.child.dim

    def values(self, X: np.ndarray) -> np.ndarray:
        return np.abs(self.child.values(X))

    def _branches(self, value: float, tol: float) -> List[int]:
        # 0 is the child branch, 1 the negated one
        return _active([value, -value], tol, largest=True)

    def generators(self, x: np.ndarray, tol: float) -> Tuple[float, np.ndarray]:
        value, G = self.child.generators(x, tol)
        branches = self._branches(value, tol)
        stacks = [G if b == 0 else -G for b in branches]
        return abs(value), _dedupe_rows(np.vstack(stacks))

    def regularity(self, x: np.ndarray, tol: float, path: str) -> Regularity:
        value = self.child.value_at(x)
        inner = self.child.regularity(x, tol, f"{path}/abs")
        branches = self._branches(value, tol)
        if len(branches) == 2:
            if inner.smooth:
                return Regularity(regular=True, smooth=False)
            return Regularity(
                regular=False,
                smooth=False,
                reasons=inner.reasons + [f"{path}/abs: kink of a nonsmooth child"],
            )
        if branches[0] == 0:
            return inner
        if inner.smooth:
            return Regularity(regular=True, smooth=True)
        return Regularity(
            regular=False,
            smooth=False,
            reasons=inner.reasons + [f"{path}/abs: negative branch of a nonsmooth child"],
        )

    def lipschitz(self, lower: np.ndarray, upper: np.ndarray) -> float:
        return self.child.lipschitz(lower, upper)


class BindNode(ExprNode):
    """Child with the coordinates ``indices`` held at ``values``; remaining ones stay free."""

    kind: Literal["bind"] = "bind"
    child: "Expr"
    indices: Tuple[int, ...]
    values_: Tuple[float, ...] = Field(..., alias="values")

    model_config = ConfigDict(frozen=True, populate_by_name=True)

    @model_validator(mode="after")
    def check_binding(self) -> "BindNode":
        n = self.child.dim
        if len(self.indices) != len(self.values_):
            raise ValueError("bind needs one value per bound index")
        if len(set(self.indices)) != len(self.indices):
            raise ValueError("bind indices must be distinct")
        if any(i < 0 or i >= n for i in self.indices):
            raise ValueError(f"bind index out of range for child dimension {n}")
        return self

    @property
    def free(self) -> List[int]:
        bound = set(self.indices)
        return [i for i in range(self.child.dim) if i not in bound]

    @property
    def dim(self) -> int:
        return self.child.dim - len(self.indices)

    def _lift(self, X: np.ndarray) -> np.ndarray:
        full = np.empty((X.shape[0], self.child.dim))
        full[:, self.free] = X
        full[:, list(self.indices)] = np.asarray(self.values_, dtype=float)
        return full

    def values(self, X: np.ndarray) -> np.ndarray:
        return self.child.values(self._lift(X))

    def generators(self, x: np.ndarray, tol: float) -> Tuple[float, np.ndarray]:
        value, G = self.child.generators(self._lift(x.reshape(1, -1))[0], tol)
        return value, _dedupe_rows(G[:, self.free])

    def regularity(self, x: np.ndarray, tol: float, path: str) -> Regularity:
        return self.child.regularity(self._lift(x.reshape(1, -1))[0], tol, f"{path}/bind")

    def lipschitz(self, lower: np.ndarray, upper: np.ndarray) -> float:
        held = np.asarray(self.values_, dtype=float)
        full_lower = np.empty(self.child.dim)
        full_upper = np.empty(self.child.dim)
        full_lower[self.free], full_upper[self.free] = lower, upper
        full_lower[list(self.indices)] = held
        full_upper[list(self.indices)] = held
        return self.child.lipschitz(full_lower, full_upper)


class PickNode(ExprNode):
    """Child evaluated on the coordinates ``indices`` of a ``size``-dimensional input."""

    kind: Literal["pick"] = "pick"
    child: "Expr"
    indices: Tuple[int, ...]
    size: int = Field(..., gt=0)

    @model_validator(mode="after")
    def check_pick(self) -> "PickNode":
        if len(self.indices) != self.child.dim:
            raise ValueError(
                f"pick selects {len(self.indices)} coordinates for a child "
                f"of dimension {self.child.dim}"
            )
        if any(i < 0 or i >= self.size for i in self.indices):
            raise ValueError(f"pick index out of range for input dimension {self.size}")
        return self

    @property
    def dim(self) -> int:
        return self.size

    def values(self, X: np.ndarray) -> np.ndarray:
        return self.child.values(X[:, list(self.indices)])

    def generators(self, x: np.ndarray, tol: float) -> Tuple[float, np.ndarray]:
        value, H = self.child.generators(x[list(self.indices)], tol)
        G = np.zeros((H.shape[0], self.size))
        for column, index in enumerate(self.indices):
            G[:, index] += H[:, column]
        return value, _dedupe_rows(G)

    def regularity(self, x: np.ndarray, tol: float, path: str) -> Regularity:
        return self.child.regularity(x[list(self.indices)], tol, f"{path}/pick")

    def lipschitz(self, lower: np.ndarray, upper: np.ndarray) -> float:
        idx = list(self.indices)
        return self.child.lipschitz(np.asarray(lower)[idx], np.asarray(upper)[idx])


Expr = Annotated[
    Union[AtomNode, SumNode, MaxNode, MinNode, ScaleNode, NegNode, AbsNode, BindNode, PickNode],
    Field(discriminator="kind"),
]

for _model in (SumNode, MaxNode, MinNode, ScaleNode, NegNode, AbsNode, BindNode, PickNode):
    _model.model_rebuild()


# Builders


def atom(spec: Any) -> AtomNode:
    return AtomNode(atom=spec)


def affine(a: Sequence[float], c: float = 0.0) -> AtomNode:
    return AtomNode(atom=AffineAtom(a=tuple(a), c=c))


def constant(value: float, dim: int) -> AtomNode:
    return affine([0.0] * dim, value)


def coordinate(index: int, dim: int) -> AtomNode:
    """The map x -> x[index] on R^dim."""
    a = [0.0] * dim
    a[index] = 1.0
    return affine(a)


def quadratic(
    Q: Sequence[Sequence[float]], b: Optional[Sequence[float]] = None, c: float = 0.0
) -> AtomNode:
    return AtomNode(
        atom=QuadraticAtom(
            Q=tuple(tuple(row) for row in Q), b=None if b is None else tuple(b), c=c
        )
    )


def exp_affine(a: Sequence[float], c: float = 0.0, scale: float = 1.0) -> AtomNode:
    return AtomNode(atom=ExpAffineAtom(a=tuple(a), c=c, scale=scale))


def norm_squared(center: Sequence[float], weight: float = 1.0) -> AtomNode:
    return AtomNode(atom=NormSquaredAtom(center=tuple(center), weight=weight))


def sum_of(*children: ExprNode) -> SumNode:
    return SumNode(children=tuple(children))


def max_of(*children: ExprNode) -> MaxNode:
    return MaxNode(children=tuple(children))


def min_of(*children: ExprNode) -> MinNode:
    return MinNode(children=tuple(children))


def scale(factor: float, child: ExprNode) -> ScaleNode:
    return ScaleNode(factor=factor, child=child)


def neg(child: ExprNode) -> NegNode:
    return NegNode(child=child)


def abs_of(child: ExprNode) -> AbsNode:
    return AbsNode(child=child)


def bind(child: ExprNode, indices: Sequence[int], values: Sequence[float]) -> BindNode:
    return BindNode(child=child, indices=tuple(indices), values=tuple(float(v) for v in values))


def pick(child: ExprNode, indices: Sequence[int], size: int) -> PickNode:
    return PickNode(child=child, indices=tuple(indices), size=size)
