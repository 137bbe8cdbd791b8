"""
Value tables: per-stage grid values with multilinear interpolation and policy candidates.

Infeasible nodes are marked by the ``INFEASIBLE`` sentinel, never by a float; any
arithmetic with it raises. Internally a boolean mask travels next to the value array
and an interpolated point is infeasible as soon as one of its cell corners is.
"""
from functools import cached_property
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.interpolate import RegularGridInterpolator

from src.nsdp.exceptions import DimensionMismatchError

from .model import Grid, grid_nodes, grid_spacing


class _Infeasible:
    """Marker for +∞ (empty feasible set)."""

    _instance: Optional["_Infeasible"] = None

    def __new__(cls) -> "_Infeasible":
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "INFEASIBLE"

    def _reject(self, *_: Any) -> Any:
        raise TypeError("Arithmetic with the INFEASIBLE marker is not defined")

    __add__ = __radd__ = __sub__ = __rsub__ = _reject
    __mul__ = __rmul__ = __truediv__ = __rtruediv__ = _reject
    __neg__ = __float__ = _reject
    __lt__ = __le__ = __gt__ = __ge__ = _reject


INFEASIBLE = _Infeasible()

Value = Union[float, _Infeasible]


def is_infeasible(value: Any) -> bool:
    return value is INFEASIBLE


class StageValues(BaseModel):
    """Values of v_t on one stage grid, with an infeasibility mask and policy candidates."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    stage: int
    grid: Grid
    values: np.ndarray = Field(..., description="Shape = axis lengths; 0.0 where infeasible")
    infeasible: np.ndarray = Field(..., description="Boolean mask, same shape as values")
    policies: Tuple[Tuple[Tuple[float, ...], ...], ...] = Field(
        default=(), description="Minimizing actions per node, nodes in grid_nodes order"
    )

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(len(axis) for axis in self.grid)

    @property
    def spacing(self) -> float:
        return grid_spacing(self.grid)

    @cached_property
    def interpolators(self) -> Tuple[RegularGridInterpolator, RegularGridInterpolator]:
        """Multilinear interpolants of the infeasibility mask and of the values."""
        mask = RegularGridInterpolator(self.grid, self.infeasible.astype(float), method="linear")
        return mask, RegularGridInterpolator(self.grid, self.values, method="linear")

    def in_box(self, point: np.ndarray) -> bool:
        return all(axis[0] <= v <= axis[-1] for axis, v in zip(self.grid, point))

    def _node_index(self, point: np.ndarray) -> Optional[Tuple[int, ...]]:
        index = []
        for axis, v in zip(self.grid, point):
            hits = np.flatnonzero(np.asarray(axis) == v)
            if not hits.size:
                return None
            index.append(int(hits[0]))
        return tuple(index)

    def value(self, point: Sequence[float]) -> Value:
        """Interpolated v_t at ``point``; INFEASIBLE outside the box or near infeasible nodes."""
        y = np.asarray(point, dtype=float).reshape(-1)
        if y.size != len(self.grid):
            raise DimensionMismatchError(
                f"Point has dimension {y.size}, grid has {len(self.grid)} axes",
                expected=len(self.grid),
                got=int(y.size),
            )
        if not self.in_box(y):
            return INFEASIBLE
        index = self._node_index(y)
        if index is not None:
            return INFEASIBLE if self.infeasible[index] else float(self.values[index])
        mask, interp = self.interpolators
        if float(mask(y[None, :])[0]) > 0.0:
            return INFEASIBLE
        return float(interp(y[None, :])[0])

    def node_rows(self) -> List[Tuple[Tuple[float, ...], Value, Tuple[Tuple[float, ...], ...]]]:
        rows = []
        flat_values = self.values.reshape(-1)
        flat_mask = self.infeasible.reshape(-1)
        for k, node in enumerate(grid_nodes(self.grid)):
            value: Value = INFEASIBLE if flat_mask[k] else float(flat_values[k])
            policy = self.policies[k] if k < len(self.policies) else ()
            rows.append((tuple(float(v) for v in node), value, policy))
        return rows


class ValueTable(BaseModel):
    """Solved values v_0..v_{T_eff} (v_{T_eff+1} ≡ 0) with truncation metadata."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    stages: Tuple[StageValues, ...]
    T_eff: int = Field(..., ge=0)
    tail_error: float = Field(default=0.0, ge=0.0)
    horizon_mode: str = "finite"
    policy_tol: float = 1e-9

    def value(self, t: int, point: Sequence[float]) -> Value:
        """v_t at ``point``; zero past the truncation horizon."""
        if t > self.T_eff:
            return 0.0
        return self.stages[t].value(point)

    def spacing(self, t: int) -> float:
        return self.stages[min(t, self.T_eff)].spacing

    def to_tsv(self) -> str:
        """One row per (stage, node): stage, coordinates, value, policy candidates."""
        lines = ["stage\tnode\tvalue\tpolicy"]
        for stage in self.stages:
            for node, value, policy in stage.node_rows():
                shown = "inf" if is_infeasible(value) else repr(value)
                actions = ";".join(",".join(repr(v) for v in y) for y in policy)
                coords = ",".join(repr(v) for v in node)
                lines.append(f"{stage.stage}\t{coords}\t{shown}\t{actions}")
        return "\n".join(lines) + "\n"

    def to_dict(self) -> Dict[str, Any]:
        return {
            "T_eff": self.T_eff,
            "tail_error": self.tail_error,
            "horizon_mode": self.horizon_mode,
            "stages": [
                {
                    "stage": stage.stage,
                    "grid": [list(axis) for axis in stage.grid],
                    "nodes": [
                        {
                            "x": list(node),
                            "value": None if is_infeasible(value) else value,
                            "policy": [list(y) for y in policy],
                        }
                        for node, value, policy in stage.node_rows()
                    ],
                }
                for stage in self.stages
            ],
        }
