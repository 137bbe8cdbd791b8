"""
Reduction of the scenario-tree model to a deterministic DP on cell blocks.

The stage-t state f_t is constant on the cells of partition(t − 1), so it is stored as
one block of dim E_t per cell; the action f_{t+1} likewise has one block per cell of
partition(t). The reduced cost is Σ_ω μ(ω)·φ_t(x_{cell(ω)}, y_{cell(ω)}, ω) and the
reduced feasibility set is the product of one Φ_t copy per action cell.

Reduced coordinates are the plain block values. Dual objects are kept per atom under
the pairing ⟨f, g⟩ = Σ_ω μ(ω)⟨f(ω), g(ω)⟩; ``to_euclidean`` is the one place where a
per-atom family is mapped to a Euclidean gradient of the reduced problem, by summing
μ(ω)·g(ω) over each cell.
"""
import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict

from src.calculus.expression import ExprNode, PickNode, ScaleNode, SumNode
from src.dp.model import BoundSequence, DPModel, Grid, Horizon, Stage
from src.dp.solver import program_cost
from src.feasibility.sets import FeasibilitySet, block_diagonal
from src.geometry.polytope import Vector
from src.nsdp.utils.log import get_logger, log_with_context

from .model import StochasticDPModel, require_cell_constancy
from .tree import AdaptedProcess, Partition, check_measurable, validate_adapted

logger = get_logger(__name__)


class BlockLayout(BaseModel):
    """Cell blocks of one reduced vector."""

    model_config = ConfigDict(frozen=True)

    stage: int
    cells: Partition
    block_dim: int
    probabilities: Tuple[float, ...]

    @property
    def size(self) -> int:
        return len(self.cells) * self.block_dim

    def block(self, k: int) -> List[int]:
        return list(range(k * self.block_dim, (k + 1) * self.block_dim))

    def cell_of(self, atom: int) -> int:
        for k, cell in enumerate(self.cells):
            if atom in cell:
                return k
        raise ValueError(f"Atom {atom} is in no cell")

    def atom_block(self, atom: int) -> List[int]:
        return self.block(self.cell_of(atom))


def state_layout(smodel: StochasticDPModel, t: int) -> BlockLayout:
    """Layout of f_t: blocks on partition(t − 1)."""
    tree = smodel.tree
    return BlockLayout(
        stage=t,
        cells=tree.partition(t - 1),
        block_dim=smodel.stage_at(t).state_dim,
        probabilities=tree.probabilities,
    )


def action_layout(smodel: StochasticDPModel, t: int) -> BlockLayout:
    """Layout of f_{t+1} as the stage-t action: blocks on partition(t)."""
    tree = smodel.tree
    return BlockLayout(
        stage=t + 1,
        cells=tree.partition(t),
        block_dim=smodel.stage_at(t).action_dim,
        probabilities=tree.probabilities,
    )


def flatten(component: Sequence[Sequence[float]], layout: BlockLayout) -> np.ndarray:
    """Per-atom values -> block vector.

    Raises:
        AdaptednessError: If ``component`` is not constant on the layout's cells
    """
    check_measurable(layout.stage, component, layout.cells).raise_for_status()
    return np.concatenate([np.asarray(component[cell[0]], dtype=float) for cell in layout.cells])


def unflatten(vector: Sequence[float], layout: BlockLayout) -> Tuple[Vector, ...]:
    """Block vector -> per-atom values."""
    v = np.asarray(vector, dtype=float)
    if v.size != layout.size:
        raise ValueError(f"Vector has {v.size} entries, layout expects {layout.size}")
    return tuple(
        tuple(float(c) for c in v[layout.atom_block(atom)]) for atom in range(
            len(layout.probabilities)
        )
    )


def to_euclidean(family: Sequence[Sequence[float]], layout: BlockLayout) -> np.ndarray:
    """Per-atom dual family g(ω) -> reduced gradient with block c = Σ_{ω ∈ c} μ(ω)·g(ω)."""
    out = np.zeros(layout.size)
    for atom, g in enumerate(family):
        out[layout.atom_block(atom)] += layout.probabilities[atom] * np.asarray(g, dtype=float)
    return out


def _repeat_grid(grid: Grid, copies: int) -> Grid:
    return tuple(axis for _ in range(copies) for axis in grid)


def reduced_cost(smodel: StochasticDPModel, t: int) -> ExprNode:
    """Σ_ω μ(ω)·φ_t(x_{cell_{t−1}(ω)}, y_{cell_t(ω)}, ω) as one expression over (x, y)."""
    stage = smodel.stage_at(t)
    states, actions = state_layout(smodel, t), action_layout(smodel, t)
    size = states.size + actions.size
    terms: List[ExprNode] = []
    for atom, cost in enumerate(stage.costs):
        indices = tuple(states.atom_block(atom)) + tuple(
            states.size + i for i in actions.atom_block(atom)
        )
        term: ExprNode = cost
        if indices != tuple(range(size)):
            term = PickNode(child=cost, indices=indices, size=size)
        mu = smodel.tree.probabilities[atom]
        if mu != 1.0:
            term = ScaleNode(factor=mu, child=term)
        terms.append(term)
    return terms[0] if len(terms) == 1 else SumNode(children=tuple(terms))


def reduced_feasibility(smodel: StochasticDPModel, t: int) -> FeasibilitySet:
    """Product of one Φ_t copy per cell of partition(t), each reading its parent state block."""
    stage = smodel.stage_at(t)
    states, actions = state_layout(smodel, t), action_layout(smodel, t)
    sets: List[FeasibilitySet] = []
    placements: List[Tuple[Sequence[int], Sequence[int]]] = []
    for k, cell in enumerate(actions.cells):
        S = stage.feasibility[cell[0]]
        sets.append(S)
        parent = states.atom_block(cell[0]) if S.state_dim else []
        placements.append((parent, actions.block(k)))
    if len(sets) == 1 and states.size == stage.state_dim:
        return sets[0]
    return block_diagonal(sets, placements, states.size, actions.size)


def combine_bounds(bounds: Sequence[BoundSequence], weights: Sequence[float]) -> BoundSequence:
    """Bound of Σ_ω μ(ω)·|φ_t(ω)| from per-atom bound sequences."""
    length = max(len(b.prefix) for b in bounds)
    prefix = tuple(sum(w * b.term(t) for b, w in zip(bounds, weights)) for t in range(length))
    ratio = max(b.ratio for b in bounds)
    scale = sum(w * b.scale for b, w in zip(bounds, weights))
    return BoundSequence(prefix=prefix, scale=scale, ratio=ratio)


def _reduced_length(smodel: StochasticDPModel) -> int:
    """Listed reduced stages; extended until the filtration is stationary when possible."""
    length = len(smodel.stages)
    last = smodel.stages[-1]
    if last.action_dim != last.state_dim:
        return length
    tree = smodel.tree
    while tree.partition(length - 2) != tree.partition(length - 1):
        length += 1
    return length


def reduce_to_deterministic(smodel: StochasticDPModel) -> DPModel:
    """Deterministic DPModel on cell blocks equivalent to ``smodel``.

    Raises:
        AdaptednessError: If stage data is not constant on partition(t) cells
    """
    require_cell_constancy(smodel)
    length = _reduced_length(smodel)
    stages = []
    for t in range(length):
        stage = smodel.stage_at(t)
        states = state_layout(smodel, t)
        stages.append(
            Stage(
                state_dim=states.size,
                grid=_repeat_grid(stage.grid, len(states.cells)),
                feasibility=reduced_feasibility(smodel, t),
                cost=reduced_cost(smodel, t),
            )
        )
    last = length - 1
    terminal = _repeat_grid(smodel.action_grid(last), len(action_layout(smodel, last).cells))

    horizon = smodel.horizon
    if horizon.mode == "truncated" and horizon.bounds is None and smodel.atom_bounds is not None:
        horizon = Horizon.truncated(
            combine_bounds(smodel.atom_bounds, smodel.tree.probabilities), horizon.epsilon
        )

    log_with_context(
        logger,
        logging.INFO,
        "Reduced scenario-tree model",
        atoms=smodel.tree.size,
        stages=length,
        dims=[s.state_dim for s in stages],
    )
    return DPModel(
        stages=tuple(stages), horizon=horizon, discount=smodel.discount, terminal_grid=terminal
    )


def integral_cost(
    smodel: StochasticDPModel, t: int, f: Sequence[Sequence[float]], g: Sequence[Sequence[float]]
) -> float:
    """u_t(f, g) = Σ_ω μ(ω)·φ_t(f(ω), g(ω), ω), undiscounted.

    Raises:
        AdaptednessError: If ``f`` is not constant on partition(t − 1), ``g`` not on
            partition(t), or the stage-t data differs inside a cell of partition(t)
    """
    require_cell_constancy(smodel, [t])
    flatten(f, state_layout(smodel, t))
    flatten(g, action_layout(smodel, t))
    stage = smodel.stage_at(t)
    total = 0.0
    for atom, cost in enumerate(stage.costs):
        point = np.concatenate([np.asarray(f[atom], dtype=float), np.asarray(g[atom], dtype=float)])
        mu = smodel.tree.probabilities[atom]
        value = cost.value_at(point)
        total = total + (value if mu == 1.0 else mu * value)
    return total


def program_objective(smodel: StochasticDPModel, process: AdaptedProcess) -> float:
    """Σ_t β^t·u_t(f_t, f_{t+1}) by direct summation over atoms, from the last step back.

    Raises:
        AdaptednessError: If ``process`` is not adapted
    """
    validate_adapted(process, smodel.tree).raise_for_status()
    total = 0.0
    for t in range(process.horizon - 2, -1, -1):
        value = integral_cost(smodel, t, process.at(t), process.at(t + 1))
        if smodel.discount != 1.0:
            value = smodel.discount**t * value
        total = value + total
    return total


def flatten_process(smodel: StochasticDPModel, process: AdaptedProcess) -> List[Tuple[float, ...]]:
    """States f_0, f_1, ... as reduced block vectors (a program of the reduced model)."""
    validate_adapted(process, smodel.tree).raise_for_status()
    return [
        tuple(float(v) for v in flatten(process.at(t), state_layout(smodel, t)))
        for t in range(process.horizon)
    ]


def reduced_objective(
    smodel: StochasticDPModel, process: AdaptedProcess, reduced: Optional[DPModel] = None
) -> float:
    """Objective of the flattened process under the reduced model."""
    model = reduce_to_deterministic(smodel) if reduced is None else reduced
    return program_cost(model, flatten_process(smodel, process))

