"""
JSON model and program documents.

A model document has the sections ``stages``, ``costs`` and ``feasibility`` (one entry per
listed stage) plus optional ``atoms``, ``filtration``, ``bounds``, ``envelope``,
``horizon``, ``discount``, ``p`` and ``terminal_grid``. Documents without ``atoms``
describe a deterministic model. The layout is documented in ``design/model-format.md``.
"""
import hashlib
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Sequence, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from src.calculus.codec import expr_from_dict
from src.calculus.expression import ExprNode
from src.dp.model import BoundSequence, DPModel, Horizon, Stage
from src.feasibility.sets import FeasibilitySet
from src.nsdp.exceptions import ModelFormatError
from src.nsdp.utils.log import get_logger, log_with_context
from src.stochastic.model import StochasticDPModel, StochasticStage
from src.stochastic.tree import AdaptedProcess, ScenarioTree

logger = get_logger(__name__)

AnyModel = Union[DPModel, StochasticDPModel]


def file_digest(path: str | Path) -> str:
    """sha256 of the raw file bytes."""
    h = hashlib.sha256()
    with Path(path).open("rb") as f:
        while True:
            chunk = f.read(1024 * 1024)
            if not chunk:
                break
            h.update(chunk)
    return h.hexdigest()


def read_json(path: str | Path) -> Any:
    """Decode a JSON document, reporting syntax errors with line and column."""
    text = Path(path).read_text(encoding="utf8")
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ModelFormatError(
            f"{path}:{e.lineno}:{e.colno}: {e.msg}", line=e.lineno, column=e.colno
        ) from e


class AtomSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: Optional[str] = None
    probability: float


class StageSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    state_dim: int = Field(..., ge=1)
    grid: List[List[float]]
    lipschitz: Optional[List[float]] = Field(default=None, description="Declared k_t(ω) per atom")


class HorizonSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    mode: Literal["finite", "truncated"] = "finite"
    T: Optional[int] = Field(default=None, ge=1)
    epsilon: float = Field(default=1e-6, gt=0.0)


class ModelDocument(BaseModel):
    model_config = ConfigDict(extra="forbid")

    atoms: Optional[List[AtomSpec]] = Field(default=None, min_length=1)
    filtration: Optional[List[List[List[int]]]] = None
    stages: List[StageSpec] = Field(..., min_length=1)
    costs: List[Any] = Field(..., description="Per stage: one expression, or one per cell or atom")
    feasibility: List[Any] = Field(..., description="Per stage: one set, or one per cell or atom")
    bounds: Optional[Union[BoundSequence, List[BoundSequence]]] = None
    envelope: Optional[List[float]] = None
    horizon: HorizonSpec = Field(default_factory=lambda: HorizonSpec(T=1))
    discount: float = 1.0
    p: float = 2.0
    terminal_grid: Optional[List[List[float]]] = None

    @model_validator(mode="after")
    def check_sections(self) -> "ModelDocument":
        count = len(self.stages)
        for name in ("costs", "feasibility"):
            if len(getattr(self, name)) != count:
                raise ValueError(
                    f"'{name}' has {len(getattr(self, name))} entries for {count} stages"
                )
        if self.atoms is None:
            if self.filtration is not None or self.envelope is not None:
                raise ValueError("'filtration' and 'envelope' need an 'atoms' section")
            if isinstance(self.bounds, list):
                raise ValueError("A deterministic model takes one bound sequence")
        return self

    @property
    def stochastic(self) -> bool:
        return self.atoms is not None


def _grid(axes: Sequence[Sequence[float]]) -> Tuple[Tuple[float, ...], ...]:
    return tuple(tuple(float(v) for v in axis) for axis in axes)


def _per_atom(entry: Any, t: int, what: str, tree: ScenarioTree) -> List[Any]:
    """Expand one shared entry, a per-cell list on partition(t) or a per-atom list."""
    if not isinstance(entry, list):
        return [entry] * tree.size
    if len(entry) == tree.size:
        return list(entry)
    cells = tree.partition(t)
    if len(entry) == len(cells):
        out: List[Any] = [None] * tree.size
        for value, cell in zip(entry, cells):
            for atom in cell:
                out[atom] = value
        if any(v is None for v in out):
            raise ModelFormatError(f"Stage {t} {what}: partition({t}) does not cover every atom")
        return out
    raise ModelFormatError(
        f"Stage {t} {what}: {len(entry)} entries match neither {len(cells)} cells "
        f"nor {tree.size} atoms"
    )


def _expr(data: Any, t: int) -> ExprNode:
    if not isinstance(data, dict):
        raise ModelFormatError(f"Stage {t} cost must be an expression object")
    return expr_from_dict(data)


def _set(data: Any, t: int) -> FeasibilitySet:
    if not isinstance(data, dict):
        raise ModelFormatError(f"Stage {t} feasibility must be a set object")
    return FeasibilitySet.model_validate(data)


def _horizon(spec: HorizonSpec, bounds: Optional[BoundSequence]) -> Horizon:
    if spec.mode == "finite":
        if spec.T is None:
            raise ModelFormatError("A finite horizon needs T")
        return Horizon.finite(spec.T)
    return Horizon.truncated(bounds, spec.epsilon)


def build_tree(document: ModelDocument) -> ScenarioTree:
    assert document.atoms is not None
    n = len(document.atoms)
    filtration = document.filtration or [[list(range(n))]]
    return ScenarioTree(
        probabilities=tuple(a.probability for a in document.atoms),
        filtration=tuple(tuple(tuple(cell) for cell in partition) for partition in filtration),
        names=tuple(a.name or f"ω{k + 1}" for k, a in enumerate(document.atoms)),
    )


def _deterministic(document: ModelDocument) -> DPModel:
    bounds = document.bounds if isinstance(document.bounds, BoundSequence) else None
    stages = tuple(
        Stage(
            state_dim=spec.state_dim,
            grid=_grid(spec.grid),
            feasibility=_set(document.feasibility[t], t),
            cost=_expr(document.costs[t], t),
        )
        for t, spec in enumerate(document.stages)
    )
    return DPModel(
        stages=stages,
        horizon=_horizon(document.horizon, bounds),
        discount=document.discount,
        terminal_grid=_grid(document.terminal_grid) if document.terminal_grid else None,
    )


def _stochastic(document: ModelDocument) -> StochasticDPModel:
    tree = build_tree(document)
    stages = []
    for t, spec in enumerate(document.stages):
        costs = [_expr(c, t) for c in _per_atom(document.costs[t], t, "costs", tree)]
        sets = [_set(s, t) for s in _per_atom(document.feasibility[t], t, "feasibility", tree)]
        stages.append(
            StochasticStage(
                state_dim=spec.state_dim,
                grid=_grid(spec.grid),
                costs=tuple(costs),
                feasibility=tuple(sets),
                lipschitz=tuple(spec.lipschitz) if spec.lipschitz is not None else None,
            )
        )
    atom_bounds: Optional[Tuple[BoundSequence, ...]] = None
    if isinstance(document.bounds, list):
        atom_bounds = tuple(document.bounds)
    elif document.bounds is not None:
        atom_bounds = (document.bounds,) * tree.size
    return StochasticDPModel(
        tree=tree,
        stages=tuple(stages),
        horizon=_horizon(document.horizon, None),
        discount=document.discount,
        terminal_grid=_grid(document.terminal_grid) if document.terminal_grid else None,
        p=document.p,
        atom_bounds=atom_bounds,
        envelope=tuple(document.envelope) if document.envelope is not None else None,
    )


def parse_model(data: Any) -> AnyModel:
    """Build a DPModel (no ``atoms``) or a StochasticDPModel from a decoded document.

    Raises:
        ModelFormatError: If a section is missing, malformed or inconsistent
    """
    try:
        document = ModelDocument.model_validate(data)
        return _stochastic(document) if document.stochastic else _deterministic(document)
    except ValidationError as e:
        raise ModelFormatError(f"Invalid model: {e}") from e


class LoadedModel(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    path: Path
    digest: str
    model: AnyModel

    @property
    def stochastic(self) -> bool:
        return isinstance(self.model, StochasticDPModel)


def load_model(path: str | Path) -> LoadedModel:
    model = parse_model(read_json(path))
    digest = file_digest(path)
    log_with_context(
        logger,
        logging.INFO,
        "Loaded model",
        path=str(path),
        stochastic=isinstance(model, StochasticDPModel),
        stages=len(model.stages),
    )
    return LoadedModel(path=Path(path), digest=digest, model=model)


class ProgramDocument(BaseModel):
    """A deterministic program (``states``) or an adapted process (``process[t][atom]``)."""

    model_config = ConfigDict(extra="forbid")

    t0: int = Field(default=0, ge=0)
    states: Optional[List[List[float]]] = Field(default=None, min_length=1)
    process: Optional[List[List[List[float]]]] = Field(default=None, min_length=1)

    @model_validator(mode="after")
    def one_kind(self) -> "ProgramDocument":
        if (self.states is None) == (self.process is None):
            raise ValueError("A program lists exactly one of 'states' or 'process'")
        if self.process is not None and self.t0 != 0:
            raise ValueError("An adapted process starts at stage 0")
        return self

    def as_states(self) -> List[Tuple[float, ...]]:
        if self.states is None:
            raise ModelFormatError("Program has no 'states' section")
        return [tuple(float(v) for v in x) for x in self.states]

    def as_process(self) -> AdaptedProcess:
        if self.process is None:
            raise ModelFormatError("Program has no 'process' section")
        return AdaptedProcess(
            values=tuple(tuple(tuple(float(v) for v in f) for f in stage) for stage in self.process)
        )


def load_program(path: str | Path) -> ProgramDocument:
    try:
        return ProgramDocument.model_validate(read_json(path))
    except ValidationError as e:
        raise ModelFormatError(f"Invalid program: {e}") from e


def dump_document(data: Dict[str, Any]) -> str:
    """Canonical JSON text: sorted keys, two-space indent, trailing newline."""
    return json.dumps(data, sort_keys=True, indent=2, ensure_ascii=False) + "\n"
