"""
Finite filtrations as nested partitions of atoms, and processes adapted to them.

``partition(t)`` is the information available after stage t. A stage-t state is
measurable with respect to ``partition(t - 1)``, with ``partition(-1)`` taken to be
``partition(0)``. Past the last listed partition the filtration stays constant.
"""
import logging
from typing import List, Optional, Sequence, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator

from src.geometry.polytope import Vector
from src.nsdp.exceptions import AdaptednessError, ModelFormatError
from src.nsdp.utils.log import get_logger, log_with_context

logger = get_logger(__name__)

PROBABILITY_TOL = 1e-12

Cell = Tuple[int, ...]
Partition = Tuple[Cell, ...]


class ScenarioTree(BaseModel):
    """Atoms ω with probabilities μ(ω) > 0 and a filtration of partitions."""

    model_config = ConfigDict(frozen=True)

    probabilities: Tuple[float, ...] = Field(..., min_length=1)
    filtration: Tuple[Partition, ...] = Field(
        ..., min_length=1, description="partition(0), partition(1), ..."
    )
    names: Tuple[str, ...] = Field(default=(), description="Optional atom labels")

    @field_validator("probabilities")
    @classmethod
    def positive(cls, value: Tuple[float, ...]) -> Tuple[float, ...]:
        for k, p in enumerate(value):
            if not p > 0.0:
                raise ValueError(
                    f"Atom {k} has probability {p}; zero-probability atoms are not allowed"
                )
        return value

    @classmethod
    def single(cls) -> "ScenarioTree":
        """The degenerate one-atom tree."""
        return cls(probabilities=(1.0,), filtration=(((0,),),))

    @property
    def size(self) -> int:
        return len(self.probabilities)

    def partition(self, t: int) -> Partition:
        if t < 0:
            return self.filtration[0]
        return self.filtration[min(t, len(self.filtration) - 1)]

    def cell_index(self, t: int, atom: int) -> int:
        for k, cell in enumerate(self.partition(t)):
            if atom in cell:
                return k
        raise ModelFormatError(f"Atom {atom} is in no cell of partition({t})")

    def label(self, atom: int) -> str:
        return self.names[atom] if atom < len(self.names) else f"ω{atom + 1}"

    def cell_probability(self, cell: Cell) -> float:
        return sum(self.probabilities[a] for a in cell)


class Diagnostic(BaseModel):
    stage: Optional[int] = None
    check: str
    message: str
    cells: Tuple[Cell, ...] = ()


class TreeReport(BaseModel):
    diagnostics: List[Diagnostic] = Field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.diagnostics

    def raise_for_status(self) -> None:
        if self.diagnostics:
            raise ModelFormatError("; ".join(d.message for d in self.diagnostics))


def validate_tree(tree: ScenarioTree) -> TreeReport:
    """Check probabilities, that each stage is a partition, and the refinement chain."""
    report = TreeReport()
    total = sum(tree.probabilities)
    if abs(total - 1.0) > PROBABILITY_TOL:
        report.diagnostics.append(
            Diagnostic(check="probability", message=f"Probabilities sum to {total:.12g}, not 1")
        )
    atoms = set(range(tree.size))
    for t, partition in enumerate(tree.filtration):
        seen = [a for cell in partition for a in cell]
        if any(not cell for cell in partition) or sorted(seen) != sorted(atoms):
            report.diagnostics.append(
                Diagnostic(
                    stage=t,
                    check="partition",
                    message=(
                        f"partition({t}) does not split the atoms {sorted(atoms)} "
                        "into disjoint nonempty cells"
                    ),
                    cells=partition,
                )
            )
    for t, (coarse, fine) in enumerate(zip(tree.filtration, tree.filtration[1:])):
        offending = tuple(cell for cell in fine if not any(set(cell) <= set(c) for c in coarse))
        if offending:
            report.diagnostics.append(
                Diagnostic(
                    stage=t + 1,
                    check="refinement",
                    message=f"Refinement violated: cells {list(offending)} of partition({t + 1}) "
                    f"cut across partition({t})",
                    cells=offending,
                )
            )
    for d in report.diagnostics:
        log_with_context(
            logger, logging.WARNING, "Scenario tree diagnostic", check=d.check, stage=d.stage
        )
    return report


class AdaptedProcess(BaseModel):
    """f_0, f_1, ...: per stage one vector per atom."""

    model_config = ConfigDict(frozen=True)

    values: Tuple[Tuple[Vector, ...], ...] = Field(..., description="values[t][atom]")

    @property
    def horizon(self) -> int:
        return len(self.values)

    def at(self, t: int) -> Tuple[Vector, ...]:
        return self.values[t]


class AdaptednessReport(BaseModel):
    """ok, or the first (stage, cell, atoms, values) that breaks cell-constancy."""

    ok: bool = True
    stage: Optional[int] = None
    cell: Cell = ()
    atoms: Tuple[int, int] = (0, 0)
    values: Tuple[Vector, ...] = ()

    def raise_for_status(self) -> None:
        if not self.ok:
            assert self.stage is not None
            raise AdaptednessError(
                f"Stage {self.stage} differs within cell {list(self.cell)}: "
                f"atoms {self.atoms} have {self.values}",
                stage=self.stage,
                cell=self.cell,
                atoms=self.atoms,
            )


def check_measurable(
    stage: int, component: Sequence[Sequence[float]], partition: Partition
) -> AdaptednessReport:
    """Exact equality of ``component`` across every cell of ``partition``."""
    atoms = sum(len(cell) for cell in partition)
    if len(component) != atoms:
        raise ModelFormatError(f"Stage {stage} has {len(component)} atom values, expected {atoms}")
    for cell in partition:
        first = cell[0]
        for atom in cell[1:]:
            if tuple(component[atom]) != tuple(component[first]):
                return AdaptednessReport(
                    ok=False,
                    stage=stage,
                    cell=cell,
                    atoms=(first, atom),
                    values=(tuple(component[first]), tuple(component[atom])),
                )
    return AdaptednessReport()


def validate_adapted(process: AdaptedProcess, tree: ScenarioTree) -> AdaptednessReport:
    """f_t must be constant on the cells of partition(t − 1); first violation wins."""
    for t, component in enumerate(process.values):
        report = check_measurable(t, component, tree.partition(t - 1))
        if not report.ok:
            log_with_context(
                logger, logging.WARNING, "Process not adapted", stage=t, cell=report.cell
            )
            return report
    return AdaptednessReport()
