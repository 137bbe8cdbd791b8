"""
Integrability and Lipschitz data of the scenario-tree costs.

The summable envelope Σ_t sup|φ_t(·,·,ω)| <= α(ω) is checked per atom from declared or
grid-estimated bounds. Lipschitz constants k_t(ω) are only ever estimated from below by
sampled difference quotients; a declared k_t smaller than an estimate is falsified.
"""
import logging
import math
from typing import List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, Field
from scipy.stats import qmc

from src.dp.model import BoundSequence, Grid
from src.dp.summability import grid_sup
from src.nsdp.utils.log import get_logger, log_with_context

from .model import StochasticDPModel, cell_constancy
from .tree import Diagnostic, validate_tree

logger = get_logger(__name__)

ENVELOPE_TOL = 1e-12
PROBE_STEP = 1e-6
LIPSCHITZ_TOL = 1e-6
LIPSCHITZ_SAMPLES = 64


class EnvelopeCheck(BaseModel):
    atom: int
    total: float = Field(..., description="Σ_t b_t(ω); inf when divergent")
    alpha: Optional[float] = None
    estimated: bool = False
    ok: bool


class LipschitzEstimate(BaseModel):
    stage: int
    atom: int
    estimated: float = Field(..., ge=0.0, description="Sampled lower estimate of k_t(ω)")
    declared: Optional[float] = None

    @property
    def falsified(self) -> bool:
        return self.declared is not None and self.declared + LIPSCHITZ_TOL < self.estimated


class AssumptionReport(BaseModel):
    diagnostics: List[Diagnostic] = Field(
        default_factory=list, description="Tree and cell-constancy problems"
    )
    envelopes: List[EnvelopeCheck] = Field(default_factory=list)
    lipschitz: List[LipschitzEstimate] = Field(default_factory=list)

    @property
    def ok(self) -> bool:
        return (
            not self.diagnostics
            and all(e.ok for e in self.envelopes)
            and not any(k.falsified for k in self.lipschitz)
        )


def _box(grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    return np.array([axis[0] for axis in grid]), np.array([axis[-1] for axis in grid])


def estimate_atom_bounds(smodel: StochasticDPModel, atom: int) -> BoundSequence:
    """Grid maxima of |φ_t(·,·,ω)| over gph Φ_t for the listed stages, then geometric in β.

    A finite horizon of T stages bounds exactly stages 0..T-1 and nothing after.
    """
    horizon = smodel.horizon
    finite = horizon.mode == "finite" and horizon.T is not None
    count = horizon.T if finite else len(smodel.stages)
    maxima = []
    for t in range(count):  # type: ignore[arg-type]
        stage = smodel.stage_at(t)
        maxima.append(
            grid_sup(stage.costs[atom], stage.feasibility[atom], stage.grid, smodel.action_grid(t))
        )
    beta = smodel.discount
    prefix = tuple(beta**t * m for t, m in enumerate(maxima))
    if finite:
        return BoundSequence(prefix=prefix)
    return BoundSequence(prefix=prefix, scale=maxima[-1], ratio=beta)


def estimate_lipschitz(
    smodel: StochasticDPModel, t: int, atom: int, samples: int = LIPSCHITZ_SAMPLES, seed: int = 0
) -> float:
    """max |φ(p) − φ(q)| / (‖x − x'‖ + ‖y − y'‖) over axis steps and sampled pairs.

    Both points range over the box spanned by the state and action grids.
    """
    stage = smodel.stage_at(t)
    cost = stage.costs[atom]
    n = stage.state_dim
    lo_x, hi_x = _box(stage.grid)
    lo_y, hi_y = _box(smodel.action_grid(t))
    lower, upper = np.concatenate([lo_x, lo_y]), np.concatenate([hi_x, hi_y])
    dim = lower.size

    sampler = qmc.Halton(d=2 * dim, scramble=True, seed=seed)
    raw = sampler.random(samples)
    bases = qmc.scale(raw[:, :dim], lower, upper)
    others = qmc.scale(raw[:, dim:], lower, upper)

    steps = PROBE_STEP * np.maximum(upper - lower, 1.0)
    probes_p: List[np.ndarray] = []
    probes_q: List[np.ndarray] = []
    for base in bases:
        for i in range(dim):
            shifted = base.copy()
            ahead = base[i] + steps[i]
            shifted[i] = ahead if ahead <= upper[i] else base[i] - steps[i]
            probes_p.append(base)
            probes_q.append(shifted)
    probes_p.extend(bases)
    probes_q.extend(others)
    P, Q = np.asarray(probes_p), np.asarray(probes_q)
    gaps = np.linalg.norm(P[:, :n] - Q[:, :n], axis=1) + np.linalg.norm(P[:, n:] - Q[:, n:], axis=1)
    keep = gaps > 0.0
    quotients = np.abs(cost.values(P[keep]) - cost.values(Q[keep])) / gaps[keep]
    return float(np.max(quotients, initial=0.0))


def check_assumptions(
    smodel: StochasticDPModel, samples: int = LIPSCHITZ_SAMPLES, seed: int = 0
) -> AssumptionReport:
    """Tree validity, cell-constancy, per-atom summable envelopes and Lipschitz estimates."""
    report = AssumptionReport()
    report.diagnostics.extend(validate_tree(smodel.tree).diagnostics)
    report.diagnostics.extend(cell_constancy(smodel))

    for atom in range(smodel.tree.size):
        declared = smodel.atom_bounds[atom] if smodel.atom_bounds is not None else None
        bounds = declared if declared is not None else estimate_atom_bounds(smodel, atom)
        total = math.inf if bounds.divergent else bounds.total()
        alpha = smodel.envelope[atom] if smodel.envelope is not None else None
        ok = math.isfinite(total) and (alpha is None or total <= alpha + ENVELOPE_TOL)
        report.envelopes.append(
            EnvelopeCheck(atom=atom, total=total, alpha=alpha, estimated=declared is None, ok=ok)
        )

    for t, stage in enumerate(smodel.stages):
        for atom in range(smodel.tree.size):
            report.lipschitz.append(
                LipschitzEstimate(
                    stage=t,
                    atom=atom,
                    estimated=estimate_lipschitz(smodel, t, atom, samples, seed),
                    declared=stage.lipschitz[atom] if stage.lipschitz is not None else None,
                )
            )

    if not report.ok:
        log_with_context(
            logger,
            logging.WARNING,
            "Assumption check failed",
            diagnostics=len(report.diagnostics),
            envelopes=[e.atom for e in report.envelopes if not e.ok],
        )
    return report


def lipschitz_rank(
    smodel: StochasticDPModel, t: int, estimates: Optional[Sequence[LipschitzEstimate]] = None
) -> float:
    """∫ k_t dμ: the Lipschitz rank of u_t, from declared k_t or else from estimates."""
    stage = smodel.stage_at(t)
    if stage.lipschitz is not None:
        k = list(stage.lipschitz)
    elif estimates is not None:
        by_atom = {e.atom: e.estimated for e in estimates if e.stage == t}
        k = [by_atom[atom] for atom in range(smodel.tree.size)]
    else:
        k = [estimate_lipschitz(smodel, t, atom) for atom in range(smodel.tree.size)]
    return float(sum(mu * kk for mu, kk in zip(smodel.tree.probabilities, k)))
