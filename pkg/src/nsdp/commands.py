"""
The validate, solve and audit pipelines behind the CLI.

Each command fills a ``Report``. Input problems (unreadable files, malformed documents,
non-adapted or inadmissible programs) stop the run and set ``Report.error``; check
outcomes never raise.
"""
import logging
from pathlib import Path
from typing import Any, Callable, ContextManager, Dict, List, Optional, Sequence, Tuple

from src.dp.audit import (
    bellman_residual,
    lipschitz_audit,
    policy_map,
    strict_diff_value,
    value_subdiff_bound,
)
from src.dp.euler import EulerCertificate, euler_check
from src.dp.model import DPModel, grid_spacing
from src.dp.solver import check_admissible, solve_value
from src.dp.summability import check_summability
from src.dp.table import ValueTable, is_infeasible
from src.feasibility.viability import check_lower_viability, check_upper_viability
from src.models.config import RunConfig
from src.models.modelfile import LoadedModel, dump_document, file_digest, load_model, load_program
from src.models.report import CheckOutcome, Report
from src.stochastic.assumptions import check_assumptions
from src.stochastic.calculus import audit_integral_subdiff, stochastic_value_subdiff
from src.stochastic.euler import stochastic_euler_check
from src.stochastic.model import StochasticDPModel
from src.stochastic.reduction import flatten_process, reduce_to_deterministic
from src.stochastic.tree import AdaptedProcess, validate_adapted, validate_tree

from . import __version__
from .exceptions import (
    AdaptednessError,
    AllInfeasibleStageError,
    DimensionMismatchError,
    DivergentBoundsError,
    EmptyPolicySetError,
    IllConditionedError,
    InadmissibleProgramError,
    LPError,
    ModelFormatError,
    PremiseError,
)
from .utils.log import get_logger, log_with_context, timed_operation

logger = get_logger(__name__)

INPUT_ERRORS = (
    ModelFormatError,
    AdaptednessError,
    InadmissibleProgramError,
    DimensionMismatchError,
    OSError,
)

NUMERIC_ERRORS = (LPError, IllConditionedError)

Program = List[Tuple[float, ...]]


class _Run:
    """Shared state of one command: config, report and the optional timing sink."""

    def __init__(self, config: RunConfig):
        self.config = config
        self.report = Report(version=__version__, command=config.command, seed=config.seed)
        self.timings: Dict[str, float] = {}

    def timed(self, operation: str, **context: Any) -> ContextManager[None]:
        return timed_operation(logger, operation, self.timings, **context)

    @property
    def radius(self) -> Optional[float]:
        return self.config.sampling.viability_radius

    @property
    def samples(self) -> int:
        return self.config.sampling.viability_samples

    @property
    def curvature(self) -> Optional[float]:
        return self.config.tolerances.curvature_bound


# validate


def _summability_outcome(run: _Run, model: DPModel) -> bool:
    report = check_summability(model, run.config.epsilon, run.config.solver.max_horizon)
    if not report.ok:
        run.report.add(
            CheckOutcome.failed(
                "summability",
                f"cost bounds are not summable: summability assumption fails "
                f"at stage {report.stage} "
                f"(bound {report.bound})",
                stage=report.stage,
                details=report.model_dump(mode="json"),
            )
        )
        return False
    assert report.T_eff is not None
    try:
        model.check_extension(report.T_eff)
    except DimensionMismatchError as e:
        run.report.add(CheckOutcome.failed("horizon_extension", str(e), stage=len(model.stages)))
        return False
    run.report.add(
        CheckOutcome.passed(
            "summability",
            f"T_eff={report.T_eff}, tail={report.tail:.3e}",
            details=report.model_dump(mode="json", exclude={"profile"}),
        )
    )
    return True


def _validate_stochastic(run: _Run, smodel: StochasticDPModel) -> Optional[DPModel]:
    tree_report = validate_tree(smodel.tree)
    for d in tree_report.diagnostics:
        run.report.add(
            CheckOutcome.failed(
                f"tree.{d.check}", d.message, stage=d.stage, details=d.model_dump(mode="json")
            )
        )
    if not tree_report.ok:
        return None

    assumptions = check_assumptions(smodel, seed=run.config.seed)
    for d in assumptions.diagnostics:
        run.report.add(
            CheckOutcome.failed(
                d.check, d.message, stage=d.stage, details=d.model_dump(mode="json")
            ),
        )
    for envelope in assumptions.envelopes:
        label = smodel.tree.label(envelope.atom)
        summary = f"Σ_t sup|φ_t| = {envelope.total:.6g}"
        if envelope.alpha is not None:
            summary += f" vs α = {envelope.alpha:.6g}"
        make = CheckOutcome.passed if envelope.ok else CheckOutcome.failed
        if not envelope.ok:
            summary = f"summability assumption fails: {summary}"
        run.report.add(
            make("envelope", summary, atom=label, details=envelope.model_dump(mode="json"))
        )
    for estimate in assumptions.lipschitz:
        if estimate.falsified:
            run.report.add(
                CheckOutcome.failed(
                    "lipschitz",
                    f"declared k={estimate.declared} below sampled estimate "
                    f"{estimate.estimated:.6g}",
                    stage=estimate.stage,
                    atom=smodel.tree.label(estimate.atom),
                    details=estimate.model_dump(mode="json"),
                )
            )
    if assumptions.diagnostics:
        return None
    reduced = reduce_to_deterministic(smodel)
    return reduced if _summability_outcome(run, reduced) else None


def _validated_model(run: _Run, loaded: LoadedModel) -> Optional[DPModel]:
    """Deterministic model to solve, or None when validation failed."""
    model = loaded.model
    if isinstance(model, StochasticDPModel):
        return _validate_stochastic(run, model)
    return model if _summability_outcome(run, model) else None


def _cmd_validate(run: _Run) -> None:
    loaded = load_model(run.config.model_path)
    run.report.model_digest = loaded.digest
    with run.timed("validate"):
        _validated_model(run, loaded)


# solve


def _solve(run: _Run, model: DPModel) -> Optional[ValueTable]:
    settings = run.config
    try:
        with run.timed("solve_value"):
            table = solve_value(
                model,
                epsilon=settings.epsilon,
                parallelism=settings.parallelism,
                policy_tol=settings.tolerances.policy_tol,
                project_candidates=settings.solver.project_candidates,
                max_horizon=settings.solver.max_horizon,
            )
    except (AllInfeasibleStageError, DivergentBoundsError) as e:
        run.report.add(CheckOutcome.failed("solve", str(e), stage=getattr(e, "stage", None)))
        return None
    first = table.stages[0]
    flags = zip(first.values.reshape(-1), first.infeasible.reshape(-1))
    finite = [float(v) for v, bad in flags if not bad]
    run.report.results.update(
        {
            "T_eff": table.T_eff,
            "tail_error": table.tail_error,
            "horizon_mode": table.horizon_mode,
            "v0_min": min(finite),
            "v0_max": max(finite),
            "infeasible_nodes": int(sum(int(s.infeasible.sum()) for s in table.stages)),
        }
    )
    run.report.add(
        CheckOutcome.passed("solve", f"T_eff={table.T_eff}, tail_error={table.tail_error:.3e}")
    )
    return table


def export_table(table: ValueTable, path: Path) -> None:
    """JSON for a ``.json`` suffix, tab-separated text otherwise."""
    path.parent.mkdir(parents=True, exist_ok=True)
    if path.suffix == ".json":
        path.write_text(dump_document(table.to_dict()), encoding="utf8")
    else:
        path.write_text(table.to_tsv(), encoding="utf8")


def _cmd_solve(run: _Run) -> None:
    loaded = load_model(run.config.model_path)
    run.report.model_digest = loaded.digest
    model = _validated_model(run, loaded)
    if model is None:
        return
    table = _solve(run, model)
    if table is not None and run.config.output_path is not None:
        export_table(table, run.config.output_path)
        run.report.results["table"] = str(run.config.output_path)


# audit


def _guarded(run: _Run, check: str, stage: int, body: Callable[..., None], *args: Any) -> None:
    """Run one check; premise failures become not_applicable, numeric breakdowns become failures."""
    try:
        body(run, *args)
    except PremiseError as e:
        log_with_context(
            logger,
            logging.INFO,
            "Check not applicable",
            check=check,
            stage=stage,
            premise=e.premise,
        )
        run.report.add(
            CheckOutcome.not_applicable(check, e.premise, stage=stage, details={"reason": str(e)})
        )
    except EmptyPolicySetError as e:
        run.report.add(CheckOutcome.failed(check, str(e), stage=stage))
    except NUMERIC_ERRORS as e:
        log_with_context(
            logger,
            logging.WARNING,
            "Check failed numerically",
            check=check,
            stage=stage,
            error=str(e),
        )
        run.report.add(
            CheckOutcome.failed(
                check,
                f"numerical failure: {e}",
                stage=stage,
                details={"error": type(e).__name__, "reason": str(e)},
            )
        )


def _bellman(run: _Run, model: DPModel, table: ValueTable, program: Program, t0: int) -> None:
    report = bellman_residual(model, table, program, t0, run.curvature)
    details = report.model_dump(mode="json")
    if report.consistent:
        summary = f"{len(report.residuals)} steps consistent"
        run.report.add(CheckOutcome.passed("bellman", summary, details=details))
    else:
        worst = max(
            range(len(report.residuals)),
            key=lambda k: abs(report.residuals[k]) - report.tolerances[k],
        )
        run.report.add(
            CheckOutcome.failed(
                "bellman",
                f"residual {report.residuals[worst]:.3e} exceeds {report.tolerances[worst]:.3e}",
                stage=t0 + worst,
                details=details,
            )
        )


def _viability_at(
    run: _Run, kind: str, model: DPModel, table: ValueTable, t: int, x: Sequence[float]
) -> None:
    checker = check_lower_viability if kind == "lower" else check_upper_viability
    radius = grid_spacing(model.state_grid(t)) if run.radius is None else run.radius
    report = checker(
        policy_map(model, table, t),
        model.stage_at(t).feasibility,
        x,
        radius,
        run.samples,
        run.config.seed,
        run.config.tolerances.feasibility_tol,
    )
    make = CheckOutcome.passed if report.holds else CheckOutcome.failed
    details = report.model_dump(mode="json")
    run.report.add(make(f"viability.{kind}", report.verdict.value, stage=t, details=details))


def _lipschitz_at(run: _Run, model: DPModel, table: ValueTable, t: int, x: Sequence[float]) -> None:
    result = lipschitz_audit(
        model, table, t, x, run.radius, run.samples, run.config.seed, run.curvature
    )
    make = CheckOutcome.passed if result.ok else CheckOutcome.failed
    run.report.add(
        make(
            "lipschitz",
            f"observed slope {result.observed:.6g} vs ℓ_t {result.declared:.6g}",
            stage=t,
            details=result.model_dump(mode="json", exclude={"viability"}),
        )
    )


def _viability(run: _Run, model: DPModel, table: ValueTable, program: Program, t0: int) -> None:
    for k, x in enumerate(program):
        t = t0 + k
        if t > table.T_eff:
            break
        _guarded(run, "viability.lower", t, _viability_at, "lower", model, table, t, x)
        _guarded(run, "viability.upper", t, _viability_at, "upper", model, table, t, x)
        _guarded(run, "lipschitz", t, _lipschitz_at, model, table, t, x)


def _euler_outcome(run: _Run, certificate: EulerCertificate, atom: Optional[str] = None) -> None:
    details = certificate.model_dump(mode="json")
    if certificate.member:
        summary = f"member (ℓ¹ distance {certificate.distance:.3e})"
        run.report.add(
            CheckOutcome.passed(
                "euler", summary, stage=certificate.stage, atom=atom, details=details
            ),
        )
        return
    separator = list(certificate.certificate.separator or ())
    summary = f"non_member, separator {separator} margin {certificate.certificate.margin:.3e}"
    if certificate.alarm:
        summary += " (solver/tolerance alarm: policy point)"
    run.report.add(
        CheckOutcome.failed("euler", summary, stage=certificate.stage, atom=atom, details=details)
    )


def _steps(length: int, t0: int, T_eff: int) -> List[Tuple[int, int]]:
    """(stage, index) pairs with a successor and, before T_eff, a second successor."""
    steps = []
    for k in range(length - 1):
        t = t0 + k
        if t > T_eff or (t + 1 <= T_eff and k + 2 >= length):
            break
        steps.append((t, k))
    return steps


def _euler_at(
    run: _Run, model: DPModel, table: ValueTable, t: int, program: Program, k: int
) -> None:
    z = program[k + 2] if k + 2 < len(program) else program[k + 1]
    certificate = euler_check(
        model, table, t, program[k], program[k + 1], z, run.radius, run.samples, run.config.seed
    )
    _euler_outcome(run, certificate)


def _stochastic_euler_at(
    run: _Run,
    smodel: StochasticDPModel,
    model: DPModel,
    table: ValueTable,
    t: int,
    process: AdaptedProcess,
    k: int,
) -> None:
    following = process.at(k + 2) if k + 2 < process.horizon else process.at(k + 1)
    result = stochastic_euler_check(
        smodel,
        table,
        t,
        process.at(k),
        process.at(k + 1),
        following,
        run.radius,
        run.samples,
        run.config.seed,
        reduced=model,
        parallelism=run.config.parallelism,
    )
    for certificate in result.certificates:
        _euler_outcome(run, certificate, atom=smodel.tree.label(certificate.atom))


def _subdiff_at(
    run: _Run, model: DPModel, table: ValueTable, t: int, x: Sequence[float], y: Sequence[float]
) -> None:
    result = value_subdiff_bound(
        model, table, t, x, y, run.radius, run.samples, run.config.seed, run.curvature
    )
    generators = [list(g) for g in result.polytope.generators]
    make = CheckOutcome.passed if result.audit_ok else CheckOutcome.failed
    run.report.add(
        make(
            "subdiff",
            f"∂°_x u_t generators {generators}",
            stage=t,
            details=result.model_dump(mode="json", exclude={"viability"}),
        )
    )
    if result.polytope.is_singleton:
        strict = strict_diff_value(
            model, table, t, x, y, run.radius, run.samples, run.config.seed, run.curvature
        )
        make = CheckOutcome.passed if strict.audit_ok else CheckOutcome.failed
        run.report.add(
            make(
                "strict_diff",
                f"∇v_t = {list(strict.gradient)}, table FD {list(strict.fd_gradient)}",
                stage=t,
                details=strict.model_dump(mode="json"),
            )
        )


def _stochastic_subdiff_at(
    run: _Run,
    smodel: StochasticDPModel,
    model: DPModel,
    table: ValueTable,
    t: int,
    process: AdaptedProcess,
    k: int,
) -> None:
    result = stochastic_value_subdiff(
        smodel,
        table,
        t,
        process.at(k),
        process.at(k + 1),
        run.radius,
        run.samples,
        run.config.seed,
        reduced=model,
    )
    family = {
        smodel.tree.label(a): [list(g) for g in p.generators] for a, p in enumerate(result.family)
    }
    audit_ok = result.audit is None or result.audit.audit_ok
    make = CheckOutcome.passed if audit_ok else CheckOutcome.failed
    run.report.add(
        make(
            "subdiff",
            f"per-atom ∂°_x φ_t {family}",
            stage=t,
            details=result.model_dump(mode="json", exclude={"viability"}),
        )
    )
    stage = smodel.stage_at(t)
    direction = [tuple([1.0] * (stage.state_dim + stage.action_dim))] * smodel.tree.size
    integral = audit_integral_subdiff(
        smodel,
        t,
        process.at(k),
        process.at(k + 1),
        direction,
        run.config.tolerances.audit_tol,
        run.config.seed,
    )
    make = CheckOutcome.passed if integral.ok else CheckOutcome.failed
    run.report.add(
        make(
            "integral_subdiff",
            f"Σ μ·σ(∂°φ_t; 1) = {integral.exact:.6g}, reduced-cost FD {integral.fd:.6g}",
            stage=t,
            details=integral.model_dump(mode="json"),
        )
    )


def _cmd_audit(run: _Run) -> None:
    config = run.config
    if config.program_path is None:
        raise ModelFormatError("audit needs a program file")
    loaded = load_model(config.model_path)
    run.report.model_digest = loaded.digest
    document = load_program(config.program_path)
    run.report.program_digest = file_digest(config.program_path)
    t0 = document.t0

    smodel = loaded.model if isinstance(loaded.model, StochasticDPModel) else None
    process: Optional[AdaptedProcess] = None
    if smodel is not None:
        validate_tree(smodel.tree).raise_for_status()
        process = document.as_process()
        validate_adapted(process, smodel.tree).raise_for_status()
        model = reduce_to_deterministic(smodel)
        program = flatten_process(smodel, process)
    else:
        assert isinstance(loaded.model, DPModel)
        model = loaded.model
        program = document.as_states()
    check_admissible(model, program, t0)

    table = _solve(run, model)
    if table is None:
        return
    value = table.value(t0, program[0]) if t0 <= table.T_eff else 0.0
    run.report.results["program_start_value"] = None if is_infeasible(value) else value

    with run.timed("audit", checks=config.checks):
        if "bellman" in config.checks:
            _bellman(run, model, table, program, t0)
        if "euler" in config.checks:
            for t, k in _steps(len(program), t0, table.T_eff):
                if smodel is not None and process is not None:
                    _guarded(
                        run, "euler", t, _stochastic_euler_at, smodel, model, table, t, process, k
                    )
                else:
                    _guarded(run, "euler", t, _euler_at, model, table, t, program, k)
        if "viability" in config.checks:
            _viability(run, model, table, program, t0)
        if "subdiff" in config.checks:
            for k in range(len(program) - 1):
                t = t0 + k
                if t > table.T_eff:
                    break
                if smodel is not None and process is not None:
                    _guarded(
                        run,
                        "subdiff",
                        t,
                        _stochastic_subdiff_at,
                        smodel,
                        model,
                        table,
                        t,
                        process,
                        k,
                    )
                else:
                    _guarded(
                        run, "subdiff", t, _subdiff_at, model, table, t, program[k], program[k + 1]
                    )


COMMANDS: Dict[str, Callable[[_Run], None]] = {
    "validate": _cmd_validate,
    "solve": _cmd_solve,
    "audit": _cmd_audit,
}


def execute(config: RunConfig) -> Report:
    """Run one command and return its report; input errors are recorded, not raised."""
    run = _Run(config)
    try:
        COMMANDS[config.command](run)
    except INPUT_ERRORS as e:
        log_with_context(
            logger, logging.ERROR, "Input error", command=config.command, error=type(e).__name__
        )
        run.report.error = f"{type(e).__name__}: {e}"
        if isinstance(e, InadmissibleProgramError):
            run.report.results["inadmissible_stage"] = e.stage
        if isinstance(e, ModelFormatError) and e.line is not None:
            run.report.results["error_position"] = {"line": e.line, "column": e.column}
    except NUMERIC_ERRORS as e:
        log_with_context(
            logger,
            logging.ERROR,
            "Numerical failure",
            command=config.command,
            error=type(e).__name__,
        )
        run.report.add(
            CheckOutcome.failed(
                "numerics", f"{type(e).__name__}: {e}", details={"error": type(e).__name__}
            )
        )
    if config.record_timing:
        run.report.timing = dict(sorted(run.timings.items()))
    return run.report
