"""Run configuration, model/program documents and reports."""

from .config import ALL_CHECKS, RunConfig, SamplingSettings, SolverSettings, ToleranceSettings
from .modelfile import (
    LoadedModel,
    ModelDocument,
    ProgramDocument,
    dump_document,
    file_digest,
    load_model,
    load_program,
    parse_model,
)
from .report import (
    EXIT_CHECK_FAILURE,
    EXIT_INPUT_ERROR,
    EXIT_PASS,
    CheckOutcome,
    CheckStatus,
    Report,
)

__all__ = [
    "ALL_CHECKS",
    "RunConfig",
    "SamplingSettings",
    "SolverSettings",
    "ToleranceSettings",
    "LoadedModel",
    "ModelDocument",
    "ProgramDocument",
    "dump_document",
    "file_digest",
    "load_model",
    "load_program",
    "parse_model",
    "EXIT_CHECK_FAILURE",
    "EXIT_INPUT_ERROR",
    "EXIT_PASS",
    "CheckOutcome",
    "CheckStatus",
    "Report",
]
