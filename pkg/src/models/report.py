"""Report documents emitted by the CLI commands."""

from enum import Enum
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field

from .modelfile import dump_document

EXIT_PASS = 0
EXIT_CHECK_FAILURE = 1
EXIT_INPUT_ERROR = 2


class CheckStatus(str, Enum):
    PASS = "pass"
    FAIL = "fail"
    NOT_APPLICABLE = "not_applicable"


class CheckOutcome(BaseModel):
    """One premise-gated or diagnostic check with its evidence."""

    check: str = Field(..., description="e.g. euler, bellman, viability.upper, summability")
    stage: Optional[int] = None
    atom: Optional[str] = None
    status: CheckStatus
    summary: str
    premise: Optional[str] = Field(
        default=None, description="Uncertified premise for not_applicable"
    )
    details: Dict[str, Any] = Field(
        default_factory=dict, description="Certificates, witnesses, separators"
    )

    @classmethod
    def passed(cls, check: str, summary: str, **kwargs: Any) -> "CheckOutcome":
        return cls(check=check, status=CheckStatus.PASS, summary=summary, **kwargs)

    @classmethod
    def failed(cls, check: str, summary: str, **kwargs: Any) -> "CheckOutcome":
        return cls(check=check, status=CheckStatus.FAIL, summary=summary, **kwargs)

    @classmethod
    def not_applicable(cls, check: str, premise: str, **kwargs: Any) -> "CheckOutcome":
        return cls(
            check=check,
            status=CheckStatus.NOT_APPLICABLE,
            summary=f"not applicable (premise {premise} uncertified)",
            premise=premise,
            **kwargs,
        )


class Report(BaseModel):
    """Self-contained run record; ``timing`` is only filled on request."""

    tool: str = "nsdp"
    version: str
    command: str
    model_digest: Optional[str] = Field(default=None, description="sha256 of the model file")
    program_digest: Optional[str] = None
    seed: int = 0
    outcomes: List[CheckOutcome] = Field(default_factory=list)
    results: Dict[str, Any] = Field(
        default_factory=dict, description="e.g. T_eff, tail_error, table path"
    )
    error: Optional[str] = Field(default=None, description="Input error that stopped the run")
    timing: Optional[Dict[str, float]] = None

    def add(self, outcome: CheckOutcome) -> CheckOutcome:
        self.outcomes.append(outcome)
        return outcome

    @property
    def failures(self) -> List[CheckOutcome]:
        return [o for o in self.outcomes if o.status == CheckStatus.FAIL]

    @property
    def exit_code(self) -> int:
        if self.error is not None:
            return EXIT_INPUT_ERROR
        return EXIT_CHECK_FAILURE if self.failures else EXIT_PASS

    def to_json(self) -> str:
        data = self.model_dump(mode="json", exclude_none=False)
        if self.timing is None:
            data.pop("timing")
        data["exit_code"] = self.exit_code
        return dump_document(data)
