"""
Plain-text report rendering with jinja2 templates.
"""
from pathlib import Path
from typing import Any

from jinja2 import Environment, FileSystemLoader, StrictUndefined

from src.models.report import CheckStatus, Report

TEMPLATE_DIR = Path(__file__).parent / "templates"

_STATUS_LABELS = {
    CheckStatus.PASS: "PASS",
    CheckStatus.FAIL: "FAIL",
    CheckStatus.NOT_APPLICABLE: "N/A ",
}


def _environment() -> Environment:
    env = Environment(
        loader=FileSystemLoader(str(TEMPLATE_DIR)),
        undefined=StrictUndefined,
        trim_blocks=True,
        lstrip_blocks=True,
        keep_trailing_newline=True,
    )
    env.filters["status"] = lambda status: _STATUS_LABELS[CheckStatus(status)]
    env.filters["number"] = _number
    return env


def _number(value: Any) -> str:
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def render_text(report: Report, template: str = "report.txt.j2") -> str:
    """Render ``report`` through ``template`` from the package template directory."""
    return _environment().get_template(template).render(report=report, exit_code=report.exit_code)
