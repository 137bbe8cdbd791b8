"""Human-readable rendering of run reports."""
from .text import render_text

__all__ = ["render_text"]
