"""
JSON codec for expressions.

Documents are the pydantic dump of the ``Expr`` union (``kind`` tags nodes, ``name``
tags atoms); the schema is described in ``design/model-format.md``.
"""
import json
from typing import Any, Dict

from pydantic import TypeAdapter, ValidationError

from src.nsdp.exceptions import ModelFormatError

from .atoms import CallableAtom
from .expression import AtomNode, Expr, ExprNode

_ADAPTER: TypeAdapter[Any] = TypeAdapter(Expr)


def _walk(node: ExprNode) -> None:
    if isinstance(node, AtomNode):
        if isinstance(node.atom, CallableAtom):
            raise ValueError(f"Callable atom '{node.atom.label}' cannot be serialized")
        return
    for child in getattr(node, "children", ()):
        _walk(child)
    inner = getattr(node, "child", None)
    if inner is not None:
        _walk(inner)


def expr_to_dict(expr: ExprNode) -> Dict[str, Any]:
    _walk(expr)
    return expr.model_dump(mode="json", by_alias=True)


def expr_to_json(expr: ExprNode, indent: int | None = None) -> str:
    return json.dumps(expr_to_dict(expr), indent=indent)


def expr_from_dict(data: Dict[str, Any]) -> ExprNode:
    """Validate a decoded document into an expression."""
    try:
        return _ADAPTER.validate_python(data)
    except ValidationError as e:
        raise ModelFormatError(f"Invalid expression: {e}") from e


def expr_from_json(text: str) -> ExprNode:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ModelFormatError(f"Invalid JSON: {e.msg}", line=e.lineno, column=e.colno) from e
    return expr_from_dict(data)
