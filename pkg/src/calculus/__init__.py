"""
Piecewise-smooth expressions and their exact Clarke calculus.
"""
from .atoms import (
    ATOM_REGISTRY,
    AffineAtom,
    CallableAtom,
    ExpAffineAtom,
    NormSquaredAtom,
    QuadraticAtom,
    SmoothAtom,
    get_atom_class,
)
from .clarke import (
    RegularityReport,
    RegularityVerdict,
    clarke_gradient,
    evaluate,
    gen_dir_derivative,
    is_regular,
    lipschitz_bound,
    partial,
    partial_gradient,
    strict_derivative_probe,
    value_and_gradient,
)
from .codec import expr_from_dict, expr_from_json, expr_to_dict, expr_to_json
from .expression import (
    AbsNode,
    AtomNode,
    BindNode,
    Expr,
    ExprNode,
    MaxNode,
    MinNode,
    NegNode,
    PickNode,
    ScaleNode,
    SumNode,
    abs_of,
    affine,
    bind,
    constant,
    coordinate,
    exp_affine,
    max_of,
    min_of,
    neg,
    norm_squared,
    pick,
    quadratic,
    scale,
    sum_of,
)
from .oracle import FDDerivativeEstimate, fd_generalized_derivative

__all__ = [
    "ATOM_REGISTRY",
    "AbsNode",
    "AffineAtom",
    "AtomNode",
    "BindNode",
    "CallableAtom",
    "ExpAffineAtom",
    "Expr",
    "ExprNode",
    "FDDerivativeEstimate",
    "MaxNode",
    "MinNode",
    "NegNode",
    "NormSquaredAtom",
    "PickNode",
    "QuadraticAtom",
    "RegularityReport",
    "RegularityVerdict",
    "ScaleNode",
    "SmoothAtom",
    "SumNode",
    "abs_of",
    "affine",
    "bind",
    "clarke_gradient",
    "constant",
    "coordinate",
    "evaluate",
    "exp_affine",
    "expr_from_dict",
    "expr_from_json",
    "expr_to_dict",
    "expr_to_json",
    "fd_generalized_derivative",
    "gen_dir_derivative",
    "get_atom_class",
    "is_regular",
    "lipschitz_bound",
    "max_of",
    "min_of",
    "neg",
    "norm_squared",
    "partial",
    "partial_gradient",
    "pick",
    "quadratic",
    "scale",
    "strict_derivative_probe",
    "sum_of",
    "value_and_gradient",
]
