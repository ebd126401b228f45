"""Isogeometric boundary element solver for 3-D excavation analysis."""

from igabem.nurbs import (
    FieldBasis1D,
    FieldBasis2D,
    KnotVector,
    NurbsCurve,
    NurbsSurface,
    eval_basis,
    eval_basis_derivatives,
    greville_abscissae,
)

__all__ = [
    "KnotVector",
    "NurbsCurve",
    "NurbsSurface",
    "FieldBasis1D",
    "FieldBasis2D",
    "eval_basis",
    "eval_basis_derivatives",
    "greville_abscissae",
]

__version__ = "0.1.0"
