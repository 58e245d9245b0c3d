"""Shared numeric tolerances.

All cutoffs live here instead of being sprinkled as magic constants, so a
caller who needs looser or tighter behaviour passes one object through.
"""

from dataclasses import dataclass


@dataclass(frozen=True)
class NumericPolicy:
    """Tolerance bundle threaded through the numerical routines.

    cond_max         condition-number ceiling for "regular" expansions;
                     beyond it the operator is treated as singular.
    rank_tol         relative singular-value threshold for rank decisions
                     (nilpotent structure detection).
    degenerate_tol   |det| below this means the generic leading term of a
                     singular expansion vanishes and a higher-order expansion
                     would be needed.
    eigen_tol        |F(lambda)| below this certifies lambda as a numerical
                     zero of the Jost function.
    cross_tol        required agreement between two independent computation
                     routes of the same quantity.
    ode_residual_tol acceptance threshold for pointwise ODE residuals of
                     marched solutions.
    tol_circle       relative resolvent-singularity margin for contour
                     quadrature nodes.
    trace_tol        |trace - nearest integer| target when resolving Riesz
                     projections by contour doubling.
    """

    cond_max: float = 1e12
    rank_tol: float = 1e-8
    degenerate_tol: float = 1e-10
    eigen_tol: float = 1e-6
    cross_tol: float = 1e-6
    ode_residual_tol: float = 1e-4
    tol_circle: float = 1e-10
    trace_tol: float = 1e-8


DEFAULT_POLICY = NumericPolicy()
