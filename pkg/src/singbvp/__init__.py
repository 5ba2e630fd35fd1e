"""singbvp: finite-difference laboratory for singular elliptic problems
with gradient terms, -Lap u = g(u) + lam*|grad u|^p + mu*f(x,u), u > 0,
zero Dirichlet data on intervals and rectangles."""

from .grid import (
    DomainSpec,
    Grid,
    ScalarField,
    boundary_distance,
    build_grid,
    field_from_function,
    gradient_p,
    neg_laplacian,
    read_field_csv,
    write_field_csv,
)
from .nonlin import (
    FSpec,
    GSpec,
    HypothesisReport,
    KOResult,
    check_ko,
    classify_f,
    eval_f,
    eval_g,
    g_asymptote,
)
from .spectral import EigenPair, eigen_boundary_bounds, principal_eigenpair
from .odeprofile import (
    HProfile,
    build_supersolution,
    energy_residual,
    growth_constants,
    solve_h,
    verify_supersolution,
)
from .solver import (
    ProblemSpec,
    SolveReport,
    SolverOpts,
    comparison_check,
    minimal_subsolution,
    solve_monotone,
    solve_newton,
    solve_transformed_p2,
)
from .bifurcate import (
    BifurcationCurve,
    ExistenceVerdict,
    ThresholdEstimate,
    bisect_threshold,
    closed_form_threshold,
    existence_predicate,
    sweep,
)

__version__ = "0.1.0"
