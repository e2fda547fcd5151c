"""Solution families of the Caputo problem ``x^(alpha) = g(x)``, ``x(0) = 0``.

The problem is solved through ``y = x^(alpha)``, which satisfies the weakly
singular equation ``y(t) = g(int_0^t y(s) (t - s)**-beta ds)`` with
``beta = 1 - alpha``. For each ``T`` in ``(0, 1)`` a solution vanishing on
``[0, T]`` is computed by Picard iteration.
"""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("fdefamily")
except PackageNotFoundError:  # pragma: no cover
    __version__ = "0.0.0"

from fdefamily.analysis import (
    DIVIDED_BY_GAMMA,
    RAW_ARGUMENT,
    ResidualReport,
    SolutionFamily,
    build_family,
    fde_nonlinearity,
    reconstruct_x,
    verify_fde_residual,
)
from fdefamily.hypothesis import (
    HypothesisCertificate,
    SearchRanges,
    check_certificate,
    derive_unit_embedding,
    search_feasible,
)
from fdefamily.nonlinearity import (
    NonlinearityEnvelope,
    NonlinearitySpec,
    absorb_gamma,
    check_envelope,
    estimate_lipschitz_constant,
    eval_g,
    osgood_integral,
    release_gamma,
)
from fdefamily.quadrature import (
    GridFunction,
    Mesh,
    abel_integral,
    build_graded_mesh,
    caputo_derivative,
    rl_fractional_integral,
)
from fdefamily.solver import (
    ClosedFormSolution,
    EnvelopeSet,
    IterationTrace,
    apply_operator,
    closed_form_power_solution,
    empirical_contraction,
    envelope_check,
    picard_solve,
)
from fdefamily.specfun import beta_fn, envelope_map, gamma_fn, invert_envelope_map

__all__ = [
    "DIVIDED_BY_GAMMA", "RAW_ARGUMENT",
    "ClosedFormSolution", "EnvelopeSet", "GridFunction", "HypothesisCertificate",
    "IterationTrace", "Mesh", "NonlinearityEnvelope", "NonlinearitySpec",
    "ResidualReport", "SearchRanges", "SolutionFamily",
    "abel_integral", "absorb_gamma", "apply_operator", "beta_fn", "build_family",
    "build_graded_mesh", "caputo_derivative", "check_certificate", "check_envelope",
    "closed_form_power_solution", "derive_unit_embedding", "empirical_contraction",
    "envelope_check", "envelope_map", "estimate_lipschitz_constant", "eval_g",
    "fde_nonlinearity", "gamma_fn", "invert_envelope_map", "osgood_integral",
    "picard_solve", "rl_fractional_integral", "reconstruct_x", "release_gamma",
    "search_feasible", "verify_fde_residual",
]
