"""Reconstruction of ``x`` from ``y``, residuals of the original equation, solution families.

Two conventions connect the solved ``y`` with the state ``x``:

``raw-argument``
    ``x = J[y]`` with ``J[y](t) = int_0^t y(s) (t - s)**-beta ds``, the
    argument of ``g``. It satisfies ``x^(alpha) = Gamma(alpha) g(x)``.
``divided-by-gamma``
    ``x = J[y]/Gamma(alpha)``. It satisfies ``x^(alpha) = g(Gamma(alpha) x)``,
    i.e. ``g`` is the absorbed form of the nonlinearity of the original
    equation.

There is deliberately no default.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from fdefamily.errors import ConfigurationError, DomainError
from fdefamily.nonlinearity import NonlinearitySpec, eval_g
from fdefamily.quadrature import (
    GridFunction,
    Mesh,
    abel_integral_nodes,
    build_graded_mesh,
    caputo_derivative_nodes,
    extend_mesh_left,
)
from fdefamily.solver import apply_operator, picard_solve
from fdefamily.specfun import gamma_fn

RAW_ARGUMENT = "raw-argument"
DIVIDED_BY_GAMMA = "divided-by-gamma"
CONVENTIONS = (RAW_ARGUMENT, DIVIDED_BY_GAMMA)


def _check_convention(convention) -> str:
    if convention not in CONVENTIONS:
        raise ConfigurationError(
            f"convention must be one of {CONVENTIONS}, got {convention!r}"
        )
    return convention


def reconstruct_x(y: GridFunction, alpha: float, convention: str) -> GridFunction:
    """State ``x`` from ``y = x^(alpha)``; ``y`` must already vanish left of ``T``."""
    convention = _check_convention(convention)
    alpha = float(alpha)
    if not 0.0 < alpha <= 1.0:
        raise DomainError(f"alpha must lie in (0, 1]: {alpha!r}")
    if y.mesh.a != 0.0:
        raise DomainError("y must be given on a mesh starting at t=0")
    J = abel_integral_nodes(y, 1.0 - alpha)
    if convention == DIVIDED_BY_GAMMA:
        J = J / gamma_fn(alpha)
    return GridFunction(y.mesh, J)


def fde_nonlinearity(g: NonlinearitySpec, alpha: float, convention: str) -> NonlinearitySpec:
    """Nonlinearity of ``x^(alpha) = g_raw(x)`` for the ``x`` of :func:`reconstruct_x`."""
    convention = _check_convention(convention)
    if convention == RAW_ARGUMENT:
        return g.scaled(1.0, gamma_fn(alpha))
    return g.scaled(gamma_fn(alpha), 1.0)


@dataclass(frozen=True)
class ResidualReport:
    """Residuals of a reconstructed solution.

    ``caputo_sup_residual`` and ``l2_residual`` measure
    ``x^(alpha) - g_raw(x)`` at the checked nodes; ``sup_residual`` is the
    fixed-point residual ``sup |y - O(y)|`` when ``y`` was supplied and
    otherwise repeats ``caputo_sup_residual``.
    """

    sup_residual: float
    l2_residual: float
    eval_nodes: int
    caputo_sup_residual: float
    checked_t: np.ndarray = field(repr=False)

    def as_dict(self) -> dict:
        return {
            "sup_residual": self.sup_residual,
            "l2_residual": self.l2_residual,
            "eval_nodes": self.eval_nodes,
            "caputo_sup_residual": self.caputo_sup_residual,
            "checked_t_min": float(self.checked_t[0]) if self.eval_nodes else None,
        }


def verify_fde_residual(
    x: GridFunction,
    g_raw: NonlinearitySpec,
    alpha: float,
    check_nodes: int | None = None,
    *,
    T: float = 0.0,
    y: GridFunction | None = None,
    g: NonlinearitySpec | None = None,
) -> ResidualReport:
    """Residual of ``x^(alpha) = g_raw(x)`` at mesh nodes right of ``T``.

    The first cell right of ``T`` is skipped, since the L1 rule is least
    accurate there. ``check_nodes`` evenly subsamples the remaining nodes (all
    of them by default). The L2 norm is the trapezoidal one over the checked
    nodes.
    """
    if x.mesh.a != 0.0 or x.values[0] != 0.0:
        raise DomainError("x must start at t=0 with x(0)=0")
    if T < 0:
        raise DomainError(f"T must be nonnegative: {T!r}")

    t = x.mesh.nodes
    start = int(np.searchsorted(t, T, side="right")) + 1
    candidates = np.arange(max(start, 1), t.size)
    if check_nodes is not None:
        if check_nodes < 1:
            raise ConfigurationError("check_nodes must be positive")
        if check_nodes < candidates.size:
            pick = np.unique(np.round(np.linspace(0, candidates.size - 1, check_nodes)))
            candidates = candidates[pick.astype(int)]

    caputo = caputo_derivative_nodes(x, alpha)
    res = np.abs(caputo[candidates] - eval_g(g_raw, x.values[candidates]))
    tc = t[candidates]
    sup = float(np.max(res)) if res.size else 0.0
    if res.size > 1:
        l2 = math.sqrt(float(np.sum(0.5 * (res[1:] ** 2 + res[:-1] ** 2) * np.diff(tc))))
    else:
        l2 = 0.0

    ysup = sup
    if y is not None and g is not None:
        Oy = apply_operator(g, 1.0 - alpha, T if T in t else 0.0, y)
        ysup = y.sup_distance(Oy)
    return ResidualReport(ysup, l2, int(res.size), sup, tc)


# {{{ families


@dataclass(frozen=True)
class FamilyMember:
    T: float
    y: GridFunction
    x: GridFunction
    residual: ResidualReport
    converged: bool
    iterations: int
    fixed_point_residual: float


@dataclass(frozen=True)
class SolutionFamily:
    alpha: float
    convention: str
    tol: float
    entries: tuple[FamilyMember, ...]
    distances: dict[tuple[float, float], float]
    """pairwise sup-distance of the ``y`` members on their common node set"""
    caputo_tol: float

    @property
    def incomplete(self) -> list[float]:
        return [m.T for m in self.entries if not m.converged]

    @property
    def distinct(self) -> bool:
        return all(d > 10.0 * self.tol for d in self.distances.values())

    @property
    def is_witness(self) -> bool:
        """Converged, pairwise distinct members with small residuals."""
        return (not self.incomplete and self.distinct
                and all(m.residual.caputo_sup_residual <= self.caputo_tol
                        for m in self.entries))


def family_mesh(T: float, n: int, grading: float = 2.0) -> Mesh:
    """Graded mesh on ``[T, 1]`` with ``n`` cells plus uniform cells of similar width on ``[0, T]``."""
    right = build_graded_mesh(T, 1.0, n, grading)
    n_left = max(2, int(math.ceil(n * T)))
    return extend_mesh_left(right, 0.0, n_left)


def _solve_member(g, beta, T, mesh_n, tol, max_iter, grading, convention, caputo_check):
    mesh = family_mesh(T, mesh_n, grading)
    y, trace = picard_solve(g, beta, T, mesh, tol=tol, max_iter=max_iter)
    alpha = 1.0 - beta
    x = reconstruct_x(y, alpha, convention)
    if caputo_check and beta > 0.0:
        residual = verify_fde_residual(x, fde_nonlinearity(g, alpha, convention), alpha,
                                       T=T, y=y, g=g)
    else:
        Oy = apply_operator(g, beta, T, y)
        r = y.sup_distance(Oy)
        residual = ResidualReport(r, 0.0, 0, 0.0, np.empty(0))
    return FamilyMember(T, y, x, residual, trace.converged, trace.iterations, trace.residual)


def _pairwise_distance(a: FamilyMember, b: FamilyMember) -> float:
    # union of both node sets, values from the piecewise linear interpolants
    t = np.union1d(a.y.mesh.nodes, b.y.mesh.nodes)
    return float(np.max(np.abs(a.y(t) - b.y(t))))


def build_family(
    g: NonlinearitySpec,
    beta: float,
    T_list,
    mesh_n: int = 512,
    tol: float = 1e-10,
    *,
    convention: str,
    grading: float = 2.0,
    max_iter: int = 500,
    caputo_tol: float = 5e-3,
    jobs: int = 1,
) -> SolutionFamily:
    """Solve for each ``T`` and collect the members with their residuals.

    Each ``y_T`` is computed on ``[T, 1]`` and extended by zero to ``[0, T]``.
    """
    convention = _check_convention(convention)
    Ts = [float(T) for T in T_list]
    if not Ts:
        raise ConfigurationError("T list is empty")
    if any(not 0.0 < T < 1.0 for T in Ts):
        raise ConfigurationError(f"every T must lie in (0, 1): {Ts}")
    if any(b <= a for a, b in zip(Ts, Ts[1:])):
        raise ConfigurationError(f"T list must be strictly increasing: {Ts}")

    args = (g, beta)
    rest = (mesh_n, tol, max_iter, grading, convention, True)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            members = list(pool.map(lambda T: _solve_member(*args, T, *rest), Ts))
    else:
        members = [_solve_member(*args, T, *rest) for T in Ts]

    distances = {
        (a.T, b.T): _pairwise_distance(a, b) for a, b in itertools.combinations(members, 2)
    }
    return SolutionFamily(1.0 - beta, convention, tol, tuple(members), distances, caputo_tol)


# }}}
