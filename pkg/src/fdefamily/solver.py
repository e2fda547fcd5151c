r"""Picard iteration for ``y(t) = g(int_T^t y(s) (t - s)**-beta ds)`` on ``[T, 1]``.

The operator

.. math::

    \mathcal{O}(y)(t) = g\left(\int_T^t \frac{y(s)}{(t - s)^\beta} ds\right)

is discretized with the product-integration weights of
:mod:`fdefamily.quadrature` and iterated in the nodal sup-metric.

For a power law ``g(u) = c u**d`` the nontrivial fixed point is known in
closed form, ``y(t) = A (t - T)**gamma`` with ``gamma = d (1 - beta)/(1 - d)``
and ``A**(1 - d) = c B(gamma + 1, 1 - beta)**d``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from fdefamily.errors import ConfigurationError, DomainError, NumericalFailureError, RangeError
from fdefamily.hypothesis import HypothesisCertificate
from fdefamily.nonlinearity import POWER_LAW, NonlinearitySpec, eval_g
from fdefamily.quadrature import GridFunction, Mesh, abel_weight_matrix, write_columns_csv
from fdefamily.specfun import beta_fn, power_solution_exponent

log = logging.getLogger(__name__)

LOWER_ENVELOPE = "lower-envelope"
ZERO = "zero"


@dataclass(frozen=True)
class EnvelopeSet:
    """Functions with ``Y1 (t-T)**(1+eps1) <= y(t) <= Y2 (t-T)**(1+eps2)`` on ``[T, 1]``."""

    Y1: float
    Y2: float
    eps1: float
    eps2: float
    T: float

    @classmethod
    def from_certificate(cls, cert: HypothesisCertificate) -> EnvelopeSet:
        return cls(cert.Y1, cert.Y2, cert.eps1, cert.eps2, cert.T)

    def lower(self, t):
        return self.Y1 * np.maximum(np.asarray(t, dtype=np.float64) - self.T, 0.0) ** (1 + self.eps1)

    def upper(self, t):
        return self.Y2 * np.maximum(np.asarray(t, dtype=np.float64) - self.T, 0.0) ** (1 + self.eps2)


#: used by ``init="lower-envelope"`` when no envelope is supplied
def default_envelope(T: float) -> EnvelopeSet:
    return EnvelopeSet(1.0, 1.0, 0.5, 0.5, T)


@dataclass(frozen=True)
class ClosedFormSolution:
    """``y(t) = A (t - T)**gamma`` for ``t >= T`` and zero before."""

    A: float
    gamma: float
    T: float
    beta: float

    def __call__(self, t):
        tt = np.asarray(t, dtype=np.float64)
        out = self.A * np.maximum(tt - self.T, 0.0) ** self.gamma
        return float(out) if out.ndim == 0 else out

    def abel(self, t):
        """``int_T^t y(s) (t - s)**-beta ds`` in closed form."""
        tt = np.asarray(t, dtype=np.float64)
        scale = self.A * beta_fn(self.gamma + 1, 1 - self.beta)
        out = scale * np.maximum(tt - self.T, 0.0) ** (self.gamma + 1 - self.beta)
        return float(out) if out.ndim == 0 else out


def closed_form_power_solution(c_g: float, d: float, beta: float, T: float) -> ClosedFormSolution:
    if not 0.0 < d < 1.0:
        raise DomainError(f"exponent must lie in (0, 1): {d!r}")
    if not c_g > 0:
        raise DomainError(f"coefficient must be positive: {c_g!r}")
    if not 0.0 <= beta < 1.0:
        raise DomainError(f"beta must lie in [0, 1): {beta!r}")
    gamma = power_solution_exponent(d, beta)
    A = (c_g * beta_fn(gamma + 1, 1 - beta) ** d) ** (1.0 / (1.0 - d))
    return ClosedFormSolution(A, gamma, float(T), float(beta))


def closed_form_for(g: NonlinearitySpec, beta: float, T: float) -> ClosedFormSolution:
    if g.kind != POWER_LAW:
        raise ConfigurationError("oracle requires power-law g")
    return closed_form_power_solution(g.coefficient, g.exponent, beta, T)


# {{{ operator


class _Operator:
    """Discrete operator on a fixed mesh; caches the weight matrix."""

    def __init__(self, g: NonlinearitySpec, beta: float, T: float, mesh: Mesh):
        self.g = g
        self.beta = float(beta)
        self.mesh = mesh
        self.i0 = mesh.index_of(T)
        self.T = float(mesh.nodes[self.i0])
        sub = Mesh(mesh.nodes[self.i0:])
        self.W = abel_weight_matrix(sub, self.beta)

    def inner(self, values: np.ndarray) -> np.ndarray:
        out = np.zeros_like(values)
        out[self.i0:] = self.W @ values[self.i0:]
        return out

    def __call__(self, values: np.ndarray) -> np.ndarray:
        J = self.inner(values)
        bad = np.flatnonzero(~np.isfinite(J) | (J < 0) | (J > self.g.u_max))
        if bad.size:
            i = int(bad[0])
            raise RangeError(
                f"inner integral {J[i]!r} at node t={self.mesh.nodes[i]!r} "
                f"is outside [0, {self.g.u_max}]"
            )
        out = np.asarray(eval_g(self.g, J), dtype=np.float64)
        out[: self.i0] = 0.0
        return out


def apply_operator(g: NonlinearitySpec, beta: float, T: float, y: GridFunction) -> GridFunction:
    """Nodal values of ``g(int_T^t y(s)(t-s)**-beta ds)``.

    ``T`` must be a node of ``y.mesh``; nodes left of ``T`` map to zero.
    """
    return GridFunction(y.mesh, _Operator(g, beta, T, y.mesh)(y.values))


# }}}


# {{{ envelope membership


@dataclass(frozen=True)
class EnvelopeVerdict:
    passed: bool
    lower_margin: float
    """min over nodes of ``y - lower``."""
    upper_margin: float
    """min over nodes of ``upper - y``."""
    worst_t: float


def envelope_check(y: GridFunction, env: EnvelopeSet, *, rtol: float = 1e-12) -> EnvelopeVerdict:
    """Check both envelope inequalities at every node in ``[T, 1]``."""
    t = y.mesh.nodes
    mask = t >= env.T
    if not np.any(mask):
        raise DomainError("no nodes in [T, 1]")
    t, v = t[mask], y.values[mask]
    lo, hi = env.lower(t), env.upper(t)
    dl, du = v - lo, hi - v
    slack = rtol * np.maximum(np.abs(lo), np.abs(hi))

    worst = np.minimum(dl + slack, du + slack)
    i = int(np.argmin(worst))
    passed = bool(worst[i] >= 0.0)
    return EnvelopeVerdict(passed, float(np.min(dl)), float(np.min(du)), float(t[i]))


# }}}


# {{{ Picard iteration


@dataclass
class IterationTrace:
    """Per-iteration record of a Picard solve.

    ``distances[n]`` is ``d(y_n, y_{n+1})``, which is also the fixed-point
    residual of ``y_n``. The returned iterate is the last ``y_n``.
    """

    distances: list[float] = field(default_factory=list)
    envelope_pass: list[bool | None] = field(default_factory=list)
    converged: bool = False
    residual: float = math.inf

    @property
    def iterations(self) -> int:
        return len(self.distances)

    def ratios(self) -> np.ndarray:
        d = np.asarray(self.distances)
        with np.errstate(divide="ignore", invalid="ignore"):
            return d[1:] / d[:-1]

    def to_csv(self, path: str | Path) -> None:
        """Rows ``iter,distance,residual,envelope_pass``.

        ``distance`` is ``d(y_{n-1}, y_n)`` (empty for ``n = 0``) and
        ``residual`` is ``d(y_n, O(y_n))``.
        """
        rows = []
        for n, (res, env) in enumerate(zip(self.distances, self.envelope_pass)):
            rows.append((
                n,
                "" if n == 0 else "%.17g" % self.distances[n - 1],
                "%.17g" % res,
                "" if env is None else str(env).lower(),
            ))
        write_columns_csv(path, ("iter", "distance", "residual", "envelope_pass"),
                          tuple(zip(*rows)) if rows else ((), (), (), ()))


def picard_solve(
    g: NonlinearitySpec,
    beta: float,
    T: float,
    mesh: Mesh,
    init: str | GridFunction = LOWER_ENVELOPE,
    tol: float = 1e-10,
    max_iter: int = 500,
    *,
    env: EnvelopeSet | None = None,
) -> tuple[GridFunction, IterationTrace]:
    """Iterate ``y_{n+1} = O(y_n)`` until ``d(y_n, O(y_n)) <= tol``.

    ``init`` is ``"lower-envelope"`` (the default), ``"zero"`` or a grid
    function on ``mesh``. Without ``env`` the lower envelope is
    ``(t - T)**1.5``. Non-convergence after ``max_iter`` steps is reported
    through ``trace.converged``; non-finite iterates raise
    :class:`NumericalFailureError`.
    """
    if not tol > 0:
        raise ConfigurationError(f"tol must be positive: {tol!r}")
    if max_iter < 1:
        raise ConfigurationError(f"max_iter must be >= 1: {max_iter!r}")
    if not math.isclose(mesh.b, 1.0, rel_tol=0, abs_tol=1e-14):
        raise ConfigurationError(f"mesh must end at t=1, got {mesh.b!r}")

    op = _Operator(g, beta, T, mesh)
    if isinstance(init, GridFunction):
        if not np.array_equal(init.mesh.nodes, mesh.nodes):
            raise ConfigurationError("initial iterate lives on a different mesh")
        y = init.values.copy()
    elif init == LOWER_ENVELOPE:
        y = (env or default_envelope(op.T)).lower(mesh.nodes)
    elif init == ZERO:
        y = np.zeros_like(mesh.nodes)
    else:
        raise ConfigurationError(f"unknown init: {init!r}")

    trace = IterationTrace()
    for _ in range(max_iter):
        y_next = op(y)
        if not np.all(np.isfinite(y_next)):
            raise NumericalFailureError(f"non-finite iterate after {trace.iterations} steps")
        dist = float(np.max(np.abs(y_next - y)))
        trace.distances.append(dist)
        trace.envelope_pass.append(
            None if env is None else envelope_check(GridFunction(mesh, y), env).passed
        )
        if dist <= tol:
            trace.converged = True
            break
        y = y_next

    trace.residual = trace.distances[-1]
    if not trace.converged:
        log.warning("picard_solve: no convergence after %d iterations (residual %.3e)",
                    max_iter, trace.residual)
    return GridFunction(mesh, y), trace


# }}}


# {{{ empirical contraction


def random_envelope_member(mesh: Mesh, env: EnvelopeSet, rng: np.random.Generator,
                           knots: int = 8) -> GridFunction:
    """``theta lower + (1 - theta) upper`` with a random piecewise linear ``theta`` in ``[0, 1]``."""
    t = mesh.nodes
    tk = np.linspace(env.T, 1.0, knots)
    theta = np.interp(t, tk, rng.random(knots))
    y = theta * env.lower(t) + (1.0 - theta) * env.upper(t)
    y[t < env.T] = 0.0
    return GridFunction(mesh, y)


@dataclass(frozen=True)
class ContractionEstimate:
    k_hat: float
    ratios: np.ndarray = field(repr=False)
    resampled: int


def empirical_contraction(
    g: NonlinearitySpec,
    beta: float,
    T: float,
    mesh: Mesh,
    env: EnvelopeSet,
    n_trials: int = 100,
    seed: int = 0,
) -> ContractionEstimate:
    """Largest observed ``d(O y1, O y2) / d(y1, y2)`` over random pairs in the envelope set."""
    if n_trials < 2:
        raise ConfigurationError(f"n_trials must be >= 2: {n_trials!r}")
    op = _Operator(g, beta, T, mesh)
    rng = np.random.default_rng(seed)

    ratios = []
    resampled = 0
    while len(ratios) < n_trials:
        y1 = random_envelope_member(mesh, env, rng).values
        y2 = random_envelope_member(mesh, env, rng).values
        d = float(np.max(np.abs(y1 - y2)))
        # differences at rounding level carry no information about the ratio
        if d <= 1e-13 * max(float(np.max(np.abs(y1))), float(np.max(np.abs(y2))), 1e-300):
            resampled += 1
            if resampled > 100 * n_trials:
                raise NumericalFailureError("envelope set is degenerate on this mesh")
            continue
        ratios.append(float(np.max(np.abs(op(y1) - op(y2)))) / d)

    ratios = np.array(ratios)
    return ContractionEstimate(float(np.max(ratios)), ratios, resampled)


# }}}
