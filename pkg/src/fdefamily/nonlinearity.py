r"""Nonlinearities ``g`` and sampled checks of the structural conditions on them.

Three conditions are checked numerically:

* the two-sided power envelope :math:`c_1 u^{\delta_1} \le g(u) \le c_2 u^{\delta_2}`
  on :math:`[0, 1]`;
* the weighted Lipschitz bound
  :math:`|g(u) - g(v)| \le c\,\min(u, v)^{\delta_1 - 1} |u - v|` on :math:`(0, 1]^2`;
* convergence of :math:`\int_{0+}^1 du / g(u)`, the classical criterion for
  non-uniqueness at a zero of ``g``.

All three are *sampled* checks. None of them is a proof.

Convention: the equation ``y = g(J[y])`` uses a ``g`` that already contains the
factor ``1/Gamma(alpha)``. :func:`absorb_gamma` turns the nonlinearity
``g_tilde`` of ``x^(alpha) = g_tilde(x)`` into that ``g``, and
:func:`release_gamma` goes back.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import integrate

from fdefamily.errors import (
    ConfigurationError,
    DomainError,
    InfeasibleExponentError,
    SingularIntegrandError,
)
from fdefamily.specfun import STRICT_TOL, admissible_delta_range, gamma_fn

POWER_LAW = "power-law"
TABLE = "table"


@dataclass(frozen=True, eq=False)
class NonlinearitySpec:
    """A nonlinearity ``g`` on ``[0, u_max]`` with ``g(0) = 0`` and ``g > 0`` on ``(0, 1]``.

    Use :meth:`power_law` or :meth:`table` to build one.
    """

    kind: str
    coefficient: float = 1.0
    exponent: float = 0.5
    abscissae: np.ndarray | None = field(default=None, repr=False)
    ordinates: np.ndarray | None = field(default=None, repr=False)
    u_max: float = math.inf

    @classmethod
    def power_law(cls, coefficient: float, exponent: float) -> NonlinearitySpec:
        return cls(POWER_LAW, float(coefficient), float(exponent))

    @classmethod
    def table(cls, u, g) -> NonlinearitySpec:
        u = np.array(u, dtype=np.float64)
        g = np.array(g, dtype=np.float64)
        return cls(TABLE, abscissae=u, ordinates=g, u_max=float(u[-1]) if u.size else 0.0)

    @classmethod
    def from_csv(cls, path: str | Path) -> NonlinearitySpec:
        """Read a table with header ``u,g``."""
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [h.strip() for h in header] != ["u", "g"]:
                raise ConfigurationError(f"{path}: expected header 'u,g', got {header}")
            rows = [(float(r[0]), float(r[1])) for r in reader if r]
        if not rows:
            raise ConfigurationError(f"{path}: empty table")
        u, g = zip(*rows)
        return cls.table(u, g)

    def __post_init__(self) -> None:
        if self.kind == POWER_LAW:
            if not (self.coefficient > 0 and math.isfinite(self.coefficient)):
                raise ConfigurationError(f"coefficient must be positive: {self.coefficient!r}")
            if not 0.0 < self.exponent < 1.0:
                raise ConfigurationError(f"exponent must lie in (0, 1): {self.exponent!r}")
            if not self.u_max >= 1.0:
                raise ConfigurationError(f"u_max must be >= 1: {self.u_max!r}")
        elif self.kind == TABLE:
            u, g = self.abscissae, self.ordinates
            if u is None or g is None or u.ndim != 1 or u.shape != g.shape or u.size < 2:
                raise ConfigurationError("table needs matching 1d abscissae and ordinates")
            if not (np.all(np.isfinite(u)) and np.all(np.isfinite(g))):
                raise ConfigurationError("table entries must be finite")
            if u[0] != 0.0 or g[0] != 0.0:
                raise ConfigurationError("table must start at (0, 0) so that g(0) = 0")
            if not np.all(np.diff(u) > 0):
                raise ConfigurationError("table abscissae must be strictly increasing")
            if u[-1] < 1.0:
                raise ConfigurationError("table must cover [0, 1]")
            if np.any(g[1:] < 0) or np.any(g[1:][u[1:] <= 1.0] <= 0):
                raise ConfigurationError("table ordinates must be positive on (0, 1]")
            u.setflags(write=False)
            g.setflags(write=False)
            object.__setattr__(self, "u_max", float(u[-1]))
        else:
            raise ConfigurationError(f"unknown nonlinearity kind: {self.kind!r}")

    def __call__(self, u):
        return eval_g(self, u)

    def scaled(self, arg_scale: float, out_scale: float) -> NonlinearitySpec:
        """The nonlinearity ``u -> out_scale * g(arg_scale * u)``."""
        if not (arg_scale > 0 and out_scale > 0):
            raise ConfigurationError("scales must be positive")
        if self.kind == POWER_LAW:
            c = out_scale * self.coefficient * arg_scale**self.exponent
            return NonlinearitySpec(POWER_LAW, c, self.exponent, u_max=self.u_max / arg_scale)
        return NonlinearitySpec.table(self.abscissae / arg_scale, self.ordinates * out_scale)

    def describe(self) -> str:
        if self.kind == POWER_LAW:
            return f"{self.coefficient!r}*u**{self.exponent!r}"
        return f"table({self.abscissae.size} points on [0, {self.u_max!r}])"


def eval_g(spec: NonlinearitySpec, u):
    """Evaluate ``g`` (scalar or array) on ``[0, spec.u_max]``."""
    uu = np.asarray(u, dtype=np.float64)
    if np.any(~np.isfinite(uu)) or np.any(uu < 0) or np.any(uu > spec.u_max):
        raise DomainError(f"u outside [0, {spec.u_max}]")
    if spec.kind == POWER_LAW:
        out = spec.coefficient * np.power(uu, spec.exponent)
    else:
        out = np.interp(uu, spec.abscissae, spec.ordinates)
    return float(out) if out.ndim == 0 else out


def absorb_gamma(g_tilde: NonlinearitySpec, alpha: float) -> NonlinearitySpec:
    """``g(u) = g_tilde(u / Gamma(alpha))``, the form used by the solver."""
    return g_tilde.scaled(1.0 / gamma_fn(alpha), 1.0)


def release_gamma(g: NonlinearitySpec, alpha: float) -> NonlinearitySpec:
    """Inverse of :func:`absorb_gamma`: ``g_tilde(v) = g(Gamma(alpha) v)``."""
    return g.scaled(gamma_fn(alpha), 1.0)


# {{{ envelope


@dataclass(frozen=True)
class NonlinearityEnvelope:
    """Constants ``c1 u**delta1 <= g(u) <= c2 u**delta2`` and the weighted Lipschitz ``c_lip``."""

    c1: float
    c2: float
    delta1: float
    delta2: float
    c_lip: float

    def __post_init__(self) -> None:
        for name in ("c1", "c2", "c_lip"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ConfigurationError(f"{name} must be positive and finite: {v!r}")
        if not self.c1 <= self.c2:
            raise ConfigurationError(f"need c1 <= c2: {self.c1!r} > {self.c2!r}")
        for name in ("delta1", "delta2"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ConfigurationError(f"{name} must lie in (0, 1): {v!r}")

    def validate_exponents(self, beta: float) -> None:
        """Require ``f(1) > delta1 >= delta2 > f(0)`` for this ``beta``."""
        lo, hi = admissible_delta_range(beta)
        if not (hi - self.delta1 > STRICT_TOL and self.delta2 - lo > STRICT_TOL
                and self.delta1 >= self.delta2):
            raise InfeasibleExponentError(
                f"need {hi!r} > delta1 >= delta2 > {lo!r}, "
                f"got delta1={self.delta1!r}, delta2={self.delta2!r}"
            )


def sample_grid(n_samples: int, u_min: float = 1e-12) -> np.ndarray:
    """Log-spaced points in ``[u_min, 1]``; ``u = 1`` is always included."""
    if n_samples < 2:
        raise ConfigurationError("need at least two samples")
    u = np.logspace(math.log10(u_min), 0.0, int(n_samples))
    u[-1] = 1.0
    return u


@dataclass(frozen=True)
class EnvelopeReport:
    passed: bool
    lower_margin: float
    """min over samples of ``g(u) - c1 u**delta1``."""
    lower_worst_u: float
    upper_margin: float
    """min over samples of ``c2 u**delta2 - g(u)``."""
    upper_worst_u: float
    n_samples: int
    confidence: str = "sampled"


def check_envelope(
    spec: NonlinearitySpec,
    env: NonlinearityEnvelope,
    n_samples: int = 10_000,
    *,
    u_min: float = 1e-12,
    rtol: float = 1e-12,
) -> EnvelopeReport:
    """Sample both envelope inequalities on a log-spaced grid of ``(0, 1]``.

    A sample passes when its margin is at least ``-rtol * g(u)``, so that
    exact equality survives rounding.
    """
    u = sample_grid(n_samples, u_min)
    g = eval_g(spec, u)
    lower = g - env.c1 * np.power(u, env.delta1)
    upper = env.c2 * np.power(u, env.delta2) - g
    slack = rtol * np.maximum(np.abs(g), np.finfo(float).tiny)

    il, iu = int(np.argmin(lower)), int(np.argmin(upper))
    passed = bool(np.all(lower >= -slack) and np.all(upper >= -slack))
    return EnvelopeReport(
        passed=passed,
        lower_margin=float(lower[il]),
        lower_worst_u=float(u[il]),
        upper_margin=float(upper[iu]),
        upper_worst_u=float(u[iu]),
        n_samples=int(u.size),
    )


def envelope_for(
    spec: NonlinearitySpec,
    delta1: float | None = None,
    delta2: float | None = None,
    *,
    c_lip: float | None = None,
    n_samples: int = 10_000,
) -> tuple[NonlinearityEnvelope, str]:
    """Fit envelope constants for ``spec``; returns ``(envelope, c_lip_source)``.

    For a power law ``c u**d`` the exponents default to ``d`` and the constants
    are exact. Tables need explicit exponents; ``c1``/``c2`` are then the
    extreme sampled ratios ``g(u)/u**delta``. Unless ``c_lip`` is given it is
    taken from :func:`estimate_lipschitz_constant`.
    """
    if spec.kind == POWER_LAW:
        d1 = spec.exponent if delta1 is None else float(delta1)
        d2 = spec.exponent if delta2 is None else float(delta2)
    elif delta1 is None or delta2 is None:
        raise ConfigurationError("a tabulated g needs explicit delta1 and delta2")
    else:
        d1, d2 = float(delta1), float(delta2)

    if spec.kind == POWER_LAW and d1 == d2 == spec.exponent:
        c1 = c2 = spec.coefficient
    else:
        u = sample_grid(n_samples)
        g = eval_g(spec, u)
        c1 = float(np.min(g / u**d1))
        c2 = float(np.max(g / u**d2))

    if c_lip is None:
        c_lip = estimate_lipschitz_constant(spec, d1)
        source = "estimated"
    else:
        source = "user"
    return NonlinearityEnvelope(c1, c2, d1, d2, float(c_lip)), source


# }}}


# {{{ weighted Lipschitz constant


def _lipschitz_pairs(n_pairs: int, seed: int, u_min: float) -> tuple[np.ndarray, np.ndarray]:
    # rows are consumed in order, so the first m pairs do not depend on n_pairs
    rng = np.random.default_rng(seed)
    r = rng.random((int(n_pairs), 3))
    lmin = math.log(u_min)
    y1 = np.exp(lmin * (1.0 - r[:, 0]))

    # even rows: independent partner; odd rows: relative offset 10**-(0..7)
    far = np.exp(lmin * (1.0 - r[:, 1]))
    rel = 10.0 ** (-7.0 * r[:, 1])
    near = np.where(r[:, 2] < 0.5, y1 * (1.0 - rel), np.minimum(y1 * (1.0 + rel), 1.0))
    odd = (np.arange(y1.size) % 2).astype(bool)
    y2 = np.where(odd, near, far)
    return y1, y2


def estimate_lipschitz_constant(
    spec: NonlinearitySpec,
    delta1: float,
    n_pairs: int = 100_000,
    *,
    seed: int = 0,
    u_min: float = 1e-12,
) -> float:
    """Largest sampled ``|g(y2) - g(y1)| min(y1, y2)**(1 - delta1) / |y2 - y1|``.

    Pairs are log-uniform in ``[u_min, 1]``; every other pair is a close
    neighbour so that the derivative regime is probed. The sample sequence is
    nested in ``n_pairs``, hence the estimate is nondecreasing in ``n_pairs``.
    Degenerate pairs are skipped.
    """
    if not 0.0 < delta1 < 1.0:
        raise DomainError(f"delta1 must lie in (0, 1): {delta1!r}")
    y1, y2 = _lipschitz_pairs(n_pairs, seed, u_min)
    keep = y1 != y2
    y1, y2 = y1[keep], y2[keep]
    if y1.size == 0:
        return 0.0
    ratio = (
        np.abs(eval_g(spec, y2) - eval_g(spec, y1))
        * np.minimum(y1, y2) ** (1.0 - delta1)
        / np.abs(y2 - y1)
    )
    return float(np.max(ratio))


# }}}


# {{{ integral criterion


@dataclass(frozen=True)
class OsgoodResult:
    """Outcome of :func:`osgood_integral`."""

    value: float
    """Extrapolated ``int_{0+}^1 du/g(u)``; ``inf`` when divergent."""
    diverged: bool
    cuts: np.ndarray = field(repr=False)
    partials: np.ndarray = field(repr=False)
    """``int_{cut}^1 du/g(u)`` for each cut."""


def _inverse_integral(spec: NonlinearitySpec, lo: float, hi: float) -> float:
    # integrate u/g(u) in log u, which is smooth for power laws
    def fn(s: float) -> float:
        u = math.exp(s)
        gu = eval_g(spec, u)
        if gu <= 0.0:
            raise SingularIntegrandError(f"g vanishes at u={u!r}")
        return u / gu

    points = None
    if spec.kind == TABLE:
        inner = spec.abscissae[(spec.abscissae > lo) & (spec.abscissae < hi)]
        points = list(np.log(inner)) or None
    val, _ = integrate.quad(fn, math.log(lo), math.log(hi), points=points,
                            limit=200, epsabs=0.0, epsrel=1e-13)
    return val


def osgood_integral(
    spec: NonlinearitySpec,
    lower_cut: float = 0.5,
    *,
    threshold: float = 0.1,
    window: int = 5,
    max_halvings: int = 200,
    rtol: float = 1e-13,
) -> OsgoodResult:
    """Decide whether ``int_{0+}^1 du/g(u)`` converges and estimate it.

    The cut is halved repeatedly starting from ``lower_cut``. The integral is
    declared divergent when each of the last ``window`` halvings added more
    than ``threshold``. Otherwise halving stops once an increment drops below
    ``rtol`` times the partial integral, and the limit is extrapolated from the
    geometric decay of the final increments.
    """
    if not 0.0 < lower_cut < 1.0:
        raise DomainError(f"lower_cut must lie in (0, 1): {lower_cut!r}")

    cuts = [float(lower_cut)]
    partials = [_inverse_integral(spec, lower_cut, 1.0)]
    increments: list[float] = []
    while len(increments) < max_halvings:
        cut = cuts[-1] / 2.0
        inc = _inverse_integral(spec, cut, cuts[-1])
        cuts.append(cut)
        partials.append(partials[-1] + inc)
        increments.append(inc)
        if inc <= rtol * abs(partials[-1]):
            break

    tail = increments[-window:]
    diverged = len(tail) == window and all(v > threshold for v in tail)
    if diverged:
        value = math.inf
    else:
        value = partials[-1]
        if len(increments) >= 2 and 0.0 < increments[-1] < increments[-2]:
            q = increments[-1] / increments[-2]
            value += increments[-1] * q / (1.0 - q)

    return OsgoodResult(value, diverged, np.array(cuts), np.array(partials))


# }}}
