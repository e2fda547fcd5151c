"""Gamma and Beta functions plus the exponent map used by the envelope bounds.

The exponent map is

.. math::

    f(x) = \\frac{1 + x}{2 + x - \\beta} = 1 - \\frac{1 - \\beta}{2 + x - \\beta},

which is strictly increasing on :math:`[0, 1]`. An envelope exponent
:math:`\\delta` is admissible when :math:`f(0) < \\delta < f(1)`; its
preimage :math:`\\varepsilon = f^{-1}(\\delta)` is the growth excess of the
matching envelope :math:`(t - T)^{1 + \\varepsilon}`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from fdefamily.errors import DomainError, InfeasibleExponentError

#: strict inequalities pass only with a margin larger than this
STRICT_TOL = 1e-12

# math.gamma and math.lgamma are Lanczos-type approximations with relative
# error of a few ulp on the positive axis.
_MAX_DIRECT_GAMMA_ARG = 170.0


def gamma_fn(x: float) -> float:
    """Euler Gamma function for ``x > 0``."""
    x = float(x)
    if not x > 0.0 or not math.isfinite(x):
        raise DomainError(f"gamma_fn requires a finite positive argument: {x!r}")
    return math.gamma(x)


def log_gamma_fn(x: float) -> float:
    x = float(x)
    if not x > 0.0 or not math.isfinite(x):
        raise DomainError(f"log_gamma_fn requires a finite positive argument: {x!r}")
    return math.lgamma(x)


def beta_fn(a: float, b: float) -> float:
    """Euler Beta function :math:`B(a, b) = \\Gamma(a)\\Gamma(b)/\\Gamma(a+b)`.

    Moderate arguments use the Gamma ratio directly, which is accurate to a few
    ulp. Once ``a + b`` would overflow :func:`math.gamma` the log-Gamma route is
    used instead.
    """
    a, b = float(a), float(b)
    if not (a > 0.0 and b > 0.0) or not (math.isfinite(a) and math.isfinite(b)):
        raise DomainError(f"beta_fn requires finite positive arguments: ({a!r}, {b!r})")
    if a + b < _MAX_DIRECT_GAMMA_ARG:
        return math.gamma(a) * math.gamma(b) / math.gamma(a + b)
    return math.exp(math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b))


def _check_beta(beta: float) -> float:
    beta = float(beta)
    if not 0.0 < beta < 1.0:
        raise DomainError(f"beta must lie in (0, 1): {beta!r}")
    return beta


def envelope_map(x: float, beta: float) -> float:
    """Evaluate ``f(x) = (1 + x)/(2 + x - beta)`` for ``x`` in ``[0, 1]``."""
    beta = _check_beta(beta)
    x = float(x)
    if not 0.0 <= x <= 1.0:
        raise DomainError(f"envelope_map is defined on [0, 1]: x={x!r}")
    return (1.0 + x) / (2.0 + x - beta)


def admissible_delta_range(beta: float) -> tuple[float, float]:
    """Return the open interval ``(f(0), f(1))`` of admissible exponents."""
    beta = _check_beta(beta)
    return 1.0 / (2.0 - beta), 2.0 / (3.0 - beta)


def invert_envelope_map(delta: float, beta: float) -> float:
    """Solve ``f(eps) = delta`` for ``eps`` in ``(0, 1)``.

    Raises :class:`InfeasibleExponentError` unless ``delta`` sits strictly
    (by more than :data:`STRICT_TOL`) inside ``(f(0), f(1))``.
    """
    lo, hi = admissible_delta_range(beta)
    delta = float(delta)
    if not (delta - lo > STRICT_TOL and hi - delta > STRICT_TOL):
        raise InfeasibleExponentError(
            f"delta={delta!r} is not strictly inside ({lo!r}, {hi!r}) for beta={beta!r}"
        )
    return (delta * (2.0 - beta) - 1.0) / (1.0 - delta)


def power_solution_exponent(delta: float, beta: float) -> float:
    """Exponent ``gamma = delta (1 - beta)/(1 - delta)`` of the power-law fixed point."""
    delta = float(delta)
    if not 0.0 < delta < 1.0:
        raise DomainError(f"delta must lie in (0, 1): {delta!r}")
    return delta * (1.0 - beta) / (1.0 - delta)


@dataclass(frozen=True)
class ExponentPair:
    """An admissible envelope exponent ``delta`` together with ``eps = f^{-1}(delta)``."""

    delta: float
    epsilon: float
    beta: float

    @classmethod
    def from_delta(cls, delta: float, beta: float) -> ExponentPair:
        return cls(float(delta), invert_envelope_map(delta, beta), float(beta))

    def __post_init__(self) -> None:
        if not (0.0 < self.delta < 1.0 and 0.0 < self.epsilon < 1.0):
            raise DomainError(f"exponents must lie in (0, 1): {self}")
        if abs(envelope_map(self.epsilon, self.beta) - self.delta) > 1e-12:
            raise DomainError(f"epsilon is not the preimage of delta: {self}")
