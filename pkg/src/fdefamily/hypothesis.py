r"""The constant system ``(Y1, Y2, T, eps1, eps2, k)`` and a search for feasible values.

Given ``beta`` and envelope constants ``(c1, c2, delta1, delta2, c)`` a
certificate fixes ``Y1, Y2 >= 1`` and ``T`` in ``(0, 1)``. It is valid when
all of

* ``2/(3 - beta) > delta1 >= delta2 > 1/(2 - beta)``
* ``(Y1 + Y2) (1 - T)**(2 - beta) < 1 - beta``
* ``8 Y1 <= c1 <= c2 <= (1 - beta) Y2**(1 - delta2)``
* ``k = c/(1 - beta)**delta1 * (8/Y1)**(1 - delta1) < 1``

hold. The sum
``Y1 B(2+eps1, 1-beta) (1-T)**(2+eps1-beta) + Y2 B(2+eps2, 1-beta) (1-T)**(2+eps2-beta) < 1``
then follows and is reported as well.

Note that a nonlinearity obeying the weighted Lipschitz bound with constant
``c`` and ``g(1) >= c1`` must have ``c >= delta1 * c1``; see
:func:`lipschitz_floor`.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from fdefamily.errors import ConfigurationError, DomainError, InfeasibleExponentError
from fdefamily.nonlinearity import NonlinearityEnvelope, NonlinearitySpec, envelope_for
from fdefamily.specfun import STRICT_TOL, admissible_delta_range, beta_fn, invert_envelope_map
from fdefamily.quadrature import format_float


def contraction_constant(c_lip: float, beta: float, delta1: float, Y1: float) -> float:
    return c_lip / (1.0 - beta) ** delta1 * (8.0 / Y1) ** (1.0 - delta1)


def lipschitz_floor(env: NonlinearityEnvelope) -> float:
    """Smallest weighted Lipschitz constant compatible with ``g >= c1 u**delta1``.

    Telescoping the Lipschitz bound along ``u, qu, q**2 u, ...`` and letting
    ``q -> 1`` gives ``g(1) <= c/delta1``.
    """
    return env.delta1 * env.c1


@dataclass(frozen=True)
class HypothesisCertificate:
    beta: float
    env: NonlinearityEnvelope
    Y1: float
    Y2: float
    T: float
    eps1: float
    eps2: float
    k: float

    @classmethod
    def build(cls, beta: float, env: NonlinearityEnvelope,
              Y1: float, Y2: float, T: float) -> HypothesisCertificate:
        """Derive ``eps1``, ``eps2`` and ``k`` from the free constants."""
        eps1 = invert_envelope_map(env.delta1, beta)
        eps2 = invert_envelope_map(env.delta2, beta)
        k = contraction_constant(env.c_lip, beta, env.delta1, Y1)
        return cls(float(beta), env, float(Y1), float(Y2), float(T), eps1, eps2, k)

    def __post_init__(self) -> None:
        if not 0.0 < self.beta < 1.0:
            raise DomainError(f"beta must lie in (0, 1): {self.beta!r}")
        if not 0.0 < self.T < 1.0:
            raise DomainError(f"T must lie in (0, 1): {self.T!r}")
        if not (self.Y1 > 0 and self.Y2 > 0):
            raise DomainError("Y1 and Y2 must be positive")
        if self.eps1 < self.eps2:
            raise DomainError(f"need eps1 >= eps2: {self.eps1!r} < {self.eps2!r}")
        for name in ("eps1", "eps2"):
            if not 0.0 < getattr(self, name) < 1.0:
                raise DomainError(f"{name} must lie in (0, 1)")

    # {{{ key=value serialization

    _KEYS = ("beta", "c1", "c2", "delta1", "delta2", "c_lip", "Y1", "Y2", "T",
             "eps1", "eps2", "k")

    def to_text(self) -> str:
        d = {**asdict(self.env), **{k: v for k, v in asdict(self).items() if k != "env"}}
        return "".join(f"{key}={format_float(d[key])}\n" for key in self._KEYS)

    @classmethod
    def from_text(cls, text: str) -> HypothesisCertificate:
        d: dict[str, float] = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ConfigurationError(f"line {lineno}: expected key=value: {line!r}")
            d[key.strip()] = float(value)
        missing = [key for key in cls._KEYS if key not in d]
        if missing:
            raise ConfigurationError(f"certificate is missing {missing}")
        env = NonlinearityEnvelope(d["c1"], d["c2"], d["delta1"], d["delta2"], d["c_lip"])
        return cls(d["beta"], env, d["Y1"], d["Y2"], d["T"], d["eps1"], d["eps2"], d["k"])

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_text(), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> HypothesisCertificate:
        return cls.from_text(Path(path).read_text(encoding="utf-8"))

    # }}}


# {{{ condition evaluation


@dataclass(frozen=True)
class Condition:
    name: str
    expr: str
    lhs: float
    rhs: float
    strict: bool

    @property
    def margin(self) -> float:
        """``rhs - lhs`` in the native scale of the inequality ``lhs < rhs``."""
        return self.rhs - self.lhs

    @property
    def passed(self) -> bool:
        m = self.margin
        return bool(m > STRICT_TOL) if self.strict else bool(m >= 0.0)

    def as_dict(self) -> dict:
        return {"tag": self.name, "expr": self.expr, "lhs": self.lhs, "rhs": self.rhs,
                "margin": self.margin, "pass": self.passed}


#: canonical order; the first failing entry is reported as binding
CONDITION_NAMES = (
    "delta1_upper", "delta_order", "delta2_lower",
    "Y1_floor", "Y2_floor",
    "decay_budget", "lower_growth", "c_order", "upper_growth",
    "contraction", "unit_embedding",
)


def _exponent_conditions(beta: float, env: NonlinearityEnvelope) -> list[Condition]:
    lo, hi = admissible_delta_range(beta)
    return [
        Condition("delta1_upper", "delta1 < 2/(3-beta)", env.delta1, hi, True),
        Condition("delta_order", "delta2 <= delta1", env.delta2, env.delta1, False),
        Condition("delta2_lower", "1/(2-beta) < delta2", lo, env.delta2, True),
    ]


def _unit_embedding_terms(cert: HypothesisCertificate) -> tuple[float, float]:
    b = cert.beta
    t1 = cert.Y1 * beta_fn(2 + cert.eps1, 1 - b) * (1 - cert.T) ** (2 + cert.eps1 - b)
    t2 = cert.Y2 * beta_fn(2 + cert.eps2, 1 - b) * (1 - cert.T) ** (2 + cert.eps2 - b)
    return t1, t2


def _certificate_conditions(cert: HypothesisCertificate) -> list[Condition]:
    b, env = cert.beta, cert.env
    t1, t2 = _unit_embedding_terms(cert)
    return _exponent_conditions(b, env) + [
        Condition("Y1_floor", "1 <= Y1", 1.0, cert.Y1, False),
        Condition("Y2_floor", "1 <= Y2", 1.0, cert.Y2, False),
        Condition("decay_budget", "(Y1+Y2)(1-T)^(2-beta) < 1-beta",
                  (cert.Y1 + cert.Y2) * (1 - cert.T) ** (2 - b), 1 - b, True),
        Condition("lower_growth", "8*Y1 <= c1", 8 * cert.Y1, env.c1, False),
        Condition("c_order", "c1 <= c2", env.c1, env.c2, False),
        Condition("upper_growth", "c2 <= (1-beta)*Y2^(1-delta2)",
                  env.c2, (1 - b) * cert.Y2 ** (1 - env.delta2), False),
        Condition("contraction", "k = c/(1-beta)^delta1 * (8/Y1)^(1-delta1) < 1",
                  cert.k, 1.0, True),
        Condition("unit_embedding",
                  "Y1*B(2+eps1,1-beta)(1-T)^(2+eps1-beta)"
                  " + Y2*B(2+eps2,1-beta)(1-T)^(2+eps2-beta) < 1",
                  t1 + t2, 1.0, True),
    ]


@dataclass(frozen=True)
class HypothesisReport:
    conditions: tuple[Condition, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.conditions)

    @property
    def failed(self) -> list[Condition]:
        return [c for c in self.conditions if not c.passed]

    @property
    def min_margin(self) -> float:
        return min(c.margin for c in self.conditions)

    @property
    def binding(self) -> Condition:
        """First failing condition in canonical order, else the tightest one."""
        failed = self.failed
        if failed:
            return failed[0]
        return min(self.conditions, key=lambda c: c.margin)

    def __getitem__(self, name: str) -> Condition:
        for c in self.conditions:
            if c.name == name:
                return c
        raise KeyError(name)

    def as_dict(self) -> dict:
        return {
            "pass": self.passed,
            "binding": self.binding.name,
            "binding_expr": self.binding.expr,
            "conditions": [c.as_dict() for c in self.conditions],
        }


def check_exponents(beta: float, env: NonlinearityEnvelope) -> HypothesisReport:
    """Report on the exponent ordering alone; usable when no certificate can be built."""
    return HypothesisReport(tuple(_exponent_conditions(beta, env)))


def check_certificate(cert: HypothesisCertificate) -> HypothesisReport:
    """Evaluate every hypothesis on the constants with its margin."""
    return HypothesisReport(tuple(_certificate_conditions(cert)))


@dataclass(frozen=True)
class UnitEmbedding:
    passed: bool
    lower_term: float
    upper_term: float


def derive_unit_embedding(cert: HypothesisCertificate) -> UnitEmbedding:
    """Both Abel-integral bounds at ``t = 1`` and whether their sum is below one.

    Because ``B(2+eps, 1-beta) <= 1/(1-beta)`` and ``(1-T)**eps <= 1`` the sum
    never exceeds ``(Y1+Y2)(1-T)**(2-beta)/(1-beta)``, so this passes whenever
    the decay budget does.
    """
    t1, t2 = _unit_embedding_terms(cert)
    return UnitEmbedding(bool(1.0 - (t1 + t2) > STRICT_TOL), t1, t2)


# }}}


# {{{ search


@dataclass(frozen=True)
class SearchRanges:
    """Box for ``(Y1, Y2, T)``; ``Y`` axes are log-spaced, ``T`` is spaced in ``log(1 - T)``."""

    Y1: tuple[float, float] = (1.0, 1e6)
    Y2: tuple[float, float] = (1.0, 1e8)
    T: tuple[float, float] = (1e-3, 1.0 - 1e-9)
    grid: int = 40
    refine_starts: int = 8
    refine_steps: int = 300

    def __post_init__(self) -> None:
        for name in ("Y1", "Y2"):
            lo, hi = getattr(self, name)
            if not lo >= 1.0:
                raise ConfigurationError(f"{name} range must respect {name} >= 1: {lo!r}")
            if not lo <= hi:
                raise ConfigurationError(f"empty {name} range: ({lo!r}, {hi!r})")
        lo, hi = self.T
        if not 0.0 < lo <= hi < 1.0:
            raise ConfigurationError(f"T range must be a nonempty part of (0, 1): {self.T!r}")
        if self.grid < 2 or self.refine_starts < 1 or self.refine_steps < 0:
            raise ConfigurationError("grid >= 2, refine_starts >= 1, refine_steps >= 0 required")


@dataclass(frozen=True)
class SearchResult:
    feasible: bool
    certificate: HypothesisCertificate | None
    report: HypothesisReport
    c_lip_source: str
    evidence: str = field(default="grid search, not a proof")

    @property
    def binding(self) -> Condition:
        return self.report.binding


def _batch_margins(beta, env, eps1, eps2, B1, B2, y1, y2, tt):
    """Margins of the free-constant conditions for arrays of ``(Y1, Y2, T)``."""
    one_t = 1.0 - tt
    k = contraction_constant(env.c_lip, beta, env.delta1, y1)
    return np.stack([
        y1 - 1.0,
        y2 - 1.0,
        (1 - beta) - (y1 + y2) * one_t ** (2 - beta),
        env.c1 - 8 * y1,
        np.full_like(y1, env.c2 - env.c1),
        (1 - beta) * y2 ** (1 - env.delta2) - env.c2,
        1.0 - k,
        1.0 - (y1 * B1 * one_t ** (2 + eps1 - beta) + y2 * B2 * one_t ** (2 + eps2 - beta)),
    ])


_STRICT_ROWS = np.array([False, False, True, False, False, False, True, True])


def _scores(margins: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    ok = np.where(_STRICT_ROWS[:, None], margins > STRICT_TOL, margins >= 0.0)
    return np.sum(~ok, axis=0), np.min(margins, axis=0)


def search_feasible(
    spec: NonlinearitySpec | None,
    beta: float,
    ranges: SearchRanges | None = None,
    seed: int = 0,
    *,
    env: NonlinearityEnvelope | None = None,
    c_lip: float | None = None,
    delta1: float | None = None,
    delta2: float | None = None,
) -> SearchResult:
    """Search ``(Y1, Y2, T)`` for a certificate.

    Candidates are ranked by the number of violated conditions and then by
    the smallest margin. A coarse grid over ``ranges`` is followed by a
    randomized pattern search from the best grid points (driven by ``seed``).
    The result is deterministic in its arguments. When no certificate
    satisfies everything, the least infeasible one is returned and its first
    failing condition is the binding constraint.
    """
    ranges = SearchRanges() if ranges is None else ranges
    if env is None:
        if spec is None:
            raise ConfigurationError("need a nonlinearity or an envelope")
        env, source = envelope_for(spec, delta1, delta2, c_lip=c_lip)
    else:
        source = "user"
        if c_lip is not None:
            env = NonlinearityEnvelope(env.c1, env.c2, env.delta1, env.delta2, float(c_lip))

    try:
        eps1 = invert_envelope_map(env.delta1, beta)
        eps2 = invert_envelope_map(env.delta2, beta)
    except InfeasibleExponentError:
        return SearchResult(False, None, check_exponents(beta, env), source)
    if env.delta1 < env.delta2:
        return SearchResult(False, None, check_exponents(beta, env), source)

    B1 = beta_fn(2 + eps1, 1 - beta)
    B2 = beta_fn(2 + eps2, 1 - beta)

    lo = np.array([math.log(ranges.Y1[0]), math.log(ranges.Y2[0]), math.log(1 - ranges.T[1])])
    hi = np.array([math.log(ranges.Y1[1]), math.log(ranges.Y2[1]), math.log(1 - ranges.T[0])])

    def to_point(z: np.ndarray):
        return np.exp(z[0]), np.exp(z[1]), 1.0 - np.exp(z[2])

    def evaluate(z: np.ndarray):
        y1, y2, tt = to_point(z)
        return _scores(_batch_margins(beta, env, eps1, eps2, B1, B2, y1, y2, tt))

    axes = [np.linspace(lo[i], hi[i], ranges.grid) for i in range(3)]
    Z = np.stack([a.ravel() for a in np.meshgrid(*axes, indexing="ij")])
    nviol, mmin = evaluate(Z)
    order = np.lexsort((-mmin, nviol))[: ranges.refine_starts]

    rng = np.random.default_rng(seed)
    width = hi - lo
    best = None
    for idx in order:
        z = Z[:, idx].copy()
        key = (int(nviol[idx]), -float(mmin[idx]))
        step = width / ranges.grid
        for _ in range(ranges.refine_steps):
            cand = np.clip(z + step * rng.standard_normal(3), lo, hi)
            nv, mm = evaluate(cand[:, None])
            ckey = (int(nv[0]), -float(mm[0]))
            if ckey < key:
                z, key = cand, ckey
                step = step * 1.5
            else:
                step = step * 0.9
        if best is None or key < best[0]:
            best = (key, z)

    y1, y2, tt = (float(v) for v in to_point(best[1]))
    cert = HypothesisCertificate.build(beta, env, y1, y2, tt)
    report = check_certificate(cert)
    return SearchResult(report.passed, cert, report, source)


# }}}
