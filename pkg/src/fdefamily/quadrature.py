r"""Meshes, grid functions and product-integration rules for the Abel kernel.

All rules share one interpolation contract: a grid function is the piecewise
linear interpolant of its nodal values, and every integral against the kernel
:math:`(t - s)^{-\beta}` is evaluated exactly for that interpolant, cell by
cell. On a cell :math:`[s_j, s_{j+1}]` with :math:`a = t - s_j`,
:math:`b = t - s_{j+1}` and :math:`h = a - b`,

.. math::

    \int_{s_j}^{s_{j+1}} \frac{y(s)}{(t - s)^\beta} ds
        = w_L y_j + w_R y_{j+1},
    \qquad
    w_R = \frac{1}{h} \int_b^a \tau^{-\beta} (a - \tau) d\tau,
    \quad
    w_L = I_0 - w_R,

where :math:`I_0 = (a^{1-\beta} - b^{1-\beta})/(1 - \beta)`. For
:math:`\beta = 0` this is the trapezoidal rule.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from fdefamily.errors import ConfigurationError, DomainError
from fdefamily.specfun import gamma_fn


# {{{ mesh and grid functions


@dataclass(frozen=True, eq=False)
class Mesh:
    """Strictly increasing nodes on ``[a, b]``."""

    nodes: np.ndarray
    grading: float | None = None
    """Grading exponent for meshes built by :func:`build_graded_mesh`."""

    def __post_init__(self) -> None:
        nodes = np.array(self.nodes, dtype=np.float64)
        if nodes.ndim != 1 or nodes.size < 2:
            raise ConfigurationError("a mesh needs at least two nodes")
        if not np.all(np.isfinite(nodes)):
            raise ConfigurationError("mesh nodes must be finite")
        if not np.all(np.diff(nodes) > 0):
            raise ConfigurationError("mesh nodes must be strictly increasing")
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @property
    def a(self) -> float:
        return float(self.nodes[0])

    @property
    def b(self) -> float:
        return float(self.nodes[-1])

    @property
    def n(self) -> int:
        """Number of cells."""
        return self.nodes.size - 1

    def index_of(self, t: float, *, rtol: float = 1e-12) -> int:
        """Index of the node equal to ``t`` (up to ``rtol``), else :class:`DomainError`."""
        i = int(np.argmin(np.abs(self.nodes - t)))
        if abs(self.nodes[i] - t) > rtol * max(1.0, abs(t)):
            raise DomainError(f"t={t!r} is not a mesh node")
        return i


def build_graded_mesh(a: float, b: float, n: int, r: float = 2.0) -> Mesh:
    """Nodes ``a + (b - a) (i/n)**r`` for ``i = 0, ..., n``.

    ``r = 1`` gives a uniform mesh; ``r > 1`` clusters nodes at ``a``.
    """
    if not a < b:
        raise ConfigurationError(f"need a < b: a={a!r}, b={b!r}")
    if int(n) != n or n < 2:
        raise ConfigurationError(f"need an integer n >= 2: n={n!r}")
    if not r >= 1.0:
        raise ConfigurationError(f"grading exponent must be >= 1: r={r!r}")

    n = int(n)
    nodes = a + (b - a) * (np.arange(n + 1) / n) ** r
    nodes[-1] = b
    return Mesh(nodes, grading=float(r))


def extend_mesh_left(mesh: Mesh, a: float, n: int) -> Mesh:
    """Prepend ``n`` uniform cells on ``[a, mesh.a]``."""
    if not a < mesh.a:
        raise ConfigurationError(f"need a < mesh.a: a={a!r}, mesh.a={mesh.a!r}")
    left = np.linspace(a, mesh.a, int(n) + 1)[:-1]
    return Mesh(np.concatenate([left, mesh.nodes]), grading=None)


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Nodal values on a mesh, interpreted as a piecewise linear function."""

    mesh: Mesh
    values: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=np.float64)
        if values.shape != self.mesh.nodes.shape:
            raise ConfigurationError(
                f"expected {self.mesh.nodes.size} values, got shape {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise ConfigurationError("grid function values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def t(self) -> np.ndarray:
        return self.mesh.nodes

    @classmethod
    def from_callable(cls, mesh: Mesh, fn) -> GridFunction:
        return cls(mesh, np.asarray(fn(mesh.nodes), dtype=np.float64))

    def __call__(self, t):
        """Evaluate the piecewise linear interpolant."""
        tt = np.asarray(t, dtype=np.float64)
        if np.any(tt < self.mesh.a) or np.any(tt > self.mesh.b):
            raise DomainError(f"evaluation outside [{self.mesh.a}, {self.mesh.b}]")
        out = np.interp(tt, self.mesh.nodes, self.values)
        return float(out) if out.ndim == 0 else out

    def sup_distance(self, other: GridFunction) -> float:
        """Nodal sup-distance; both functions must live on the same nodes."""
        if other.mesh is not self.mesh and not np.array_equal(
            other.mesh.nodes, self.mesh.nodes
        ):
            raise DomainError("grid functions live on different meshes")
        return float(np.max(np.abs(self.values - other.values)))

    def to_csv(self, path: str | Path) -> None:
        write_columns_csv(path, ("t", "value"), (self.mesh.nodes, self.values))

    @classmethod
    def from_csv(cls, path: str | Path) -> GridFunction:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if [h.strip() for h in header] != ["t", "value"]:
                raise ConfigurationError(f"{path}: expected header 't,value', got {header}")
            rows = [(float(r[0]), float(r[1])) for r in reader if r]
        arr = np.array(rows, dtype=np.float64)
        return cls(Mesh(arr[:, 0]), arr[:, 1])


def format_float(x: float) -> str:
    return "%.17g" % x


def write_columns_csv(path, header, columns) -> None:
    """Write equal-length columns as CSV (LF endings, 17 significant digits)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in zip(*columns):
            writer.writerow([format_float(v) if isinstance(v, float | np.floating)
                             else v for v in row])


# }}}


# {{{ product integration weights


def _check_beta(beta: float) -> float:
    beta = float(beta)
    if not 0.0 <= beta < 1.0:
        raise DomainError(f"beta must lie in [0, 1): {beta!r}")
    return beta


def _power_difference(a: np.ndarray, b: np.ndarray, p: float) -> np.ndarray:
    """``a**p - b**p`` for ``a > b >= 0`` without cancellation."""
    with np.errstate(divide="ignore"):
        return -(a**p) * np.expm1(p * np.log1p(-(a - b) / a))


def _row_weights(s: np.ndarray, beta: float) -> np.ndarray:
    """Weights ``w`` with ``sum(w * y) = int_{s[0]}^{s[-1]} y(s) (s[-1] - s)**-beta ds``."""
    t = s[-1]
    w = np.zeros_like(s)
    if s.size < 2:
        return w

    a = t - s[:-1]
    b = t - s[1:]
    h = a - b
    p1, p2 = 1.0 - beta, 2.0 - beta

    i0 = _power_difference(a, b, p1) / p1
    wr = (a * i0 - _power_difference(a, b, p2) / p2) / h
    wr = np.clip(wr, 0.0, i0)
    wl = i0 - wr

    w[:-1] += wl
    w[1:] += wr
    return w


def _cell_moments(s: np.ndarray, beta: float) -> np.ndarray:
    """``int_{s_j}^{s_{j+1}} (s[-1] - s)**-beta ds`` for every cell."""
    t = s[-1]
    a = t - s[:-1]
    b = t - s[1:]
    return _power_difference(a, b, 1.0 - beta) / (1.0 - beta)


def _truncate(mesh: Mesh, values: np.ndarray, t: float) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and interpolated values of the grid function restricted to ``[a, t]``."""
    k = int(np.searchsorted(mesh.nodes, t, side="left"))
    s = np.append(mesh.nodes[:k], t)
    if k < mesh.nodes.size and mesh.nodes[k] == t:
        v = values[: k + 1].copy()
    else:
        v = np.append(values[:k], np.interp(t, mesh.nodes, values))
    return s, v


def abel_weight_matrix(mesh: Mesh, beta: float) -> np.ndarray:
    """Lower-triangular matrix ``W`` with ``(W @ y)[i] = int_a^{t_i} y(s) (t_i - s)**-beta ds``."""
    beta = _check_beta(beta)
    nodes = mesh.nodes
    W = np.zeros((nodes.size, nodes.size))
    for i in range(1, nodes.size):
        W[i, : i + 1] = _row_weights(nodes[: i + 1], beta)
    return W


def abel_integral(y: GridFunction, beta: float, t: float) -> float:
    """Product-integration value of ``int_a^t y(s) (t - s)**-beta ds``.

    ``a`` is the left end of the mesh; ``t`` may fall between nodes.
    """
    beta = _check_beta(beta)
    mesh = y.mesh
    if not mesh.a <= t <= mesh.b:
        raise DomainError(f"t={t!r} outside [{mesh.a}, {mesh.b}]")
    if t == mesh.a:
        return 0.0
    s, v = _truncate(mesh, y.values, t)
    return float(_row_weights(s, beta) @ v)


def abel_integral_nodes(y: GridFunction, beta: float) -> np.ndarray:
    """:func:`abel_integral` at every node of ``y.mesh``."""
    return abel_weight_matrix(y.mesh, beta) @ y.values


def _check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not 0.0 < alpha <= 1.0:
        raise DomainError(f"alpha must lie in (0, 1]: {alpha!r}")
    return alpha


def rl_fractional_integral(y: GridFunction, alpha: float, t: float) -> float:
    """Riemann-Liouville integral of order ``alpha`` at ``t``."""
    alpha = _check_alpha(alpha)
    return abel_integral(y, 1.0 - alpha, t) / gamma_fn(alpha)


def rl_fractional_integral_nodes(y: GridFunction, alpha: float) -> GridFunction:
    alpha = _check_alpha(alpha)
    return GridFunction(y.mesh, abel_integral_nodes(y, 1.0 - alpha) / gamma_fn(alpha))


# }}}


# {{{ Caputo derivative


def _check_caputo_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1): {alpha!r}")
    return alpha


def caputo_derivative(h: GridFunction, alpha: float, t: float) -> float:
    """L1 approximation of the Caputo derivative of order ``alpha`` at ``t``.

    The derivative of ``h`` is taken piecewise constant per cell and the
    kernel ``(t - s)**-alpha`` is integrated exactly over each cell, which
    makes the rule exact for piecewise linear ``h``.
    """
    alpha = _check_caputo_alpha(alpha)
    mesh = h.mesh
    if not mesh.a < t <= mesh.b:
        raise DomainError(f"t={t!r} outside ({mesh.a}, {mesh.b}]")
    s, v = _truncate(mesh, h.values, t)
    slopes = np.diff(v) / np.diff(s)
    return float(_cell_moments(s, alpha) @ slopes) / gamma_fn(1.0 - alpha)


def caputo_derivative_nodes(h: GridFunction, alpha: float) -> np.ndarray:
    """:func:`caputo_derivative` at every node; the first entry is ``nan``."""
    alpha = _check_caputo_alpha(alpha)
    nodes = h.mesh.nodes
    slopes = np.diff(h.values) / np.diff(nodes)
    out = np.empty_like(nodes)
    out[0] = np.nan
    scale = 1.0 / gamma_fn(1.0 - alpha)
    for i in range(1, nodes.size):
        out[i] = scale * (_cell_moments(nodes[: i + 1], alpha) @ slopes[:i])
    return out


# }}}


def empirical_orders(errors) -> list[float]:
    """``log2(e_k / e_{k+1})`` for an error ladder where ``n`` doubles each step."""
    e = [float(x) for x in errors]
    return [math.log2(e[i] / e[i + 1]) for i in range(len(e) - 1)]
