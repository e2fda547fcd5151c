"""Run configuration: INI-style ``key = value`` text with sections.

Example::

    [problem]
    beta = 0.5
    g = power-law
    g_coefficient = 1
    g_exponent = 0.5
    T = 0.5
    convention = divided-by-gamma

    [mesh]
    n = 1024
    grading = 2

    [solver]
    tol = 1e-10
    max_iter = 500
    init = lower-envelope

    [family]
    T_list = 0.2, 0.35, 0.5

    [hypothesis]
    Y1 = 1
    Y2 = 20000
    T = 0.9995
    c1 = 8
    ...

Errors carry the line number of the offending key.
"""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field
from pathlib import Path

from fdefamily.errors import ConfigurationError
from fdefamily.nonlinearity import POWER_LAW, TABLE, NonlinearitySpec

SECTIONS = ("problem", "mesh", "solver", "family", "hypothesis")

_SECTION_RE = re.compile(r"^\s*\[([^\]]+)\]")
_KEY_RE = re.compile(r"^\s*([^=:#;\s][^=:]*?)\s*[=:]")


@dataclass
class Config:
    path: Path
    text: str
    parser: configparser.ConfigParser
    lines: dict[tuple[str, str], int] = field(default_factory=dict)

    def _where(self, section: str, key: str) -> str:
        line = self.lines.get((section, key))
        return f"{self.path}:{line}" if line else f"{self.path} [{section}]"

    def error(self, section: str, key: str, msg: str) -> ConfigurationError:
        return ConfigurationError(f"{self._where(section, key)}: {key}: {msg}")

    def has(self, section: str, key: str) -> bool:
        return self.parser.has_option(section, key)

    def raw(self, section: str, key: str, default=None, *, required: bool = False):
        if self.parser.has_option(section, key):
            return self.parser.get(section, key).strip()
        if required:
            raise ConfigurationError(f"{self.path}: missing required key [{section}] {key}")
        return default

    def get_float(self, section: str, key: str, default=None, *, required: bool = False):
        v = self.raw(section, key, None, required=required)
        if v is None:
            return default
        try:
            return float(v)
        except ValueError:
            raise self.error(section, key, f"expected a number, got {v!r}") from None

    def get_int(self, section: str, key: str, default=None, *, required: bool = False):
        v = self.raw(section, key, None, required=required)
        if v is None:
            return default
        try:
            return int(v)
        except ValueError:
            raise self.error(section, key, f"expected an integer, got {v!r}") from None

    def float_list(self, section: str, key: str, *, required: bool = False):
        v = self.raw(section, key, None, required=required)
        if v is None:
            return None
        try:
            return [float(p) for p in v.replace(";", ",").split(",") if p.strip()]
        except ValueError:
            raise self.error(section, key, f"expected comma-separated numbers: {v!r}") from None

    # {{{ problem accessors

    def beta(self) -> float:
        has_a, has_b = self.has("problem", "alpha"), self.has("problem", "beta")
        if has_a == has_b:
            raise ConfigurationError(f"{self.path}: give exactly one of [problem] alpha or beta")
        if has_b:
            beta = self.get_float("problem", "beta")
            if not 0.0 <= beta < 1.0:
                raise self.error("problem", "beta", f"must lie in [0, 1): {beta!r}")
            return beta
        alpha = self.get_float("problem", "alpha")
        if not 0.0 < alpha <= 1.0:
            raise self.error("problem", "alpha", f"must lie in (0, 1]: {alpha!r}")
        return 1.0 - alpha

    def nonlinearity(self) -> NonlinearitySpec:
        kind = self.raw("problem", "g")
        if kind is None:
            raise ConfigurationError(f"{self.path}: missing nonlinearity ([problem] g)")
        try:
            if kind == POWER_LAW:
                return NonlinearitySpec.power_law(
                    self.get_float("problem", "g_coefficient", required=True),
                    self.get_float("problem", "g_exponent", required=True),
                )
            if kind == TABLE:
                table = Path(self.raw("problem", "g_table", required=True))
                if not table.is_absolute():
                    table = self.path.parent / table
                return NonlinearitySpec.from_csv(table)
        except ConfigurationError as exc:
            if str(exc).startswith(str(self.path)):
                raise
            raise self.error("problem", "g", str(exc)) from None
        raise self.error("problem", "g", f"expected {POWER_LAW!r} or {TABLE!r}, got {kind!r}")

    # }}}


def _key_lines(text: str) -> dict[tuple[str, str], int]:
    lines: dict[tuple[str, str], int] = {}
    section = None
    for lineno, line in enumerate(text.splitlines(), 1):
        m = _SECTION_RE.match(line)
        if m:
            section = m.group(1).strip()
            continue
        m = _KEY_RE.match(line)
        if m and section is not None:
            lines[(section, m.group(1).strip())] = lineno
    return lines


def load_config(path: str | Path) -> Config:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from None

    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise ConfigurationError(f"{path}: {exc}") from None

    unknown = [s for s in parser.sections() if s not in SECTIONS]
    if unknown:
        lineno = next(i for i, line in enumerate(text.splitlines(), 1)
                      if (m := _SECTION_RE.match(line)) and m.group(1).strip() == unknown[0])
        raise ConfigurationError(
            f"{path}:{lineno}: unknown section [{unknown[0]}]; expected one of {SECTIONS}"
        )
    return Config(path, text, parser, _key_lines(text))
