"""Line-oriented model files.

::

    # comments and blank lines are ignored
    dim = 2
    A[1][1] = lognormal(-0.5, 0.5)
    A[1][2] = constant(1)
    A[2][2] = lognormal(-1, 1)
    B[1] = constant(1)
    B[2] = constant(1)

Off-diagonal ``A`` entries that are not given are ``zero``. A GARCH model is
declared with ``garch.*`` keys instead and is turned into its recursion by
:func:`triax.garch.to_sre`::

    garch.dim = 2
    garch.alpha0[1] = 0.2
    garch.alpha[1][1] = 0.1
    garch.beta[1][1] = 0.5
    garch.common_shock = true
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from triax.distributions import parse_distribution
from triax.errors import ParseError
from triax.garch import GarchSpec, to_sre
from triax.model import ModelSpec

_KEY = re.compile(
    r"^(?P<name>dim|A|B|garch\.dim|garch\.alpha0|garch\.alpha|garch\.beta|garch\.common_shock)"
    r"(?:\[(?P<i>\d+)\])?(?:\[(?P<j>\d+)\])?$"
)
_ARITY = {
    "dim": 0,
    "A": 2,
    "B": 1,
    "garch.dim": 0,
    "garch.alpha0": 1,
    "garch.alpha": 2,
    "garch.beta": 2,
    "garch.common_shock": 0,
}


@dataclass(frozen=True)
class ModelFile:
    spec: ModelSpec
    garch: GarchSpec | None = None


def _index(raw: str | None, d: int, where: str) -> int:
    k = int(raw)
    if not 1 <= k <= d:
        raise ParseError(f"{where}: index {k} outside 1..{d}")
    return k - 1


def _float(text: str, where: str) -> float:
    try:
        return float(text)
    except ValueError as exc:
        raise ParseError(f"{where}: expected a number, got {text!r}") from exc


def _law(text: str, where: str):
    try:
        return parse_distribution(text)
    except ParseError as exc:
        raise ParseError(f"{where}: {exc}") from exc


def parse_model(text: str) -> ModelFile:
    """Parse model-file text; raises :class:`ParseError` with a line number on bad input."""
    items: dict[tuple, tuple[str, str]] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        where = f"line {lineno}"
        if "=" not in line:
            raise ParseError(f"{where}: expected 'key = value'")
        key, value = (p.strip() for p in line.split("=", 1))
        m = _KEY.match(re.sub(r"\s+", "", key))
        if not m:
            raise ParseError(f"{where}: unknown key {key!r}")
        name = m.group("name")
        idx = tuple(g for g in (m.group("i"), m.group("j")) if g is not None)
        if len(idx) != _ARITY[name]:
            raise ParseError(f"{where}: {name} takes {_ARITY[name]} index(es)")
        k = (name, *idx)
        if k in items:
            raise ParseError(f"{where}: {key} given twice")
        items[k] = (value, where)

    has_plain = any(k[0] in ("dim", "A", "B") for k in items)
    has_garch = any(k[0].startswith("garch.") for k in items)
    if has_plain and has_garch:
        raise ParseError("a model file declares either A/B entries or a garch section, not both")
    if has_garch:
        g = _garch(items)
        return ModelFile(spec=to_sre(g), garch=g)
    return ModelFile(spec=_plain(items))


def _dim(items, key: str) -> int:
    if (key,) not in items:
        raise ParseError(f"missing '{key} = d'")
    value, where = items[(key,)]
    try:
        d = int(value)
    except ValueError as exc:
        raise ParseError(f"{where}: dimension must be an integer, got {value!r}") from exc
    if d < 1:
        raise ParseError(f"{where}: dimension must be >= 1")
    return d


def _plain(items) -> ModelSpec:
    d = _dim(items, "dim")
    a_grid = [[None] * d for _ in range(d)]
    b = [None] * d
    for k, (value, where) in items.items():
        if k[0] == "A":
            i, j = _index(k[1], d, where), _index(k[2], d, where)
            dist = _law(value, where)
            if dist is None and i == j:
                raise ParseError(f"{where}: diagonal entry A[{i + 1}][{j + 1}] cannot be zero")
            if i > j and dist is not None:
                raise ParseError(f"{where}: A[{i + 1}][{j + 1}] lies below the diagonal")
            a_grid[i][j] = dist
        elif k[0] == "B":
            i = _index(k[1], d, where)
            dist = _law(value, where)
            if dist is None:
                raise ParseError(f"{where}: B[{i + 1}] cannot be zero")
            b[i] = dist
    for i in range(d):
        if a_grid[i][i] is None:
            raise ParseError(f"missing diagonal entry A[{i + 1}][{i + 1}]")
        if b[i] is None:
            raise ParseError(f"missing entry B[{i + 1}]")
    return ModelSpec(tuple(map(tuple, a_grid)), tuple(b))


def _garch(items) -> GarchSpec:
    d = _dim(items, "garch.dim")
    alpha0 = np.full(d, np.nan)
    alpha = np.zeros((d, d))
    beta = np.zeros((d, d))
    common = True
    for k, (value, where) in items.items():
        name = k[0]
        if name == "garch.alpha0":
            alpha0[_index(k[1], d, where)] = _float(value, where)
        elif name in ("garch.alpha", "garch.beta"):
            i, j = _index(k[1], d, where), _index(k[2], d, where)
            (alpha if name == "garch.alpha" else beta)[i, j] = _float(value, where)
        elif name == "garch.common_shock":
            if value.lower() not in ("true", "false"):
                raise ParseError(f"{where}: common_shock must be true or false")
            common = value.lower() == "true"
    missing = [i + 1 for i in range(d) if np.isnan(alpha0[i])]
    if missing:
        raise ParseError(f"missing garch.alpha0 for coordinate(s) {missing}")
    return GarchSpec(alpha0, alpha, beta, common_shock=common)


def load_model(path) -> ModelFile:
    return parse_model(Path(path).read_text())


def format_model(spec: ModelSpec) -> str:
    """Model-file text that parses back to ``spec``."""
    lines = [f"dim = {spec.d}"]
    for i, j, dist in spec.entries():
        lines.append(f"A[{i + 1}][{j + 1}] = {dist.literal()}")
    for i, dist in enumerate(spec.B):
        lines.append(f"B[{i + 1}] = {dist.literal()}")
    return "\n".join(lines) + "\n"
