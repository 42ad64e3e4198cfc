"""Game-spec files: a TOML schema for games with payoffs affine in theta.

Schema::

    [players]
    names = ["firm1", "firm2"]            # I >= 1 player names, in order

    [actions]
    firm1 = ["out", "enter"]              # one list per player, >= 2 labels,
    firm2 = ["out", "enter"]              # the first is the outside option

    [bins]
    ids = ["x0"]                          # covariate bin identifiers

    [bounds]
    names = ["beta1", "beta2", "delta1", "delta2"]   # defines d
    lower = [-inf, -inf, -inf, -inf]      # optional, default -inf
    upper = [inf, inf, 0.0, 0.0]          # optional, default +inf

    [[coeff]]                             # exactly one row per (player, outcome, bin)
    player = "firm1"
    outcome = ["enter", "out"]            # one action label per player
    bin = "x0"
    c = [1.0, 0.0, 0.0, 0.0]              # length-d coefficient vector
    b = 0.0                               # intercept, optional (default 0)

The payoff of ``player`` at ``outcome`` in ``bin`` is ``c . theta + b``.
"""

from __future__ import annotations

import itertools
import math
import re
import sys
from importlib import resources
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import SpecFormatError
from .game import GameSpec

SECTIONS = ("players", "actions", "bins", "bounds", "coeff")


def fixture_path(name: str) -> Path:
    """Path of a data file shipped with the package (e.g. ``"entry2.spec"``)."""
    return Path(str(resources.files("logitgame") / "data" / name))


def _row_lines(text: str) -> list[int]:
    return [k + 1 for k, line in enumerate(text.splitlines())
            if re.match(r"\s*\[\[\s*coeff\s*\]\]", line)]


def _err(where: str, msg: str, line: int | None = None) -> SpecFormatError:
    loc = f"line {line}, {where}" if line else where
    return SpecFormatError(f"{loc}: {msg}")


def _labels(value, where: str) -> list:
    if not isinstance(value, list) or not value:
        raise _err(where, "expected a non-empty array")
    for v in value:
        if not isinstance(v, (str, int)) or isinstance(v, bool):
            raise _err(where, f"labels must be strings or integers, got {v!r}")
    return list(value)


def _numbers(value, where: str, d: int | None = None) -> np.ndarray:
    if not isinstance(value, list) or any(isinstance(v, bool) or not isinstance(v, (int, float))
                                          for v in value):
        raise _err(where, "expected an array of numbers")
    if d is not None and len(value) != d:
        raise _err(where, f"length {len(value)} does not match d={d}")
    return np.array(value, dtype=float)


def parse_game_spec(text: str, source: str = "<string>") -> GameSpec:
    """Parse and validate the TOML text of a game spec."""
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as err:
        raise SpecFormatError(f"{source}: {err}") from None
    unknown = sorted(set(doc) - set(SECTIONS))
    if unknown:
        raise _err(source, f"unknown section(s) {unknown}")
    for sec in SECTIONS:
        if sec not in doc:
            raise _err(source, f"missing section [{sec}]")

    players = _labels(doc["players"].get("names"), "players.names")
    players = [str(p) for p in players]
    if len(set(players)) != len(players):
        raise _err("players.names", "duplicate player names")
    extra = sorted(set(doc["actions"]) - set(players))
    if extra:
        raise _err("actions", f"actions given for unknown player(s) {extra}")
    actions = []
    for p in players:
        if p not in doc["actions"]:
            raise _err("actions", f"no action list for player {p!r}")
        labels = _labels(doc["actions"][p], f"actions.{p}")
        if len(labels) < 2:
            raise _err(f"actions.{p}", f"player {p!r} has a single action; need >= 2")
        if len({str(a) for a in labels}) != len(labels):
            raise _err(f"actions.{p}", "duplicate action labels")
        actions.append(labels)
    bins = _labels(doc["bins"].get("ids"), "bins.ids")

    names = _labels(doc["bounds"].get("names"), "bounds.names")
    d = len(names)
    lower = _numbers(doc["bounds"].get("lower", [-math.inf] * d), "bounds.lower", d)
    upper = _numbers(doc["bounds"].get("upper", [math.inf] * d), "bounds.upper", d)

    rows = doc["coeff"]
    if not isinstance(rows, list):
        raise _err("coeff", "use [[coeff]] array-of-tables rows")
    lines = _row_lines(text)
    shape = tuple(len(a) for a in actions)
    n_x = len(bins)
    coeff = np.zeros((len(players), *shape, n_x, d))
    offset = np.zeros((len(players), *shape, n_x))
    seen = set()
    player_idx = {p: i for i, p in enumerate(players)}
    bin_idx = {str(b): k for k, b in enumerate(bins)}
    for r, row in enumerate(rows):
        where, line = f"coeff[{r}]", lines[r] if r < len(lines) else None
        missing = [k for k in ("player", "outcome", "bin", "c") if k not in row]
        if missing:
            raise _err(where, f"missing field(s) {missing}", line)
        unknown = sorted(set(row) - {"player", "outcome", "bin", "c", "b"})
        if unknown:
            raise _err(where, f"unknown field(s) {unknown}", line)
        if str(row["player"]) not in player_idx:
            raise _err(f"{where}.player", f"unknown player {row['player']!r}", line)
        i = player_idx[str(row["player"])]
        outcome = row["outcome"]
        if not isinstance(outcome, list) or len(outcome) != len(players):
            raise _err(f"{where}.outcome", f"expected {len(players)} action labels", line)
        y = []
        for j, lab in enumerate(outcome):
            lookup = {str(a): k for k, a in enumerate(actions[j])}
            if str(lab) not in lookup:
                raise _err(f"{where}.outcome", f"unknown action label {lab!r} for player "
                           f"{players[j]!r}", line)
            y.append(lookup[str(lab)])
        if str(row["bin"]) not in bin_idx:
            raise _err(f"{where}.bin", f"unknown bin {row['bin']!r}", line)
        x = bin_idx[str(row["bin"])]
        key = (i, *y, x)
        if key in seen:
            raise _err(where, f"duplicate row for (player={players[i]}, outcome={outcome}, "
                       f"bin={row['bin']})", line)
        seen.add(key)
        try:
            coeff[key] = _numbers(row["c"], f"{where}.c", d)
        except SpecFormatError as err:
            raise _err(f"{where}.c", str(err).split(": ", 1)[-1], line) from None
        b = row.get("b", 0.0)
        if isinstance(b, bool) or not isinstance(b, (int, float)):
            raise _err(f"{where}.b", "intercept must be a number", line)
        offset[key] = float(b)

    for i, p in enumerate(players):
        for y in itertools.product(*(range(k) for k in shape)):
            for x, bid in enumerate(bins):
                if (i, *y, x) not in seen:
                    labels = [actions[j][a] for j, a in enumerate(y)]
                    raise _err(source, f"missing coefficient row (i, y, x) = "
                               f"({p}, {labels}, {bid})")
    return GameSpec(actions, bins, coeff, offset, lower, upper, names, players)


def load_game_spec(path) -> GameSpec:
    """Read a game-spec file; errors carry the file name and line/field context."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as err:
        raise SpecFormatError(f"cannot read game spec {path}: {err.strerror}") from None
    return parse_game_spec(text, str(path))


def _toml_value(v) -> str:
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    v = float(v)
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(v)


def _toml_array(vals) -> str:
    return "[" + ", ".join(_toml_value(v) for v in vals) + "]"


def dump_game_spec(spec: GameSpec) -> str:
    """Serialize a spec; ``parse_game_spec(dump_game_spec(s))`` reproduces ``s``."""
    players = [str(p) for p in spec.player_names]
    out = ["[players]", f"names = {_toml_array(players)}", "", "[actions]"]
    out += [f"{_toml_value(p)} = {_toml_array(a)}" for p, a in zip(players, spec.actions)]
    out += ["", "[bins]", f"ids = {_toml_array(spec.bins)}", "", "[bounds]",
            f"names = {_toml_array(spec.param_names)}",
            f"lower = {_toml_array(spec.lower)}", f"upper = {_toml_array(spec.upper)}"]
    for i, p in enumerate(players):
        for y in spec.outcomes():
            for x, bid in enumerate(spec.bins):
                out += ["", "[[coeff]]", f"player = {_toml_value(p)}",
                        f"outcome = {_toml_array(spec.outcome_labels(y))}",
                        f"bin = {_toml_value(bid)}",
                        f"c = {_toml_array(spec.coeff[(i, *y, x)])}",
                        f"b = {_toml_value(spec.offset[(i, *y, x)])}"]
    return "\n".join(out) + "\n"


def write_game_spec(path, spec: GameSpec):
    Path(path).write_text(dump_game_spec(spec))
