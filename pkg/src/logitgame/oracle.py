"""Brute-force equilibrium oracle.

Draws latent shocks, enumerates every pure-strategy Nash equilibrium by
checking all unilateral deviations, simulates datasets under explicit
selection rules, and estimates bound functions by Monte Carlo.  Nothing
in here uses the closed forms from :mod:`logitgame.likelihood`; the two
are meant to check each other.
"""

from __future__ import annotations

import csv
import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import expit

from .errors import ContractError, DegenerateModelError, UnsupportedStructureError
from .game import GameSpec, MixingGrid, as_event

CHUNK = 1 << 16


@dataclass(frozen=True, eq=False)
class LatentDraw:
    """Per-action payoff shocks, ``shocks[i]`` of shape ``(R, |Y_i|)``."""

    shocks: tuple
    seed: int | None = None

    def __post_init__(self):
        shocks = tuple(np.atleast_2d(np.asarray(s, dtype=float)) for s in self.shocks)
        if len({s.shape[0] for s in shocks}) != 1:
            raise ContractError("every player needs the same number of draws")
        object.__setattr__(self, "shocks", shocks)

    @property
    def size(self) -> int:
        return self.shocks[0].shape[0]

    @classmethod
    def from_xi(cls, xi, seed=None) -> "LatentDraw":
        """Binary view: ``xi_i`` is the shock on entry relative to staying out."""
        xi = np.atleast_2d(np.asarray(xi, dtype=float))
        return cls(tuple(np.column_stack([np.zeros(len(xi)), xi[:, i]])
                         for i in range(xi.shape[1])), seed)

    def check(self, spec: GameSpec):
        if len(self.shocks) != spec.n_players or any(
                s.shape[1] != k for s, k in zip(self.shocks, spec.shape)):
            raise ContractError("shock dimensions do not match the game's action sets")


def draw_shocks(spec: GameSpec, size: int, rng: np.random.Generator) -> LatentDraw:
    """Logistic difference shocks for binary games, type-1 extreme value otherwise."""
    if spec.is_binary:
        return LatentDraw.from_xi(rng.logistic(size=(size, spec.n_players)))
    return LatentDraw(tuple(rng.gumbel(size=(size, k)) for k in spec.shape))


def _utilities(spec: GameSpec, V_x: np.ndarray, draw: LatentDraw, i: int) -> np.ndarray:
    shape = [1] * spec.n_players
    shape[i] = spec.shape[i]
    eps = draw.shocks[i].reshape((draw.size, *shape))
    return V_x[i][None] + eps


def equilibrium_mask(spec: GameSpec, theta, x: int, draw: LatentDraw,
                     payoffs: np.ndarray | None = None) -> np.ndarray:
    """Boolean ``(R, |Y|)``: outcome is a pure Nash equilibrium at each draw."""
    draw.check(spec)
    V = spec.payoffs(theta) if payoffs is None else payoffs
    V_x = V[..., spec.check_bin(x)]
    ok = np.ones((draw.size, *spec.shape), dtype=bool)
    for i in range(spec.n_players):
        U = _utilities(spec, V_x, draw, i)
        ok &= U >= U.max(axis=1 + i, keepdims=True)
    return ok.reshape(draw.size, -1)


def dominance_mask(spec: GameSpec, theta, x: int, draw: LatentDraw) -> np.ndarray:
    """Boolean ``(R, |Y|)``: every ``y_i`` is strictly dominant for its player."""
    draw.check(spec)
    V_x = spec.payoffs(theta)[..., spec.check_bin(x)]
    out = np.ones((draw.size, *spec.shape), dtype=bool)
    for i in range(spec.n_players):
        U = np.moveaxis(_utilities(spec, V_x, draw, i), 1 + i, 1)
        U = U.reshape(draw.size, spec.shape[i], -1)                     # (R, own, rivals)
        k = spec.shape[i]
        strict = np.ones((draw.size, k), dtype=bool)
        for a in range(k):
            for b in range(k):
                if a != b:
                    strict[:, a] &= np.all(U[:, a] > U[:, b], axis=1)
        idx = [None] * spec.n_players
        idx[i] = slice(None)
        out &= strict[(slice(None), *idx)]
    return out.reshape(draw.size, -1)


def enumerate_pure_nash(spec: GameSpec, theta, x: int, draw: LatentDraw) -> set:
    """All pure-strategy Nash equilibria at a single shock draw."""
    if draw.size != 1:
        raise ContractError("enumerate_pure_nash takes a single draw; use equilibrium_mask")
    mask = equilibrium_mask(spec, theta, x, draw)[0]
    outcomes = spec.outcomes()
    return {outcomes[k] for k in np.flatnonzero(mask)}


# ---------------------------------------------------------------------------
# selection rules and datasets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SelectionRule:
    """How one equilibrium is picked when several exist.

    ``kind`` is ``"uniform"`` (equal odds over the realised equilibrium
    set), ``"first-listed"`` (the first member of ``order``) or
    ``"weights"`` (odds proportional to ``weights`` restricted to the set).
    """

    kind: str = "uniform"
    order: tuple = ()
    weights: tuple = ()

    def __post_init__(self):
        if self.kind not in ("uniform", "first-listed", "weights"):
            raise ContractError(f"unknown selection rule {self.kind!r}")
        if self.kind == "weights" and not self.weights:
            raise ContractError("the weights rule needs a weight table")

    def probabilities(self, spec: GameSpec, mask: np.ndarray) -> np.ndarray:
        """Selection probabilities ``(R, |Y|)`` over each row's equilibrium set."""
        mask = np.asarray(mask, dtype=bool)
        count = mask.sum(axis=1, keepdims=True)
        if np.any(count == 0):
            raise DegenerateModelError("a draw has no pure-strategy equilibrium",
                                       draw=int(np.flatnonzero(count[:, 0] == 0)[0]))
        if self.kind == "uniform":
            return mask / count
        if self.kind == "first-listed":
            order = [spec.flat_index(y) for y in self.order]
            rest = [k for k in range(spec.n_outcomes) if k not in order]
            rank = np.empty(spec.n_outcomes, dtype=int)
            rank[order + rest] = np.arange(spec.n_outcomes)
            ranked = np.where(mask, rank[None, :], spec.n_outcomes)
            pick = np.argmin(ranked, axis=1)
            out = np.zeros(mask.shape)
            out[np.arange(len(mask)), pick] = 1.0
            return out
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (spec.n_outcomes,) or np.any(w < 0):
            raise ContractError("weights must be a non-negative table over all outcomes")
        raw = mask * w[None, :]
        total = raw.sum(axis=1, keepdims=True)
        if np.any(total == 0):
            raise ContractError("selection weights vanish on a realised equilibrium set")
        return raw / total


@dataclass(eq=False)
class MarketDataset:
    """Observed markets: bin index and chosen outcome (action indices) per market."""

    market_id: np.ndarray
    x: np.ndarray
    y: np.ndarray
    omega: np.ndarray | None = None

    def __len__(self):
        return len(self.market_id)

    def outcome_index(self, spec: GameSpec) -> np.ndarray:
        if len(self) == 0:
            return np.zeros(0, dtype=int)
        return np.ravel_multi_index(tuple(self.y.T), spec.shape)


def _simulate_chunk(spec, theta, selection, n, design, grid, seed_seq):
    rng = np.random.default_rng(seed_seq)
    x = rng.choice(spec.n_bins, size=n, p=design)
    node = rng.choice(len(grid), size=n, p=grid.weights) if grid is not None else None
    draw = draw_shocks(spec, n, rng)
    u = rng.random(n)
    chosen = np.empty(n, dtype=int)
    specs = grid.node_specs(spec) if grid is not None else [spec]
    node_ids = node if node is not None else np.zeros(n, dtype=int)
    for k, s in enumerate(specs):
        V = s.payoffs(theta)
        for xb in range(spec.n_bins):
            rows = np.flatnonzero((x == xb) & (node_ids == k))
            if rows.size == 0:
                continue
            sub = LatentDraw(tuple(e[rows] for e in draw.shocks))
            mask = equilibrium_mask(s, theta, xb, sub, payoffs=V)
            try:
                probs = selection.probabilities(spec, mask)
            except DegenerateModelError as err:
                bad = rows[err.draw]
                raise DegenerateModelError(
                    f"no pure-strategy equilibrium at bin {xb}, shocks "
                    f"{[e[bad].tolist() for e in draw.shocks]}",
                    draw=[e[bad] for e in draw.shocks]) from None
            cum = np.cumsum(probs, axis=1)
            pick = (cum < u[rows, None] * cum[:, -1:]).sum(axis=1)
            chosen[rows] = np.minimum(pick, spec.n_outcomes - 1)
    omega = grid.nodes[node] if grid is not None else None
    return x, chosen, omega


def simulate_dataset(spec: GameSpec, theta, selection: SelectionRule, n: int,
                     design: Sequence[float] | None = None, grid: MixingGrid | None = None,
                     seed: int = 0, threads: int = 1) -> MarketDataset:
    """Simulate ``n`` i.i.d. markets.

    Each market draws a bin from ``design`` (uniform by default), a common
    shock node from ``grid`` if given, and idiosyncratic shocks; one
    equilibrium is then picked by ``selection``.  Work is split in fixed
    chunks with spawned seeds, so the output does not depend on ``threads``.
    """
    theta = spec.as_theta(theta)
    if n < 0:
        raise ValueError("n must be non-negative")
    design = (np.full(spec.n_bins, 1.0 / spec.n_bins) if design is None
              else np.asarray(design, dtype=float))
    if design.shape != (spec.n_bins,) or abs(design.sum() - 1) > 1e-12 or np.any(design < 0):
        raise ContractError("design must be a probability vector over bins")
    sizes = [min(CHUNK, n - s) for s in range(0, n, CHUNK)]
    seeds = np.random.SeedSequence(seed).spawn(len(sizes))
    job = lambda args: _simulate_chunk(spec, theta, selection, args[0], design, grid, args[1])
    if threads > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(job, zip(sizes, seeds)))
    else:
        parts = [job(a) for a in zip(sizes, seeds)]
    if parts:
        x = np.concatenate([p[0] for p in parts])
        flat = np.concatenate([p[1] for p in parts])
        omega = np.concatenate([p[2] for p in parts]) if grid is not None else None
    else:
        x, flat = np.zeros(0, dtype=int), np.zeros(0, dtype=int)
        omega = np.zeros(0) if grid is not None else None
    y = (np.column_stack(np.unravel_index(flat, spec.shape)) if n
         else np.zeros((0, spec.n_players), dtype=int))
    return MarketDataset(np.arange(n), x, y, omega)


def write_dataset(path, data: MarketDataset, spec: GameSpec):
    """CSV with header ``market_id,x_bin,y_1,...,y_I[,omega]`` using spec labels."""
    header = ["market_id", "x_bin"] + [f"y_{i + 1}" for i in range(spec.n_players)]
    if data.omega is not None:
        header.append("omega")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in range(len(data)):
            row = [int(data.market_id[r]), spec.bins[data.x[r]]]
            row += list(spec.outcome_labels(data.y[r]))
            if data.omega is not None:
                row.append(repr(float(data.omega[r])))
            w.writerow(row)


def read_dataset(path, spec: GameSpec) -> MarketDataset:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        expected = ["market_id", "x_bin"] + [f"y_{i + 1}" for i in range(spec.n_players)]
        if header[: len(expected)] != expected or len(header) not in (len(expected),
                                                                      len(expected) + 1):
            raise ContractError(f"unexpected data header {header}")
        has_omega = len(header) == len(expected) + 1
        if has_omega and header[-1] != "omega":
            raise ContractError(f"unexpected trailing column {header[-1]!r}")
        bins = {str(b): k for k, b in enumerate(spec.bins)}
        ids, xs, ys, om = [], [], [], []
        for line, row in enumerate(reader, start=2):
            try:
                ids.append(int(row[0]))
                xs.append(bins[row[1]])
                ys.append(spec.outcome_from_labels(row[2: 2 + spec.n_players]))
                if has_omega:
                    om.append(float(row[-1]))
            except (KeyError, ValueError, IndexError) as err:
                raise ContractError(f"{path}:{line}: {err}") from None
    y = np.array(ys, dtype=int).reshape(-1, spec.n_players)
    return MarketDataset(np.array(ids, dtype=int), np.array(xs, dtype=int), y,
                         np.array(om) if has_omega else None)


# ---------------------------------------------------------------------------
# Monte Carlo bounds
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MCEstimate:
    estimate: float
    std_error: float
    draws: int

    def covers(self, value: float, n_se: float = 3.0) -> bool:
        return abs(value - self.estimate) <= n_se * self.std_error


def _binomial(hits: np.ndarray) -> MCEstimate:
    p = float(np.mean(hits))
    return MCEstimate(p, float(np.sqrt(max(p * (1 - p), 0.0) / hits.size)), hits.size)


def mc_bounds(spec: GameSpec, theta, x: int, event, draws: int, kind: str,
              seed: int = 0) -> MCEstimate:
    """Monte Carlo frequency of a bound event.

    ``L``/``H2``: the event meets the equilibrium set.  ``R_cap``: the event
    lies inside it.  ``H1``: the equilibrium set is exactly ``{y}``.
    ``dominant``: ``y`` consists of strictly dominant actions.
    """
    if draws < 1000:
        raise ValueError("use at least 1000 draws")
    event = as_event(spec, event)
    if kind in ("H1", "dominant") and len(event) != 1:
        raise ContractError(f"{kind} is defined for singleton events only")
    rng = np.random.default_rng(seed)
    idx = list(event.flat(spec))
    hits = np.empty(draws, dtype=bool)
    V = spec.payoffs(theta)
    for start in range(0, draws, CHUNK):
        size = min(CHUNK, draws - start)
        draw = draw_shocks(spec, size, rng)
        if kind == "dominant":
            mask = dominance_mask(spec, theta, x, draw)
            h = mask[:, idx[0]]
        else:
            mask = equilibrium_mask(spec, theta, x, draw, payoffs=V)
            if kind in ("L", "H2"):
                h = mask[:, idx].any(axis=1)
            elif kind == "R_cap":
                h = mask[:, idx].all(axis=1)
            elif kind == "H1":
                h = mask[:, idx[0]] & (mask.sum(axis=1) == 1)
            else:
                raise ValueError(f"unknown kind {kind!r}")
        hits[start: start + size] = h
    return _binomial(hits)


def ct_bounds(spec: GameSpec, theta, draws: int, seed: int = 0):
    """Simulated ``(H1, H2)`` arrays of shape ``(|X|, |Y|)`` with common draws across bins."""
    rng = np.random.default_rng(seed)
    draw = draw_shocks(spec, draws, rng)
    V = spec.payoffs(theta)
    h1 = np.empty((spec.n_bins, spec.n_outcomes))
    h2 = np.empty_like(h1)
    for x in range(spec.n_bins):
        mask = equilibrium_mask(spec, theta, x, draw, payoffs=V)
        unique = mask.sum(axis=1) == 1
        h2[x] = mask.mean(axis=0)
        h1[x] = (mask & unique[:, None]).mean(axis=0)
    return h1, h2


def ct_criterion(spec: GameSpec, theta, probs, draws: int, seed: int = 0) -> float:
    """Sum of squared violations of ``H1 <= phi <= H2`` over outcomes and bins."""
    h1, h2 = ct_bounds(spec, theta, draws, seed)
    probs = np.asarray(getattr(probs, "probs", probs), dtype=float)
    return float(np.sum(np.maximum(probs - h2, 0) ** 2 + np.maximum(h1 - probs, 0) ** 2))


# ---------------------------------------------------------------------------
# exact population CCPs for binary games
# ---------------------------------------------------------------------------

def _cells(points):
    """Intervals between sorted breakpoints, with a representative interior point."""
    edges = np.concatenate([[-np.inf], np.unique(points), [np.inf]])
    reps = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        if np.isinf(lo) and np.isinf(hi):
            reps.append(0.0)
        elif np.isinf(lo):
            reps.append(hi - 1.0)
        elif np.isinf(hi):
            reps.append(lo + 1.0)
        else:
            reps.append(0.5 * (lo + hi))
    lo, hi = edges[:-1], edges[1:]
    mass = np.where(np.isposinf(hi), expit(-lo), np.where(np.isneginf(lo), expit(hi),
                                                          expit(hi) - expit(lo)))
    return np.array(reps), mass


def population_ccp(spec: GameSpec, theta, selection: SelectionRule,
                   grid: MixingGrid | None = None) -> np.ndarray:
    """Exact CCP ``(|X|, |Y|)`` implied by ``selection`` in a binary game.

    The equilibrium set is constant on every cell of the grid cut out by
    each player's entry thresholds, so the CCP is a finite sum of cell
    masses times the selection probabilities at a representative point.
    """
    if not spec.is_binary:
        raise UnsupportedStructureError("exact population CCPs need a binary-action game")
    specs, weights = ([spec], np.ones(1)) if grid is None else (grid.node_specs(spec), grid.weights)
    out = np.zeros((spec.n_bins, spec.n_outcomes))
    n = spec.n_players
    for s, w in zip(specs, weights):
        V = s.payoffs(theta)
        for x in range(spec.n_bins):
            reps, masses = [], []
            for i in range(n):
                thresholds = np.take(V[i], 0, axis=i) - np.take(V[i], 1, axis=i)
                r, m = _cells(thresholds[..., x].ravel())
                reps.append(r)
                masses.append(m)
            grid_pts = np.array(list(itertools.product(*reps)))
            cell_mass = np.prod(np.array(list(itertools.product(*masses))), axis=1)
            mask = equilibrium_mask(s, theta, x, LatentDraw.from_xi(grid_pts), payoffs=V)
            probs = selection.probabilities(spec, mask)
            out[x] += w * (cell_mass @ probs)
    return out
