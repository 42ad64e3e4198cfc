"""Inequality families: which (event, bin, bound) triples enter the identified set."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, UnsupportedStructureError
from .game import GameSpec, MixingGrid, OutcomeEvent
from .likelihood import connected_subsets, overlap_matrix, ZERO_TOL

KINDS = ("abj", "abj+lb", "sharp")


@dataclass(eq=False)
class InequalityFamily:
    """Events (flat-index tuples) with a bound kind and a per-bin activity mask.

    ``kind`` is ``"abj"`` (singleton upper bounds), ``"abj+lb"`` (plus
    dominance lower bounds) or ``"sharp"`` (generalized likelihoods of all
    events up to cardinality ``K``).  A sharp family built without a
    parameter value is the theta-free superset used by the solvers; it
    implies exactly the same restrictions as the core-determining family at
    any theta because every extra event is disconnected for all theta.
    """

    kind: str
    events: list
    bounds: list
    active: np.ndarray
    K: int | None = None
    grid: MixingGrid | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ContractError(f"family kind must be one of {KINDS}")
        keyed = {}
        for e, b, row in zip(self.events, self.bounds, np.atleast_2d(self.active)):
            key = (tuple(sorted(e)), b)
            keyed[key] = keyed[key] | row if key in keyed else np.array(row, dtype=bool)
        self.events = [k[0] for k in keyed]
        self.bounds = [k[1] for k in keyed]
        self.active = np.array(list(keyed.values()), dtype=bool).reshape(len(keyed), -1)

    def __len__(self):
        return int(self.active.sum())

    @property
    def convex(self) -> bool:
        """Whether every constraint is convex in theta (singleton upper bounds, no mixing)."""
        return self.kind == "abj" and self.grid is None

    def triples(self, spec: GameSpec) -> list[tuple[OutcomeEvent, int, str]]:
        outcomes = spec.outcomes()
        out = []
        for e, b, row in zip(self.events, self.bounds, self.active):
            event = OutcomeEvent(frozenset(outcomes[k] for k in e))
            out.extend((event, int(x), b) for x in np.flatnonzero(row))
        return out

    def with_events(self, spec: GameSpec, extra) -> "InequalityFamily":
        """Copy with additional ``(event, bin, bound)`` triples."""
        events, bounds = list(self.events), list(self.bounds)
        active = [row.copy() for row in self.active]
        for event, x, b in extra:
            row = np.zeros(spec.n_bins, dtype=bool)
            row[x] = True
            events.append(event.flat(spec) if isinstance(event, OutcomeEvent) else tuple(event))
            bounds.append(b)
            active.append(row)
        return InequalityFamily(self.kind, events, bounds, np.array(active), self.K, self.grid)


def structural_adjacency(spec: GameSpec) -> np.ndarray:
    """Pairs of outcomes that *can* be joint equilibria for some theta.

    In a binary game two outcomes that differ only in player ``i``'s action
    need ``xi_i`` to sit exactly on ``i``'s threshold, a null event.
    """
    outcomes = spec.outcomes()
    n = len(outcomes)
    adj = np.zeros((n, n), dtype=bool)
    for a, b in itertools.combinations(range(n), 2):
        diff = sum(u != v for u, v in zip(outcomes[a], outcomes[b]))
        adj[a, b] = adj[b, a] = diff >= 2
    return adj


def build_family(spec: GameSpec, kind: str = "abj", K: int | None = None,
                 grid: MixingGrid | None = None) -> InequalityFamily:
    """Theta-free family for solvers (and for evaluating any theta)."""
    if kind not in KINDS:
        raise ContractError(f"family kind must be one of {KINDS}, got {kind!r}")
    n_y, n_x = spec.n_outcomes, spec.n_bins
    singles = [(k,) for k in range(n_y)]
    if kind == "abj":
        events, bounds = singles, ["upper"] * n_y
    elif kind == "abj+lb":
        events, bounds = singles * 2, ["upper"] * n_y + ["lower"] * n_y
    else:
        if not spec.is_binary:
            raise UnsupportedStructureError("sharp families need a binary-action game")
        K = n_y if K is None else int(K)
        if not 1 <= K <= n_y:
            raise ContractError(f"K must lie in [1, {n_y}]")
        events = connected_subsets(structural_adjacency(spec), K)
        bounds = ["upper"] * len(events)
    active = np.ones((len(events), n_x), dtype=bool)
    return InequalityFamily(kind, events, bounds, active, K, grid)


def family_at(spec: GameSpec, family: InequalityFamily, theta,
              zero_tol: float = ZERO_TOL) -> InequalityFamily:
    """Resolve a family at ``theta``: sharp families shrink to the core-determining class.

    With a mixing grid an event is kept in a bin if it is connected at any
    grid node.
    """
    if family.kind != "sharp":
        return family
    specs = family.grid.node_specs(spec) if family.grid is not None else [spec]
    keep_sets: list[set] = [set() for _ in range(spec.n_bins)]
    for s in specs:
        for x in range(spec.n_bins):
            adj = overlap_matrix(s, theta, x) > zero_tol
            keep_sets[x].update(connected_subsets(adj, family.K))
    active = np.array([[tuple(e) in keep_sets[x] for x in range(spec.n_bins)]
                       for e in family.events], dtype=bool)
    active &= family.active
    return InequalityFamily(family.kind, family.events, family.bounds, active, family.K,
                            family.grid)
