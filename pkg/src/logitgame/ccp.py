"""Conditional choice probability tables."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError
from .game import GameSpec


@dataclass(eq=False)
class CCPTable:
    """``probs[x, y]`` = phi(y|x) over flat outcomes, with per-bin sample sizes.

    ``counts`` may be ``inf`` for a population (n = infinity) table.
    ``bins`` holds the spec bin indices the rows refer to; rows for bins
    without data are simply absent.
    """

    probs: np.ndarray
    counts: np.ndarray
    bins: np.ndarray = None
    dropped: list = field(default_factory=list)

    def __post_init__(self):
        self.probs = np.atleast_2d(np.asarray(self.probs, dtype=float))
        self.counts = np.asarray(self.counts, dtype=float).reshape(-1)
        if self.bins is None:
            self.bins = np.arange(self.probs.shape[0])
        self.bins = np.asarray(self.bins, dtype=int)
        if self.counts.shape != (self.probs.shape[0],) or self.bins.shape != self.counts.shape:
            raise ContractError("probs, counts and bins disagree on the number of bins")
        if np.any(self.probs < 0) or np.any(self.probs > 1):
            raise ContractError("CCP entries must lie in [0, 1]")
        if np.any(np.abs(self.probs.sum(axis=1) - 1.0) > 1e-12):
            raise ContractError("each phi(.|x) must sum to one")
        if np.any(self.counts < 0):
            raise ContractError("bin counts must be non-negative")

    @property
    def n(self) -> float:
        return float(self.counts.sum())

    def full(self, spec: GameSpec) -> np.ndarray:
        """Probabilities laid out over every spec bin (NaN rows where no data)."""
        out = np.full((spec.n_bins, spec.n_outcomes), np.nan)
        out[self.bins] = self.probs
        return out

    @classmethod
    def population(cls, probs, bins=None) -> "CCPTable":
        probs = np.atleast_2d(np.asarray(probs, dtype=float))
        return cls(probs, np.full(probs.shape[0], np.inf), bins)


def write_ccp(path, table: CCPTable, spec: GameSpec):
    """CSV ``x_bin,y_1..y_I,phi,n_x`` with one row per (bin, outcome)."""
    outcomes = spec.outcomes()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x_bin"] + [f"y_{i + 1}" for i in range(spec.n_players)] + ["phi", "n_x"])
        for row, b in enumerate(table.bins):
            for k, y in enumerate(outcomes):
                count = table.counts[row]
                w.writerow([spec.bins[b], *spec.outcome_labels(y), repr(float(table.probs[row, k])),
                            "inf" if np.isinf(count) else int(count)])


def read_ccp(path, spec: GameSpec) -> CCPTable:
    bins = {str(b): k for k, b in enumerate(spec.bins)}
    probs: dict[int, np.ndarray] = {}
    counts: dict[int, float] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        expected = ["x_bin"] + [f"y_{i + 1}" for i in range(spec.n_players)] + ["phi", "n_x"]
        if header != expected:
            raise ContractError(f"unexpected CCP header {header}, expected {expected}")
        for line, row in enumerate(reader, start=2):
            try:
                b = bins[row[0]]
                y = spec.outcome_from_labels(row[1: 1 + spec.n_players])
                probs.setdefault(b, np.zeros(spec.n_outcomes))[spec.flat_index(y)] = float(row[-2])
                counts[b] = float(row[-1])
            except (KeyError, ValueError, IndexError) as err:
                raise ContractError(f"{path}:{line}: {err}") from None
    order = sorted(probs)
    return CCPTable(np.array([probs[b] for b in order]), np.array([counts[b] for b in order]),
                    np.array(order))
