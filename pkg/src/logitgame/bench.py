"""Timing comparison: closed-form projections against simulated-criterion grid search."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError
from .family import build_family
from .game import entry_game
from .identification import projection_intervals
from .oracle import SelectionRule, ct_criterion, population_ccp

BENCH_THETA = (0.0, 0.0, -0.5, -0.5)


@dataclass(frozen=True)
class BenchConfig:
    """Bin counts ``K`` to time, draws ``R`` per simulated criterion, grid size ``#(Theta)``."""

    bins: tuple = (1, 10, 100, 1000)
    draws: int = 10_000
    grid_size: int = 100_000
    reps: int = 1
    starts: int = 4
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "bins", tuple(int(k) for k in self.bins))
        if not self.bins or any(k < 1 for k in self.bins):
            raise ContractError("bin counts must be positive")
        if self.draws < 1000:
            raise ContractError("the simulated criterion needs R >= 1000 draws")
        if self.grid_size < 1 or self.reps < 1 or self.starts < 1:
            raise ContractError("grid size, repetitions and starts must be positive")


@dataclass
class BenchRow:
    K: int
    abj_seconds: float
    sharp_seconds: float
    ct_eval_seconds: float
    ct_seconds: float


@dataclass
class BenchTable:
    rows: list = field(default_factory=list)
    config: BenchConfig | None = None

    def row(self, K: int) -> BenchRow:
        return next(r for r in self.rows if r.K == K)

    def format(self) -> str:
        """Fixed-width table with one column per ``K``."""
        head = f"{'K':>8}" + "".join(f"{r.K:>12d}" for r in self.rows)
        lines = [head]
        for label, attr, fmt in (("ABJ", "abj_seconds", "{:>12.3f}"),
                                 ("Sharp", "sharp_seconds", "{:>12.3f}"),
                                 ("CT", "ct_seconds", "{:>12.1e}")):
            lines.append(f"{label:>8}" + "".join(fmt.format(getattr(r, attr)) for r in self.rows))
        return "\n".join(lines)


def market_game(K: int, rng: np.random.Generator):
    """Entry game with ``K`` bins whose common shocks ``omega^k ~ U[0, 1]`` are known."""
    omega = rng.uniform(0.0, 1.0, K)
    return entry_game(2, bin_shifts=omega)


def _time_projections(spec, phi, kind, starts, seed):
    family = build_family(spec, kind)
    t0 = time.perf_counter()
    projection_intervals(spec, phi, family, starts=starts, seed=seed, verify=False)
    return time.perf_counter() - t0


def ct_eval_time(draws: int, reps: int = 1, seed: int = 0) -> float:
    """Average wall time of one simulated-criterion evaluation in a single bin."""
    spec = entry_game(2)
    theta = np.array(BENCH_THETA)
    phi = population_ccp(spec, theta, SelectionRule())
    ct_criterion(spec, theta, phi, draws, seed)
    t0 = time.perf_counter()
    for r in range(reps):
        ct_criterion(spec, theta, phi, draws, seed + r)
    return (time.perf_counter() - t0) / reps


def bench_compare(cfg: BenchConfig = BenchConfig()) -> BenchTable:
    """Time all four projection intervals for ABJ and sharp families at each ``K``.

    The grid-search cost is extrapolated as ``tau * K * #(Theta)`` where
    ``tau`` is the measured time of one simulated-criterion evaluation with
    ``R`` draws in one bin.  Closed-form times are averaged over ``reps``.
    """
    tau = ct_eval_time(cfg.draws, cfg.reps, cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    table = BenchTable(config=cfg)
    theta = np.array(BENCH_THETA)
    for K in cfg.bins:
        abj = sharp = 0.0
        for _ in range(cfg.reps):
            spec = market_game(K, rng)
            phi = population_ccp(spec, theta, SelectionRule())
            abj += _time_projections(spec, phi, "abj", cfg.starts, cfg.seed)
            sharp += _time_projections(spec, phi, "sharp", cfg.starts, cfg.seed)
        table.rows.append(BenchRow(K, abj / cfg.reps, sharp / cfg.reps, tau,
                                   tau * K * cfg.grid_size))
    return table
