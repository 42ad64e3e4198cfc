"""Frequency CCPs, simultaneous multinomial bands and confidence sets for the identified set."""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from statistics import NormalDist

import numpy as np

from .ccp import CCPTable
from .errors import ContractError
from .family import InequalityFamily, family_at
from .game import GameSpec
from .identification import (FEAS_TOL, MEMBER_TOL, SMOOTH_ALPHA, LevelProgram, LogProgram,
                             SolveReport,
                             _center, as_ccp, check_family, project_program)
from .oracle import MarketDataset, SelectionRule, simulate_dataset

_STD_NORMAL = NormalDist()


def frequency_ccp(data: MarketDataset, spec: GameSpec) -> CCPTable:
    """Cell frequencies ``count(y, x) / n^x``; bins without markets are dropped (listed in ``dropped``)."""
    if len(data) == 0:
        raise ContractError("cannot estimate CCPs from an empty dataset")
    x = np.asarray(data.x, dtype=int)
    if np.any(x < 0) or np.any(x >= spec.n_bins):
        raise ContractError("dataset refers to bins the game does not have")
    counts = np.zeros((spec.n_bins, spec.n_outcomes))
    np.add.at(counts, (x, data.outcome_index(spec)), 1.0)
    nx = counts.sum(axis=1)
    keep = np.flatnonzero(nx > 0)
    dropped = [int(b) for b in np.flatnonzero(nx == 0)]
    if dropped:
        warnings.warn(f"bins without markets dropped: {dropped}", stacklevel=2)
    probs = counts[keep] / nx[keep, None]
    return CCPTable(probs, nx[keep], keep, dropped)


def upper_normal_quantile(tau: float) -> float:
    """``z`` with ``P(Z > z) = tau`` for a standard normal ``Z``."""
    if not 0.0 < tau < 1.0:
        raise ValueError("tail probability must lie in (0, 1)")
    return _STD_NORMAL.inv_cdf(1.0 - tau)


def sidak_level(alpha: float, n_bins: int) -> float:
    """Per-bin level ``1 - (1 - alpha)^(1/|X|)``."""
    return 1.0 - (1.0 - alpha) ** (1.0 / n_bins)


@dataclass(eq=False)
class ConfidenceBand:
    """Simultaneous bounds ``lower[b, y] <= phi(y|bins[b]) <= upper[b, y]``."""

    lower: np.ndarray
    upper: np.ndarray
    estimate: CCPTable
    alpha: float
    beta: float

    def __post_init__(self):
        self.lower = np.atleast_2d(np.asarray(self.lower, dtype=float))
        self.upper = np.atleast_2d(np.asarray(self.upper, dtype=float))
        if self.lower.shape != self.upper.shape or self.lower.shape != self.estimate.probs.shape:
            raise ContractError("band bounds and estimate disagree in shape")
        if np.any(self.lower < 0) or np.any(self.upper > 1) or np.any(self.lower > self.upper):
            raise ContractError("band must satisfy 0 <= lower <= upper <= 1")
        p = self.estimate.probs
        if np.any(p < self.lower - 1e-15) or np.any(p > self.upper + 1e-15):
            raise ContractError("band must contain the point estimate")

    @property
    def bins(self) -> np.ndarray:
        return self.estimate.bins

    @property
    def half_width(self) -> np.ndarray:
        return 0.5 * (self.upper - self.lower)

    def contains(self, probs) -> bool:
        probs = np.atleast_2d(np.asarray(probs, dtype=float))
        return bool(np.all(probs >= self.lower) and np.all(probs <= self.upper))

    @classmethod
    def degenerate(cls, ccp: CCPTable) -> "ConfidenceBand":
        return cls(ccp.probs, ccp.probs, ccp, 0.0, 0.0)


def fs_band(ccp: CCPTable, alpha: float = 0.05) -> ConfidenceBand:
    """Šidák-corrected Fitzpatrick–Scott band.

    Half-width ``z(beta/4) / (2 sqrt(n^x))`` with ``beta = 1 - (1 - alpha)^(1/|X|)``,
    clipped to ``[0, 1]``; ``|X|`` counts the bins that carry data.
    """
    if not 0.0 < alpha < 0.3:
        raise ValueError("alpha must lie in (0, 0.3)")
    beta = sidak_level(alpha, len(ccp.bins))
    if beta > 0.05 + 1e-12:
        warnings.warn(f"per-bin level {beta:.4f} exceeds 0.05; simultaneous coverage "
                      "is no longer guaranteed to be 1 - beta", stacklevel=2)
    z = upper_normal_quantile(beta / 4.0)
    with np.errstate(divide="ignore"):
        half = z / (2.0 * np.sqrt(ccp.counts))
    half = np.where(np.isinf(ccp.counts), 0.0, half)[:, None]
    lo = np.maximum(ccp.probs - half, 0.0)
    hi = np.minimum(ccp.probs + half, 1.0)
    return ConfidenceBand(lo, hi, ccp, alpha, beta)


def _band_program(spec, band: ConfidenceBand, family: InequalityFamily):
    return LevelProgram(spec, family, band.bins, band.lower, band.upper, family.grid)


def confidence_membership(spec: GameSpec, theta, band: ConfidenceBand,
                          family: InequalityFamily, tol: float = MEMBER_TOL) -> bool:
    """Is there a CCP inside the band (and latent q) satisfying every restriction at theta?

    A linear feasibility problem in the CCP (and q) at fixed theta; solver
    failures raise :class:`~logitgame.errors.SolverError`.
    """
    check_family(spec, family)
    theta = spec.as_theta(theta)
    program = _band_program(spec, band, family_at(spec, family, theta))
    return program.accepts(theta, tol)


def confidence_project(spec: GameSpec, band: ConfidenceBand, family: InequalityFamily,
                       direction, sense: str = "min", starts: int = 4, seed: int = 0,
                       tol: float = FEAS_TOL, smooth_alpha: float = SMOOTH_ALPHA,
                       maxiter: int = 500, threads: int = 1, _cache: dict | None = None):
    """Minimize or maximize ``p . theta`` over the confidence set; returns ``(endpoint, report)``.

    Without mixing, the identified set at the point estimate is a subset of
    the confidence set, so its projection endpoint (when that set is
    non-empty) warm-starts the joint solve over ``(theta, phi)``.
    """
    check_family(spec, family)
    cache = {} if _cache is None else _cache
    if "program" not in cache:
        estimate = as_ccp(spec, band.estimate)
        cache["extra"] = _center(spec, estimate, family, seed, smooth_alpha, threads)
        cache["inner"] = LogProgram(spec, estimate, family) if family.grid is None else None
        cache["program"] = _band_program(spec, band, family)
    args = (spec, direction, sense, starts, seed, tol, cache["extra"], False, smooth_alpha,
            maxiter, threads)
    warm = []
    if cache["inner"] is not None:
        _, rep0 = project_program(cache["inner"], *args, runs=cache.get("inner_runs"))
        cache["inner_runs"] = rep0.diagnostics["runs"]
        if rep0.theta is not None and rep0.ok:
            warm.append(rep0.theta)
    value, rep = project_program(cache["program"], *args, warm=warm, runs=cache.get("runs"))
    cache["runs"] = rep.diagnostics["runs"]
    rep.diagnostics["excluded"] = list(band.estimate.dropped)
    return value, rep


def confidence_projections(spec: GameSpec, band: ConfidenceBand, family: InequalityFamily,
                           directions, **kw):
    """``(intervals (m, 2), reports)`` of ``p . theta`` over the confidence set per direction.

    The multi-start feasible-point search is shared by all projections.
    """
    cache: dict = {}
    out, reports = [], []
    for p in np.atleast_2d(np.asarray(directions, dtype=float)):
        lo, rlo = confidence_project(spec, band, family, p, "min", _cache=cache, **kw)
        hi, rhi = confidence_project(spec, band, family, p, "max", _cache=cache, **kw)
        out.append((lo, hi))
        reports.append((rlo, rhi))
    return np.array(out, dtype=float), reports


def confidence_intervals(spec: GameSpec, band: ConfidenceBand, family: InequalityFamily,
                         coords=None, **kw) -> np.ndarray:
    """Projection intervals of the confidence set on coordinate axes, shape ``(len(coords), 2)``."""
    coords = list(range(spec.param_dim) if coords is None else coords)
    return confidence_projections(spec, band, family, np.eye(spec.param_dim)[coords], **kw)[0]


# ---------------------------------------------------------------------------
# Monte Carlo replications
# ---------------------------------------------------------------------------

@dataclass
class ReplicationResult:
    """Per-replication confidence intervals and coverage of given population intervals."""

    n: int
    intervals: np.ndarray
    band_covers: np.ndarray
    seeds: list
    population: np.ndarray | None = None

    @property
    def mean_intervals(self) -> np.ndarray:
        return np.nanmean(self.intervals, axis=0)

    @property
    def covered(self) -> np.ndarray:
        """Whether every population interval lies inside the estimated one, per replication."""
        if self.population is None:
            raise ContractError("no population intervals supplied")
        pop = self.population[None]
        inside = (self.intervals[..., 0] <= pop[..., 0] + FEAS_TOL) & \
                 (self.intervals[..., 1] >= pop[..., 1] - FEAS_TOL)
        return inside.all(axis=1)

    @property
    def coverage(self) -> float:
        return float(self.covered.mean())


def _one_replication(args):
    spec, theta0, selection, n, alpha, family, coords, seed, starts, true_ccp = args
    data = simulate_dataset(spec, theta0, selection, n, seed=seed)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        band = fs_band(frequency_ccp(data, spec), alpha)
    inside = band.contains(true_ccp[band.bins]) if true_ccp is not None else False
    iv = confidence_intervals(spec, band, family, coords, starts=starts, seed=seed)
    return iv, inside


def replicate_confidence(spec: GameSpec, theta0, family: InequalityFamily, n: int, reps: int,
                         alpha: float = 0.05, coords=None, selection: SelectionRule | None = None,
                         seed: int = 0, starts: int = 2, population=None, true_ccp=None,
                         workers: int = 1) -> ReplicationResult:
    """Simulate ``reps`` datasets of size ``n`` and project their confidence sets.

    Replication ``r`` uses the ``r``-th seed spawned from ``seed``, so
    results do not depend on ``workers``.
    """
    selection = selection or SelectionRule()
    coords = list(range(spec.param_dim) if coords is None else coords)
    children = np.random.SeedSequence(seed).spawn(reps)
    seeds = [int(c.generate_state(1)[0]) for c in children]
    true_ccp = None if true_ccp is None else np.atleast_2d(np.asarray(true_ccp, dtype=float))
    jobs = [(spec, np.asarray(theta0, float), selection, n, alpha, family, coords, s, starts,
             true_ccp) for s in seeds]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_one_replication, jobs))
    else:
        results = [_one_replication(j) for j in jobs]
    intervals = np.array([r[0] for r in results])
    covers = np.array([r[1] for r in results], dtype=bool)
    pop = None if population is None else np.asarray(population, dtype=float)
    return ReplicationResult(n, intervals, covers, seeds, pop)


__all__ = ["CCPTable", "ConfidenceBand", "ReplicationResult", "SolveReport",
           "confidence_intervals", "confidence_membership", "confidence_project",
           "confidence_projections", "fs_band", "frequency_ccp", "replicate_confidence",
           "sidak_level", "upper_normal_quantile"]
