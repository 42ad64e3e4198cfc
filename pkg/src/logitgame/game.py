"""Game primitives: specs with payoffs affine in the parameter, events, mixing grids.

Outcomes are tuples of action *indices* (position in each player's action
list).  For binary games index 0 is the outside option ("stay out") and
index 1 is "enter".  Players and bins are also addressed by position.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.special import logit

from .errors import ContractError, SpecFormatError

Outcome = tuple[int, ...]


@dataclass(frozen=True, eq=False)
class GameSpec:
    """A finite game whose deterministic payoffs are affine in theta.

    ``coeff[i][y][x]`` is the length-d coefficient vector and
    ``offset[i][y][x]`` the intercept of player ``i``'s payoff at outcome
    ``y`` in covariate bin ``x``, so that
    ``v_i(y, x; theta) = coeff[i][y][x] @ theta + offset[i][y][x]``.

    Arrays are stored densely with shape ``(I, |Y_1|, ..., |Y_I|, |X|, d)``
    and ``(I, |Y_1|, ..., |Y_I|, |X|)``.
    """

    actions: tuple[tuple, ...]
    bins: tuple
    coeff: np.ndarray
    offset: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    param_names: tuple[str, ...] = ()
    player_names: tuple[str, ...] = ()

    def __post_init__(self):
        actions = tuple(tuple(a) for a in self.actions)
        object.__setattr__(self, "actions", actions)
        object.__setattr__(self, "bins", tuple(self.bins))
        if not actions:
            raise SpecFormatError("a game needs at least one player")
        for i, labels in enumerate(actions):
            if len(labels) < 2:
                raise SpecFormatError(f"player {i} has {len(labels)} action(s); need >= 2")
            if len(set(labels)) != len(labels):
                raise SpecFormatError(f"player {i} has duplicate action labels {labels}")
        if not self.bins:
            raise SpecFormatError("at least one covariate bin is required")
        if len(set(self.bins)) != len(self.bins):
            raise SpecFormatError("duplicate bin identifiers")

        coeff = np.asarray(self.coeff, dtype=float)
        offset = np.asarray(self.offset, dtype=float)
        n = len(actions)
        shape = (n, *(len(a) for a in actions), len(self.bins))
        if coeff.ndim != len(shape) + 1 or coeff.shape[:-1] != shape:
            raise SpecFormatError(f"coeff has shape {coeff.shape}, expected {shape + ('d',)}")
        if offset.shape != shape:
            raise SpecFormatError(f"offset has shape {offset.shape}, expected {shape}")
        d = coeff.shape[-1]
        if d < 1:
            raise SpecFormatError("param_dim must be positive")
        lower = np.broadcast_to(np.asarray(self.lower, dtype=float), (d,)).copy()
        upper = np.broadcast_to(np.asarray(self.upper, dtype=float), (d,)).copy()
        if np.any(lower > upper):
            raise SpecFormatError("param_box lower bound exceeds upper bound")
        if not (np.all(np.isfinite(coeff)) and np.all(np.isfinite(offset))):
            raise SpecFormatError("payoff coefficients must be finite")
        names = tuple(self.param_names) or tuple(f"theta{k + 1}" for k in range(d))
        if len(names) != d:
            raise SpecFormatError(f"{len(names)} parameter names for d={d}")
        players = tuple(self.player_names) or tuple(f"player{i + 1}" for i in range(n))
        if len(players) != n:
            raise SpecFormatError(f"{len(players)} player names for {n} players")
        for arr in (coeff, offset, lower, upper):
            arr.setflags(write=False)
        object.__setattr__(self, "coeff", coeff)
        object.__setattr__(self, "offset", offset)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "param_names", names)
        object.__setattr__(self, "player_names", players)

    # -- shape helpers ---------------------------------------------------
    @property
    def n_players(self) -> int:
        return len(self.actions)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(a) for a in self.actions)

    @property
    def n_outcomes(self) -> int:
        return int(np.prod(self.shape))

    @property
    def n_bins(self) -> int:
        return len(self.bins)

    @property
    def param_dim(self) -> int:
        return self.coeff.shape[-1]

    @property
    def is_binary(self) -> bool:
        return all(k == 2 for k in self.shape)

    def outcomes(self) -> list[Outcome]:
        """All outcomes in row-major (flat index) order."""
        return list(itertools.product(*(range(k) for k in self.shape)))

    def flat_index(self, y: Sequence[int]) -> int:
        y = self.check_outcome(y)
        return int(np.ravel_multi_index(y, self.shape))

    def check_outcome(self, y: Sequence[int]) -> Outcome:
        y = tuple(int(a) for a in y)
        if len(y) != self.n_players or any(not 0 <= a < k for a, k in zip(y, self.shape)):
            raise IndexError(f"outcome {y} is not in Y with shape {self.shape}")
        return y

    def check_bin(self, x: int) -> int:
        if not 0 <= int(x) < self.n_bins:
            raise IndexError(f"bin {x} out of range (|X|={self.n_bins})")
        return int(x)

    def bin_index(self, bin_id) -> int:
        try:
            return self.bins.index(bin_id)
        except ValueError:
            raise KeyError(f"unknown bin {bin_id!r}") from None

    def outcome_from_labels(self, labels: Sequence) -> Outcome:
        if len(labels) != self.n_players:
            raise ContractError(f"expected {self.n_players} action labels, got {len(labels)}")
        out = []
        for i, lab in enumerate(labels):
            lookup = {str(a): k for k, a in enumerate(self.actions[i])}
            if str(lab) not in lookup:
                raise KeyError(f"unknown action label {lab!r} for player {i}")
            out.append(lookup[str(lab)])
        return tuple(out)

    def outcome_labels(self, y: Sequence[int]) -> tuple:
        return tuple(self.actions[i][a] for i, a in enumerate(y))

    # -- evaluation ------------------------------------------------------
    def as_theta(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.param_dim,):
            raise ContractError(f"theta has shape {theta.shape}, expected ({self.param_dim},)")
        return theta

    def payoffs(self, theta) -> np.ndarray:
        """Payoff indices for every (player, outcome, bin); shape ``(I, *Y, |X|)``."""
        return self.coeff @ self.as_theta(theta) + self.offset

    def in_box(self, theta, tol: float = 0.0) -> bool:
        theta = self.as_theta(theta)
        return bool(np.all(theta >= self.lower - tol) and np.all(theta <= self.upper + tol))

    # -- derived specs ---------------------------------------------------
    def entry_mask(self) -> np.ndarray:
        """1.0 where the player's own action is not the outside option; shape ``(I, *Y)``."""
        mask = np.zeros((self.n_players, *self.shape))
        for i in range(self.n_players):
            idx = [slice(None)] * self.n_players
            idx[i] = slice(1, None)
            mask[(i, *idx)] = 1.0
        return mask

    def shifted(self, amount: float = 0.0, theta_index: int | None = None) -> "GameSpec":
        """Add ``amount`` to every non-outside payoff.

        With ``theta_index`` set, the shift is ``amount * theta[theta_index]``
        instead, i.e. the scale of a common market shock is itself a
        parameter; payoffs stay affine in theta either way.
        """
        mask = self.entry_mask()[..., None]
        coeff, offset = self.coeff, self.offset
        if theta_index is None:
            offset = offset + amount * mask
        else:
            coeff = coeff.copy()
            coeff[..., theta_index] += amount * mask
        return GameSpec(self.actions, self.bins, coeff, offset, self.lower, self.upper,
                        self.param_names, self.player_names)

    def with_bounds(self, lower=None, upper=None) -> "GameSpec":
        lo = self.lower if lower is None else lower
        hi = self.upper if upper is None else upper
        return GameSpec(self.actions, self.bins, self.coeff, self.offset, lo, hi,
                        self.param_names, self.player_names)

    def restrict_bins(self, keep: Sequence[int]) -> "GameSpec":
        keep = list(keep)
        return GameSpec(self.actions, [self.bins[k] for k in keep], self.coeff[..., keep, :],
                        self.offset[..., keep], self.lower, self.upper,
                        self.param_names, self.player_names)


def entry_game(n_players: int = 2, bin_shifts: Sequence[float] | None = None,
               bins: Sequence | None = None, lower=-np.inf, upper=np.inf) -> GameSpec:
    """Symmetric-form entry game with entry payoff ``beta_i + Delta_i * #rivals in + shift_x``.

    theta is ``(beta_1..beta_I, Delta_1..Delta_I)``.  With two players and a
    zero shift this is the textbook two-firm entry game.
    """
    shifts = np.zeros(1) if bin_shifts is None else np.asarray(bin_shifts, dtype=float)
    if bins is None:
        bins = [f"x{k}" for k in range(len(shifts))] if bin_shifts is not None else ["x0"]
    n_x = len(shifts)
    shape = (2,) * n_players
    d = 2 * n_players
    coeff = np.zeros((n_players, *shape, n_x, d))
    offset = np.zeros((n_players, *shape, n_x))
    for y in itertools.product((0, 1), repeat=n_players):
        entrants = sum(y)
        for i in range(n_players):
            if y[i] == 1:
                coeff[(i, *y)][:, i] = 1.0
                coeff[(i, *y)][:, n_players + i] = entrants - 1
                offset[(i, *y)] = shifts
    names = [f"beta{i + 1}" for i in range(n_players)] + [f"delta{i + 1}" for i in range(n_players)]
    return GameSpec([(0, 1)] * n_players, bins, coeff, offset, lower, upper, names)


@dataclass(frozen=True)
class OutcomeEvent:
    """A non-empty set of outcomes (action-index tuples)."""

    members: frozenset

    def __post_init__(self):
        members = frozenset(tuple(int(a) for a in y) for y in self.members)
        if not members:
            raise ContractError("an outcome event must be non-empty")
        object.__setattr__(self, "members", members)

    def __iter__(self):
        return iter(sorted(self.members))

    def __len__(self):
        return len(self.members)

    def __contains__(self, y):
        return tuple(y) in self.members

    def __repr__(self):
        return "OutcomeEvent({" + ", ".join(str(y) for y in self) + "})"

    def flat(self, spec: GameSpec) -> tuple[int, ...]:
        return tuple(sorted(spec.flat_index(y) for y in self.members))


def as_event(spec: GameSpec, members) -> OutcomeEvent:
    """Coerce an event, a single outcome tuple, or an iterable of outcomes."""
    if isinstance(members, OutcomeEvent):
        event = members
    elif len(members) and np.isscalar(next(iter(members))):
        event = OutcomeEvent(frozenset([tuple(members)]))
    else:
        event = OutcomeEvent(frozenset(tuple(y) for y in members))
    for y in event.members:
        spec.check_outcome(y)
    return event


@dataclass(frozen=True, eq=False)
class MixingGrid:
    """Discrete distribution of a common market shock omega.

    The shock enters every non-outside payoff as ``scale * omega``; when
    ``scale_index`` is set the scale is read from ``theta[scale_index]``
    instead of the fixed ``scale``.
    """

    nodes: np.ndarray
    weights: np.ndarray
    scale: float = 1.0
    scale_index: int | None = None

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float).ravel()
        weights = np.asarray(self.weights, dtype=float).ravel()
        if nodes.shape != weights.shape or nodes.size == 0:
            raise ContractError("nodes and weights must be non-empty and of equal length")
        if np.any(np.diff(nodes) <= 0):
            raise ContractError("mixing nodes must be strictly increasing")
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-12:
            raise ContractError("mixing weights must be non-negative and sum to 1")
        if self.scale < 0:
            raise ContractError("sigma_omega must be >= 0")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    def __len__(self):
        return self.nodes.size

    def node_specs(self, spec: GameSpec) -> list[GameSpec]:
        if self.scale_index is not None:
            return [spec.shifted(w, theta_index=self.scale_index) for w in self.nodes]
        return [spec.shifted(self.scale * w) for w in self.nodes]


def stack_nodes(specs: Sequence[GameSpec]) -> GameSpec:
    """One game whose bins are ``(node, bin)`` pairs, node-major.

    Lets a single vectorised evaluation cover every grid node.
    """
    base = specs[0]
    bins = [(k, b) for k in range(len(specs)) for b in base.bins]
    coeff = np.concatenate([s.coeff for s in specs], axis=-2)
    offset = np.concatenate([s.offset for s in specs], axis=-1)
    return GameSpec(base.actions, bins, coeff, offset, base.lower, base.upper,
                    base.param_names, base.player_names)


def logistic_grid(k: int = 11, scale: float = 1.0, scale_index: int | None = None) -> MixingGrid:
    """Equal-weight grid on the logistic quantiles ``F^-1((2k-1)/(2K))``."""
    if k < 1:
        raise ContractError("grid size must be positive")
    probs = (2 * np.arange(1, k + 1) - 1) / (2 * k)
    return MixingGrid(logit(probs), np.full(k, 1.0 / k), scale, scale_index)
