"""Closed-form generalized likelihoods and bounds.

Everything here is a pure function of ``(spec, theta)``.  The public
functions evaluate one (event, bin) pair; :class:`BoundKernel` evaluates a
whole family of events over all bins at once, together with gradients,
and is what the solvers use.

Conventions: ``F`` is the standard logistic cdf, thresholds are extended
reals with ``F(-inf) = 0`` and ``F(+inf) = 1`` exactly.
"""

from __future__ import annotations

import itertools
from typing import Iterable, Sequence

import numpy as np
from scipy import sparse
from scipy.special import expit

from .errors import ComplexityError, NumericDomainError, UnsupportedStructureError
from .game import GameSpec, MixingGrid, OutcomeEvent, as_event

IE_LIMIT = 16
ZERO_TOL = 1e-14
ROUNDOFF_TOL = 1e-10


def logistic_pdf(z):
    p = expit(z)
    return p * (1.0 - p)


def interval_prob(lo, hi):
    """``max(0, F(hi) - F(lo))`` evaluated without cancellation in the tails."""
    lo, hi = np.broadcast_arrays(np.asarray(lo, dtype=float), np.asarray(hi, dtype=float))
    with np.errstate(invalid="ignore"):
        out = np.where(np.isposinf(hi), expit(-lo),
                       np.where(np.isneginf(lo), expit(hi), expit(hi) - expit(lo)))
    out = np.where(lo >= hi, 0.0, out)
    return np.maximum(out, 0.0)


def _lse(a, axis):
    """``log sum exp`` along ``axis`` (kept) with the usual max shift."""
    top = np.max(a, axis=axis, keepdims=True)
    return top + np.log(np.sum(np.exp(a - top), axis=axis, keepdims=True))


def _softmax(a, axis):
    e = np.exp(a - np.max(a, axis=axis, keepdims=True))
    return e / np.sum(e, axis=axis, keepdims=True)


def _check_finite(values, what="payoff index"):
    if not np.all(np.isfinite(values)):
        raise NumericDomainError(f"non-finite {what} encountered")


# ---------------------------------------------------------------------------
# vectorised building blocks on a payoff array V of shape (I, *Y, X)
# ---------------------------------------------------------------------------

def log_singleton_all(spec: GameSpec, V: np.ndarray, grad: bool = False):
    """``log L(y|x)`` for every outcome and bin; shape ``(*Y, X)``.

    With ``grad`` also returns d/dtheta with shape ``(*Y, X, d)``.
    """
    _check_finite(V)
    n = spec.n_players
    out = np.zeros(V.shape[1:])
    g = np.zeros(V.shape[1:] + (spec.param_dim,)) if grad else None
    for i in range(n):
        out += V[i] - _lse(V[i], axis=i)
        if grad:
            w = _softmax(V[i], axis=i)[..., None]
            C = spec.coeff[i]
            g += C - np.sum(w * C, axis=i, keepdims=True)
    return (out, g) if grad else out


def log_dominant_all(spec: GameSpec, V: np.ndarray, grad: bool = False):
    """``log`` of the strict-dominance lower bound for every outcome; shape ``(*Y, X)``."""
    _check_finite(V)
    n = spec.n_players
    d = spec.param_dim
    out = np.zeros(V.shape[1:])
    g = np.zeros(V.shape[1:] + (d,)) if grad else None
    n_x = V.shape[-1]
    for i in range(n):
        k = spec.shape[i]
        Vi = np.moveaxis(V[i], i, 0).reshape(k, -1, n_x)          # (own, rivals, X)
        diff = Vi[:, None] - Vi[None, :]                            # (own, alt, rivals, X)
        arg = np.argmin(diff, axis=2)                               # (own, alt, X)
        h = np.take_along_axis(diff, arg[:, :, None], axis=2)[:, :, 0]
        log_factor = -_lse(-h, axis=1)[:, 0]                         # (own, X)
        expand = [None] * n + [slice(None)]
        expand[i] = slice(None)
        out += log_factor[tuple(expand)]
        if grad:
            Ci = np.moveaxis(spec.coeff[i], i, 0).reshape(k, -1, n_x, d)
            x_idx = np.arange(n_x)
            # dh[a,b,x] = Ci[a, arg, x] - Ci[b, arg, x]
            ca = Ci[np.arange(k)[:, None, None], arg, x_idx[None, None, :]]
            cb = Ci[np.arange(k)[None, :, None], arg, x_idx[None, None, :]]
            dh = ca - cb
            w = _softmax(-h, axis=1)[..., None]
            dfac = np.sum(w * dh, axis=1)                            # (own, X, d)
            expand_g = [None] * n + [slice(None), slice(None)]
            expand_g[i] = slice(None)
            g += dfac[tuple(expand_g)]
    return (out, g) if grad else out


def binary_thresholds(spec: GameSpec, V: np.ndarray):
    """Threshold ``t_i(y, x) = -w_i(y_{-i}, x)`` for every player and outcome.

    Shape ``(I, *Y, X)``; the value does not depend on ``y_i``.
    """
    if not spec.is_binary:
        raise UnsupportedStructureError("threshold view needs |Y_i| = 2 for every player")
    _check_finite(V)
    t = np.empty_like(V)
    for i in range(spec.n_players):
        out_ = np.take(V[i], [0], axis=i)
        in_ = np.take(V[i], [1], axis=i)
        t[i] = np.broadcast_to(out_ - in_, V[i].shape)
    return t


def threshold_bounds(spec: GameSpec, V: np.ndarray):
    """Extended-real ``(l, r)`` arrays of shape ``(I, *Y, X)``.

    ``xi_i`` in ``[l_i(y), r_i(y)]`` is exactly the event that ``y_i`` is a
    best response to ``y_{-i}``.
    """
    t = binary_thresholds(spec, V)
    own = np.zeros_like(t, dtype=bool)
    for i in range(spec.n_players):
        idx = [slice(None)] * spec.n_players
        idx[i] = 1
        own[(i, *idx)] = True
    lo = np.where(own, t, -np.inf)
    hi = np.where(own, np.inf, t)
    return lo, hi


def threshold_grads(spec: GameSpec) -> np.ndarray:
    """d t_i / d theta; shape ``(I, *Y, X, d)``."""
    dt = np.empty_like(spec.coeff)
    for i in range(spec.n_players):
        out_ = np.take(spec.coeff[i], [0], axis=i)
        in_ = np.take(spec.coeff[i], [1], axis=i)
        dt[i] = np.broadcast_to(out_ - in_, spec.coeff[i].shape)
    return dt


class _IntersectionTable:
    """Pads a list of outcome sets so ``R`` can be evaluated in one gather."""

    def __init__(self, spec: GameSpec, sets: Sequence[tuple[int, ...]]):
        self.spec = spec
        self.sets = list(sets)
        width = max(len(s) for s in self.sets)
        pad = spec.n_outcomes
        self.members = np.full((len(self.sets), width), pad, dtype=int)
        for b, s in enumerate(self.sets):
            self.members[b, : len(s)] = s
        n_x, d, n = spec.n_bins, spec.param_dim, spec.n_players
        self.dt = np.concatenate(
            [threshold_grads(spec).reshape(n, -1, n_x, d), np.zeros((n, 1, n_x, d))], axis=1)

    def evaluate(self, V: np.ndarray, grad: bool = False):
        spec = self.spec
        n, n_x = spec.n_players, spec.n_bins
        lo, hi = threshold_bounds(spec, V)
        lo = np.concatenate([lo.reshape(n, -1, n_x), np.full((n, 1, n_x), -np.inf)], axis=1)
        hi = np.concatenate([hi.reshape(n, -1, n_x), np.full((n, 1, n_x), np.inf)], axis=1)
        L = lo[:, self.members]                                      # (I, B, m, X)
        H = hi[:, self.members]
        a_lo = np.argmax(L, axis=2)                                  # (I, B, X)
        a_hi = np.argmin(H, axis=2)
        lo_b = np.take_along_axis(L, a_lo[:, :, None], axis=2)[:, :, 0]
        hi_b = np.take_along_axis(H, a_hi[:, :, None], axis=2)[:, :, 0]
        P = interval_prob(lo_b, hi_b)                                # (I, B, X)
        R = np.prod(P, axis=0)
        if not grad:
            return R, None
        B = len(self.sets)
        x_idx = np.arange(n_x)[None, :]
        dP = np.zeros((n, B, n_x, spec.param_dim))
        for i in range(n):
            mi_lo = self.members[np.arange(B)[:, None], a_lo[i]]    # (B, X)
            mi_hi = self.members[np.arange(B)[:, None], a_hi[i]]
            d_lo = self.dt[i][mi_lo, x_idx]                           # (B, X, d)
            d_hi = self.dt[i][mi_hi, x_idx]
            f_lo = logistic_pdf(lo_b[i])[..., None]
            f_hi = logistic_pdf(hi_b[i])[..., None]
            dP[i] = np.where((P[i] > 0)[..., None], f_hi * d_hi - f_lo * d_lo, 0.0)
        dR = np.zeros((B, n_x, spec.param_dim))
        for i in range(n):
            others = np.prod(np.delete(P, i, axis=0), axis=0) if n > 1 else np.ones_like(R)
            dR += others[..., None] * dP[i]
        return R, dR


def _subset_expansion(events: Sequence[tuple[int, ...]], limit: int):
    """Sparse signed map from intersection terms to unions (inclusion-exclusion)."""
    index: dict[tuple[int, ...], int] = {}
    rows, cols, vals = [], [], []
    for a, members in enumerate(events):
        if len(members) > limit:
            raise ComplexityError(
                f"|A| = {len(members)} exceeds the inclusion-exclusion limit of {limit}")
        for k in range(1, len(members) + 1):
            sign = 1.0 if k % 2 else -1.0
            for sub in itertools.combinations(members, k):
                col = index.setdefault(sub, len(index))
                rows.append(a)
                cols.append(col)
                vals.append(sign)
    terms = sorted(index, key=index.get)
    matrix = sparse.csr_matrix((vals, (rows, cols)), shape=(len(events), len(terms)))
    return terms, matrix


def _clamp_probability(p, what="generalized likelihood"):
    if np.any(p < -ROUNDOFF_TOL) or np.any(p > 1 + ROUNDOFF_TOL):
        raise NumericDomainError(f"{what} left [0, 1] by more than round-off")
    return np.clip(p, 0.0, 1.0)


# ---------------------------------------------------------------------------
# family kernel
# ---------------------------------------------------------------------------

class BoundKernel:
    """Evaluates log-bounds for a fixed list of events over every bin.

    ``events`` is a list of flat-index tuples and ``kinds`` a parallel list
    of ``"upper"`` (generalized likelihood) or ``"lower"`` (dominance bound).
    :meth:`log_bounds` returns an array of shape ``(n_events, |X|)`` and,
    on request, gradients of shape ``(n_events, |X|, d)``.
    """

    def __init__(self, spec: GameSpec, events: Sequence[tuple[int, ...]],
                 kinds: Sequence[str], ie_limit: int = IE_LIMIT):
        self.spec = spec
        self.events = [tuple(sorted(e)) for e in events]
        self.kinds = list(kinds)
        if len(self.kinds) != len(self.events):
            raise ValueError("events and kinds differ in length")
        self.upper_single = [k for k, (e, t) in enumerate(zip(self.events, self.kinds))
                             if t == "upper" and len(e) == 1]
        self.upper_multi = [k for k, (e, t) in enumerate(zip(self.events, self.kinds))
                            if t == "upper" and len(e) > 1]
        self.lower = [k for k, t in enumerate(self.kinds) if t == "lower"]
        bad = [t for t in self.kinds if t not in ("upper", "lower")]
        if bad:
            raise ValueError(f"unknown bound kind {bad[0]!r}")
        if any(len(self.events[k]) != 1 for k in self.lower):
            raise ValueError("dominance lower bounds are defined for singletons only")
        self._table = None
        if self.upper_multi:
            if not spec.is_binary:
                raise UnsupportedStructureError(
                    "closed-form L(A) for |A| > 1 needs a binary-action game")
            terms, self._ie = _subset_expansion([self.events[k] for k in self.upper_multi],
                                                ie_limit)
            self._table = _IntersectionTable(spec, terms)

    def log_bounds(self, theta, grad: bool = False):
        spec = self.spec
        V = spec.payoffs(theta)
        n_e, n_x, d = len(self.events), spec.n_bins, spec.param_dim
        out = np.empty((n_e, n_x))
        g = np.empty((n_e, n_x, d)) if grad else None
        if self.upper_single or self.lower:
            flat = lambda arr: arr.reshape((spec.n_outcomes, n_x) + arr.shape[spec.n_players + 1:])
        if self.upper_single:
            res = log_singleton_all(spec, V, grad)
            vals, gr = (res if grad else (res, None))
            idx = [self.events[k][0] for k in self.upper_single]
            out[self.upper_single] = flat(vals)[idx]
            if grad:
                g[self.upper_single] = flat(gr)[idx]
        if self.lower:
            res = log_dominant_all(spec, V, grad)
            vals, gr = (res if grad else (res, None))
            idx = [self.events[k][0] for k in self.lower]
            out[self.lower] = flat(vals)[idx]
            if grad:
                g[self.lower] = flat(gr)[idx]
        if self.upper_multi:
            R, dR = self._table.evaluate(V, grad)
            L = _clamp_probability(self._ie @ R)
            with np.errstate(divide="ignore"):
                out[self.upper_multi] = np.log(L)
            if grad:
                dL = (self._ie @ dR.reshape(dR.shape[0], -1)).reshape(L.shape + (d,))
                with np.errstate(divide="ignore", invalid="ignore"):
                    g[self.upper_multi] = np.where(L[..., None] > 0, dL / L[..., None], 0.0)
        return (out, g) if grad else out


# ---------------------------------------------------------------------------
# public single-query operations
# ---------------------------------------------------------------------------

def payoff_index(spec: GameSpec, theta, i: int, y: Sequence[int], x: int) -> float:
    """``v_i(y, x; theta) = c[i][y][x] . theta + b[i][y][x]``."""
    if not 0 <= int(i) < spec.n_players:
        raise IndexError(f"player {i} out of range")
    y = spec.check_outcome(y)
    x = spec.check_bin(x)
    theta = spec.as_theta(theta)
    return float(spec.coeff[(int(i), *y, x)] @ theta + spec.offset[(int(i), *y, x)])


def log_singleton_likelihood(spec: GameSpec, theta, y, x: int) -> float:
    y = spec.check_outcome(y)
    x = spec.check_bin(x)
    return float(log_singleton_all(spec, spec.payoffs(theta))[(*y, x)])


def singleton_likelihood(spec: GameSpec, theta, y, x: int) -> float:
    """Product over players of the logit probability that ``y_i`` is a best response to ``y_{-i}``."""
    return float(np.exp(log_singleton_likelihood(spec, theta, y, x)))


def abj_residual(spec: GameSpec, theta, ccp, y, x: int) -> float:
    """``log phi(y|x) - log L(y|x; theta)``; ``-inf`` when ``phi(y|x) = 0``.

    ``ccp`` is either a :class:`~logitgame.ccp.CCPTable` or a plain array of
    shape ``(|X|, |Y|)`` indexed by bin then flat outcome.
    """
    phi = _ccp_value(spec, ccp, y, x)
    if not 0.0 <= phi <= 1.0:
        raise NumericDomainError(f"phi(y|x) = {phi} is not a probability")
    if phi == 0.0:
        return -np.inf
    return float(np.log(phi) - log_singleton_likelihood(spec, theta, y, x))


def _ccp_value(spec, ccp, y, x):
    probs = getattr(ccp, "probs", ccp)
    probs = np.asarray(probs, dtype=float)
    return float(probs[spec.check_bin(x), spec.flat_index(y)])


def dominant_lower_bound(spec: GameSpec, theta, y, x: int) -> float:
    """Probability that every ``y_i`` is a strictly dominant action."""
    y = spec.check_outcome(y)
    x = spec.check_bin(x)
    return float(np.exp(log_dominant_all(spec, spec.payoffs(theta))[(*y, x)]))


def intersection_probability(spec: GameSpec, theta, event, x: int) -> float:
    """``R(A|x)``: probability that every outcome in ``A`` is simultaneously an equilibrium."""
    if not spec.is_binary:
        raise UnsupportedStructureError("R(A|x) is available in closed form for binary games only")
    event = as_event(spec, event)
    x = spec.check_bin(x)
    table = _IntersectionTable(spec, [event.flat(spec)])
    R, _ = table.evaluate(spec.payoffs(theta))
    return float(R[0, x])


def union_likelihood(spec: GameSpec, theta, event, x: int, ie_limit: int = IE_LIMIT) -> float:
    """``L(A|x)``: probability that some outcome in ``A`` is an equilibrium."""
    event = as_event(spec, event)
    x = spec.check_bin(x)
    if len(event) == 1:
        return singleton_likelihood(spec, theta, next(iter(event)), x)
    if not spec.is_binary:
        raise UnsupportedStructureError("L(A|x) for |A| > 1 needs a binary-action game")
    terms, ie = _subset_expansion([event.flat(spec)], ie_limit)
    R, _ = _IntersectionTable(spec, terms).evaluate(spec.payoffs(theta))
    return float(_clamp_probability(ie @ R[:, x])[0])


def overlap_matrix(spec: GameSpec, theta, x: int) -> np.ndarray:
    """``R({y, y'}|x)`` for every pair of flat outcomes."""
    n_y = spec.n_outcomes
    pairs = list(itertools.combinations(range(n_y), 2))
    M = np.zeros((n_y, n_y))
    if pairs:
        R, _ = _IntersectionTable(spec, pairs).evaluate(spec.payoffs(theta))
        for (a, b), r in zip(pairs, R[:, x]):
            M[a, b] = M[b, a] = r
    return M


def connected_subsets(adjacency: np.ndarray, max_size: int) -> list[tuple[int, ...]]:
    """All vertex sets of size <= ``max_size`` that induce a connected subgraph."""
    n = adjacency.shape[0]
    nbrs = [set(np.flatnonzero(adjacency[v])) for v in range(n)]
    found: set[tuple[int, ...]] = set()
    frontier = [frozenset([v]) for v in range(n)]
    while frontier:
        nxt = []
        for s in frontier:
            key = tuple(sorted(s))
            if key in found:
                continue
            found.add(key)
            if len(s) < max_size:
                for v in set().union(*(nbrs[u] for u in s)) - s:
                    nxt.append(s | {v})
        frontier = nxt
    return sorted(found, key=lambda s: (len(s), s))


def core_determining_family(spec: GameSpec, theta, x: int, max_cardinality: int | None = None,
                            zero_tol: float = ZERO_TOL) -> list[OutcomeEvent]:
    """Events with ``|A| <= K`` that cannot be split into two disconnected parts.

    Two outcomes are connected when ``R({y, y'}|x) > zero_tol``.  An event
    splits into non-empty disjoint parts with no connected cross pair iff
    its induced overlap graph is disconnected, so the family is the set of
    connected induced subgraphs.
    """
    if not spec.is_binary:
        raise UnsupportedStructureError("core-determining family needs a binary-action game")
    K = spec.n_outcomes if max_cardinality is None else int(max_cardinality)
    if not 1 <= K <= spec.n_outcomes:
        raise ValueError(f"K must lie in [1, {spec.n_outcomes}]")
    adjacency = overlap_matrix(spec, theta, spec.check_bin(x)) > zero_tol
    outcomes = spec.outcomes()
    return [OutcomeEvent(frozenset(outcomes[k] for k in s))
            for s in connected_subsets(adjacency, K)]


_BOUNDS = {
    "upper_L": lambda s, th, A, x: singleton_likelihood(s, th, _single(A), x),
    "lower_dominant": lambda s, th, A, x: dominant_lower_bound(s, th, _single(A), x),
    "R": intersection_probability,
    "union_L": union_likelihood,
}


def _single(event):
    members = list(event)
    if len(members) != 1:
        raise ValueError("this bound is defined for singleton events")
    return members[0]


def mixed_bound(spec: GameSpec, theta, grid: MixingGrid, bound_kind: str, event, x: int) -> float:
    """Integrate a bound over the common-shock grid: ``sum_k w_k * bound(.|x, omega_k)``."""
    if bound_kind not in _BOUNDS:
        raise ValueError(f"bound_kind must be one of {sorted(_BOUNDS)}")
    event = as_event(spec, event)
    fn = _BOUNDS[bound_kind]
    vals = np.array([fn(s, theta, event, x) for s in grid.node_specs(spec)])
    return float(grid.weights @ vals)
