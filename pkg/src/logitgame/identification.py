"""Criterion evaluation, membership, feasible points and projections of identified sets.

Two formulations share the multi-start machinery below.

* Without latent variables the restrictions are written in log form,
  ``g = log phi(A|x) - log L(A|x; theta) <= 0`` for upper bounds and
  ``g = log LB(y|x; theta) - log phi(y|x) <= 0`` for dominance lower
  bounds, and the solvers work on theta alone.
* With a mixing grid (or, in :mod:`logitgame.inference`, a confidence band)
  latent choice probabilities ``q(y|x, omega_k)`` enter linearly, so the
  restrictions are written in level form ``q(A) <= L(A)`` and
  ``LB <= q(y)`` over ``(theta, q)`` jointly.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog, minimize
from scipy.stats import qmc

from .ccp import CCPTable
from .errors import ContractError, SolverError
from .family import InequalityFamily, build_family, family_at
from .game import GameSpec, MixingGrid, stack_nodes
from .likelihood import BoundKernel

# SLSQP clips its own trial steps back into the box and says so on every call
warnings.filterwarnings("ignore", "Values in x were outside bounds", RuntimeWarning)

FEAS_TOL = 1e-6
MEMBER_TOL = 1e-9
SMOOTH_ALPHA = 200.0
TRUST_RADIUS = 10.0
TRUST_EXPANSIONS = 3
MAX_RESTARTS = 20
Q_FLOOR = 1e-10
DEFAULT_SPAN = 2.0
STATUSES = ("optimal", "infeasible", "max-iter", "stalled")


@dataclass(eq=False)
class SolveReport:
    """Outcome of a feasibility or projection run.

    ``objective`` is the criterion value at ``theta`` for feasibility runs
    and the attained ``p . theta`` for projections (also stored in
    ``value``).  ``q`` holds latent choice probabilities, shaped
    ``(bins with data, nodes, outcomes)``, when the program has them.
    """

    objective: float
    theta: np.ndarray | None
    status: str
    starts: int
    seeds: list
    q: np.ndarray | None = None
    value: float = math.nan
    violation: float = math.nan
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.status not in STATUSES:
            raise ValueError(f"unknown status {self.status!r}")

    @property
    def ok(self) -> bool:
        return self.status == "optimal"


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def smooth_max(values, alpha: float = SMOOTH_ALPHA):
    """Log-sum-exp smoothing ``(1/alpha) log sum exp(alpha v)`` and its softmax weights.

    Satisfies ``max v <= smooth_max(v) <= max v + log(len(v)) / alpha``.
    """
    v = np.asarray(values, dtype=float)
    top = v.max()
    if not np.isfinite(top):
        w = (v == top).astype(float)
        return top, w / w.sum()
    e = np.exp(alpha * (v - top))
    s = e.sum()
    return top + math.log(s) / alpha, e / s


def as_ccp(spec: GameSpec, phi) -> CCPTable:
    """Accept a :class:`CCPTable` or a population array ``(|X|, |Y|)`` / ``(|Y|,)``."""
    if isinstance(phi, CCPTable):
        table = phi
    else:
        arr = np.asarray(phi, dtype=float)
        if arr.ndim == 1:
            arr = arr[None, :]
        if arr.shape != (spec.n_bins, spec.n_outcomes):
            raise ContractError(f"CCP array has shape {arr.shape}, expected "
                                f"{(spec.n_bins, spec.n_outcomes)}")
        table = CCPTable.population(arr)
    if table.probs.shape[1] != spec.n_outcomes or np.any(table.bins >= spec.n_bins) \
            or np.any(table.bins < 0):
        raise ContractError("CCP table does not match the game's outcomes or bins")
    return table


def check_family(spec: GameSpec, family: InequalityFamily):
    if family.active.shape != (len(family.events), spec.n_bins):
        raise ContractError("family activity mask does not match the game's bins")
    if any(k < 0 or k >= spec.n_outcomes for e in family.events for k in e):
        raise ContractError("family refers to outcomes the game does not have")
    grid = family.grid
    if grid is not None and grid.scale_index is not None and \
            not 0 <= grid.scale_index < spec.param_dim:
        raise ContractError("mixing scale index outside the parameter vector")


def effective_box(spec: GameSpec, span: float = DEFAULT_SPAN):
    """Finite sampling box: infinite sides are replaced by a window of width ``2 span``."""
    lo, hi = spec.lower.astype(float), spec.upper.astype(float)
    flo, fhi = np.isfinite(lo), np.isfinite(hi)
    lo2 = np.where(flo, lo, np.where(fhi, hi - 2 * span, -span))
    hi2 = np.where(fhi, hi, np.where(flo, lo + 2 * span, span))
    return lo2, hi2


def start_points(spec: GameSpec, n: int, seed: int = 0, span: float = DEFAULT_SPAN) -> np.ndarray:
    """Latin-hypercube starting points over the (effective) parameter box."""
    if n < 1:
        raise ContractError("need at least one starting point")
    lo, hi = effective_box(spec, span)
    u = qmc.LatinHypercube(d=spec.param_dim, seed=np.random.default_rng(seed)).random(n)
    return lo + u * (hi - lo)


def _box_bounds(spec: GameSpec):
    return [(None if not np.isfinite(a) else float(a), None if not np.isfinite(b) else float(b))
            for a, b in zip(spec.lower, spec.upper)]


def _trust_bounds(spec: GameSpec, center, radius):
    """Box bounds with infinite sides replaced by ``center +- radius``.

    Returns the bounds and a mask of the sides that are artificial.
    """
    lo = np.where(np.isfinite(spec.lower), spec.lower, center - radius)
    hi = np.where(np.isfinite(spec.upper), spec.upper, center + radius)
    return list(zip(lo.tolist(), hi.tolist())), (~np.isfinite(spec.lower), ~np.isfinite(spec.upper))


def _on_artificial_face(spec, theta, center, radius, tol=1e-7):
    lo_art, hi_art = ~np.isfinite(spec.lower), ~np.isfinite(spec.upper)
    return bool(np.any(lo_art & (theta <= center - radius + tol))
                or np.any(hi_art & (theta >= center + radius - tol)))


def _clip(spec: GameSpec, theta):
    return np.clip(theta, spec.lower, spec.upper)


def _ccp_bounds(spec: GameSpec, table: CCPTable):
    return table.bins, table.probs.copy(), table.probs.copy()


# ---------------------------------------------------------------------------
# log-form program over theta
# ---------------------------------------------------------------------------

class LogProgram:
    """Restrictions ``g(theta) <= 0`` in log form for a fixed CCP table."""

    def __init__(self, spec: GameSpec, ccp: CCPTable, family: InequalityFamily):
        self.spec = spec
        self.family = family
        self.kernel = BoundKernel(spec, family.events, family.bounds)
        full = ccp.full(spec)
        has = ~np.isnan(full[:, 0])
        self.excluded = [int(x) for x in np.flatnonzero(~has)]
        full = np.nan_to_num(full)
        phiA = np.array([full[:, list(e)].sum(axis=1) for e in family.events])
        upper = np.array([b == "upper" for b in family.bounds])[:, None]
        rows = family.active & has[None, :]
        empty = phiA <= 0
        self.blocked = bool(np.any(rows & ~upper & empty))
        rows &= ~(upper & empty)
        self.e_idx, self.x_idx = np.nonzero(rows)
        with np.errstate(divide="ignore"):
            self.logphi = np.log(phiA[self.e_idx, self.x_idx])
        self.sign = np.where(upper[self.e_idx, 0], 1.0, -1.0)

    @property
    def size(self) -> int:
        return self.e_idx.size

    def residuals(self, theta, grad: bool = False):
        if grad:
            vals, dvals = self.kernel.log_bounds(theta, grad=True)
            v, dv = vals[self.e_idx, self.x_idx], dvals[self.e_idx, self.x_idx]
            g = self.sign * (self.logphi - v)
            return g, -self.sign[:, None] * dv
        v = self.kernel.log_bounds(theta)[self.e_idx, self.x_idx]
        return self.sign * (self.logphi - v)

    def exact(self, theta) -> float:
        if self.blocked:
            return math.inf
        if self.size == 0:
            return -math.inf
        return float(self.residuals(theta).max())

    def _capped(self, theta):
        # SLSQP asks for values and Jacobian separately at the same point
        key = np.asarray(theta, dtype=float).tobytes()
        if getattr(self, "_last", (None,))[0] == key:
            return self._last[1]
        g, J = self.residuals(theta, grad=True)
        bad = ~np.isfinite(g)
        if bad.any():
            g = np.where(bad, 1e3, g)
            J = np.where(bad[:, None], 0.0, J)
        self._last = (key, (g, J))
        return g, J

    def feasible_from(self, theta0, alpha=SMOOTH_ALPHA, maxiter=500):
        """Smooth-max descent followed by an exact-max epigraph polish."""
        spec = self.spec
        theta0 = _clip(spec, np.asarray(theta0, dtype=float))
        if self.blocked or self.size == 0:
            return dict(theta=theta0, q=None, objective=self.exact(theta0), converged=True,
                        hit_limit=False)
        bounds = _box_bounds(spec)

        def fun(th):
            g, J = self._capped(th)
            s, w = smooth_max(g, alpha)
            return s, w @ J

        r1 = minimize(fun, theta0, jac=True, method="L-BFGS-B", bounds=bounds,
                      options=dict(maxiter=maxiter))
        th1 = _clip(spec, r1.x)
        d = spec.param_dim
        z0 = np.append(th1, self.exact(th1))
        cons = dict(type="ineq",
                    fun=lambda z: z[d] - self._capped(z[:d])[0],
                    jac=lambda z: np.hstack([-self._capped(z[:d])[1],
                                             np.ones((self.size, 1))]))
        r2 = minimize(lambda z: z[d], z0, jac=lambda z: np.eye(d + 1)[d], method="SLSQP",
                      bounds=bounds + [(None, None)], constraints=[cons],
                      options=dict(maxiter=maxiter, ftol=1e-12))
        th2 = _clip(spec, r2.x[:d])
        q1, q2 = self.exact(th1), self.exact(th2)
        theta, obj = (th2, q2) if q2 <= q1 else (th1, q1)
        return dict(theta=theta, q=None, objective=obj,
                    converged=bool(r1.success or r2.success),
                    hit_limit=bool(r1.status == 1 and r2.status == 9))

    def optimize_from(self, theta0, q0, u, maxiter=500, radius=None):
        """Minimize ``u . theta`` subject to ``g(theta) <= 0`` from a feasible start."""
        cons = dict(type="ineq", fun=lambda th: -self._capped(th)[0],
                    jac=lambda th: -self._capped(th)[1])
        bounds = (_box_bounds(self.spec) if radius is None
                  else _trust_bounds(self.spec, theta0, radius)[0])
        r = minimize(lambda th: float(u @ th), theta0, jac=lambda th: u, method="SLSQP",
                     bounds=bounds, constraints=[cons],
                     options=dict(maxiter=maxiter, ftol=1e-12))
        return dict(theta=_clip(self.spec, r.x), q=None, converged=bool(r.success),
                    hit_limit=r.status == 9)

    def accepts(self, theta, tol=FEAS_TOL) -> bool:
        return self.exact(theta) <= tol

    def cut_feasible(self, theta0, u, c, maxiter=300):
        """Is there a member with ``u . theta <= c``?  Decided by exact criterion after an epigraph solve."""
        spec, d = self.spec, self.spec.param_dim
        nu = u @ u
        th = theta0 - max(0.0, (u @ theta0 - c) / nu) * u
        th = _clip(spec, th)
        cons = [dict(type="ineq", fun=lambda z: z[d] - self._capped(z[:d])[0],
                     jac=lambda z: np.hstack([-self._capped(z[:d])[1],
                                              np.ones((self.size, 1))])),
                dict(type="ineq", fun=lambda z: np.array([c - u @ z[:d]]),
                     jac=lambda z: np.append(-u, 0.0)[None, :])]
        r = minimize(lambda z: z[d], np.append(th, self.exact(th)),
                     jac=lambda z: np.eye(d + 1)[d], method="SLSQP",
                     bounds=_box_bounds(spec) + [(None, None)], constraints=cons,
                     options=dict(maxiter=maxiter, ftol=1e-14))
        out = _clip(spec, r.x[:d])
        ok = self.exact(out) <= 1e-8 and u @ out <= c + 1e-10
        return ok, out


# ---------------------------------------------------------------------------
# level-form program over (theta, q)
# ---------------------------------------------------------------------------

class LevelProgram:
    """Restrictions over ``theta`` and latent ``q(y|x, omega_k)``.

    ``q`` lives in ``[0, 1]``, sums to one for every (bin, node) and
    averages over nodes (with the grid weights) to a vector inside
    ``[phi_lo, phi_hi]`` for every bin with data.  Without a grid there is a
    single node with weight one, so ``q`` is the CCP itself.
    """

    def __init__(self, spec: GameSpec, family: InequalityFamily, bins, phi_lo, phi_hi,
                 grid: MixingGrid | None = None):
        self.spec, self.family = spec, family
        self.bins = np.asarray(bins, dtype=int)
        self.phi_lo = np.atleast_2d(np.asarray(phi_lo, dtype=float))
        self.phi_hi = np.atleast_2d(np.asarray(phi_hi, dtype=float))
        grid = grid if grid is not None else family.grid
        self.grid = grid
        specs = grid.node_specs(spec) if grid is not None else [spec]
        self.weights = grid.weights if grid is not None else np.ones(1)
        self.kernel = BoundKernel(stack_nodes(specs), family.events, family.bounds)
        nb, K, nY = self.bins.size, len(specs), spec.n_outcomes
        self.shape_q = (nb, K, nY)
        self.nq = nb * K * nY
        qi = np.arange(self.nq).reshape(self.shape_q)
        rows_e, rows_x, rows_k, M = [], [], [], []
        for b, x in enumerate(self.bins):
            for k in range(K):
                for e, ev in enumerate(family.events):
                    if family.active[e, x]:
                        rows_e.append(e)
                        rows_x.append(x)
                        rows_k.append(k)
                        row = np.zeros(self.nq)
                        row[qi[b, k, list(ev)]] = 1.0
                        M.append(row)
        self.rows_e, self.rows_x, self.rows_k = (np.array(v, dtype=int) for v in (rows_e, rows_x, rows_k))
        self.M = np.array(M).reshape(len(M), self.nq)
        self.sign = np.array([1.0 if family.bounds[e] == "upper" else -1.0 for e in rows_e])
        simplex = np.zeros((nb * K, self.nq))
        for b in range(nb):
            for k in range(K):
                simplex[b * K + k, qi[b, k]] = 1.0
        avg = np.zeros((nb * nY, self.nq))
        for b in range(nb):
            for y in range(nY):
                avg[b * nY + y, qi[b, :, y]] = self.weights
        lo, hi = self.phi_lo.ravel(), self.phi_hi.ravel()
        fixed = np.isclose(lo, hi, rtol=0.0, atol=1e-15)
        # when every outcome of a bin is pinned, its last averaging row is the
        # weighted sum of the simplex rows minus the others; drop it to keep
        # the equality Jacobian of full rank
        pinned = fixed.copy()
        for b in range(nb):
            if fixed[b * nY:(b + 1) * nY].all():
                pinned[(b + 1) * nY - 1] = False
        self.A_eq = np.vstack([simplex, avg[pinned]])
        self.b_eq = np.concatenate([np.ones(nb * K), lo[pinned]])
        self.A_band = avg[~fixed]
        self.band_lo, self.band_hi = lo[~fixed], hi[~fixed]
        self._cache = None

    @property
    def size(self) -> int:
        return self.rows_e.size

    def bound_logs(self, theta, grad: bool = False):
        """Log bounds per constraint row (and their theta-gradients)."""
        key = np.asarray(theta, dtype=float).tobytes()
        if self._cache is not None and self._cache[0] == key and (self._cache[1] or not grad):
            out = self._cache[2]
            return out if grad else out[0]
        res = self.kernel.log_bounds(theta, grad)
        vals, dvals = res if grad else (res, None)
        idx = (self.rows_e, self.rows_k * self.spec.n_bins + self.rows_x)
        logb = vals[idx] if self.size else np.zeros(0)
        dlog = None
        if grad:
            dlog = dvals[idx] if self.size else np.zeros((0, self.spec.param_dim))
        self._cache = (key, grad, (logb, dlog))
        return (logb, dlog) if grad else logb

    def initial_q(self):
        mid = np.clip(0.5 * (self.phi_lo + self.phi_hi), 0, 1)
        mid = mid / mid.sum(axis=1, keepdims=True)
        return np.repeat(mid[:, None, :], self.shape_q[1], axis=1).ravel()

    # ---- LP at fixed theta ------------------------------------------------
    def lp(self, theta, t: float = 0.0):
        """Latent ``q`` with upper bounds relaxed by ``e^t`` and lower bounds by ``e^-t``; None if infeasible."""
        logb = self.bound_logs(theta)
        up = self.sign > 0
        level = np.exp(np.where(up, logb + t, logb - t))
        A_ub = np.vstack([np.where(up[:, None], self.M, -self.M), self.A_band, -self.A_band])
        b_ub = np.concatenate([np.where(up, level, -level), self.band_hi, -self.band_lo])
        res = linprog(np.zeros(self.nq), A_ub=A_ub if A_ub.size else None,
                      b_ub=b_ub if A_ub.size else None, A_eq=self.A_eq, b_eq=self.b_eq,
                      bounds=(0.0, 1.0), method="highs")
        if res.status == 0:
            return res.x
        if res.status == 2:
            return None
        raise SolverError(f"linear program failed: {res.message}")

    def criterion(self, theta, tol: float = 1e-10, span: float = 60.0) -> float:
        """``inf { t : lp(theta, t) feasible }``, the log-form criterion with latent q."""
        if self.size == 0:
            return -math.inf
        lo, hi = -span, span
        if self.lp(theta, hi) is None:
            return math.inf
        if self.lp(theta, lo) is not None:
            return lo
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if self.lp(theta, mid) is None:
                lo = mid
            else:
                hi = mid
        return hi

    def exact(self, theta) -> float:
        return self.criterion(theta)

    def accepts(self, theta, tol=FEAS_TOL) -> bool:
        return self.lp(theta, tol) is not None

    # ---- nonlinear programs over (theta, q) --------------------------------
    def _ratio(self, theta, q, grad=False):
        """``c = sign * (1 - q(A) / bound)``; ``c >= 0`` is the restriction, scale-free in the bound."""
        res = self.bound_logs(theta, grad)
        logb, dlog = res if grad else (res, None)
        inv = np.exp(-np.maximum(logb, -300.0))
        r = (self.M @ q) * inv
        c = self.sign * (1.0 - r)
        if not grad:
            return c
        return c, (self.sign * r)[:, None] * dlog, -(self.sign * inv)[:, None] * self.M

    def _log_residuals(self, theta, q):
        """Log-form residuals at fixed q, capped where q(A) = 0."""
        logb, dlog = self.bound_logs(theta, grad=True)
        qA = self.M @ q
        with np.errstate(divide="ignore"):
            g = self.sign * (np.log(qA) - logb)
        J = -self.sign[:, None] * dlog
        bad = ~np.isfinite(g)
        return np.where(bad, np.sign(g) * 1e3, g), np.where(bad[:, None], 0.0, J)

    def _log_epigraph(self, z, d):
        """``t - g`` with ``g = sign * (log q(A) - log bound)`` and its Jacobian in ``(theta, q, t)``."""
        th, q = z[:d], z[d:d + self.nq]
        logb, dlog = self.bound_logs(th, grad=True)
        qA = np.maximum(self.M @ q, Q_FLOOR)
        g = self.sign * (np.log(qA) - logb)
        J = np.hstack([self.sign[:, None] * dlog, -(self.sign / qA)[:, None] * self.M,
                       np.ones((self.size, 1))])
        return z[-1] - g, J

    def _constraints(self, d, with_t, log_form=False):
        nq = self.nq

        def fam(z):
            if log_form:
                return self._log_epigraph(z if with_t else np.append(z, 0.0), d)[0]
            c = self._ratio(z[:d], z[d:d + nq])
            return c + z[-1] if with_t else c

        def fam_jac(z):
            if log_form:
                J = self._log_epigraph(z if with_t else np.append(z, 0.0), d)[1]
                return J if with_t else J[:, :-1]
            _, jt, jq = self._ratio(z[:d], z[d:d + nq], grad=True)
            J = np.hstack([jt, jq])
            return np.hstack([J, np.ones((self.size, 1))]) if with_t else J

        def pad(A):
            blocks = [np.zeros((A.shape[0], d)), A]
            if with_t:
                blocks.append(np.zeros((A.shape[0], 1)))
            return np.hstack(blocks)

        J_eq = pad(self.A_eq)
        cons = [dict(type="ineq", fun=fam, jac=fam_jac),
                dict(type="eq", fun=lambda z: self.A_eq @ z[d:d + nq] - self.b_eq,
                     jac=lambda z: J_eq)]
        if self.A_band.size:
            A2 = np.vstack([self.A_band, -self.A_band])
            rhs = np.concatenate([self.band_lo, -self.band_hi])
            Jb = pad(A2)
            cons.append(dict(type="ineq", fun=lambda z: A2 @ z[d:d + nq] - rhs,
                             jac=lambda z: Jb))
        return cons

    def feasible_from(self, theta0, alpha=SMOOTH_ALPHA, maxiter=500):
        """Smooth-max descent in theta at the band-centre q, then a joint log-form
        epigraph polish over ``(theta, q, t)``."""
        spec, d = self.spec, self.spec.param_dim
        theta0 = _clip(spec, np.asarray(theta0, dtype=float))
        q0 = self.initial_q()
        if self.size == 0:
            return dict(theta=theta0, q=q0, objective=-math.inf, converged=True,
                        hit_limit=False)
        bounds = _box_bounds(spec)

        def fun(th):
            g, J = self._log_residuals(th, q0)
            s, w = smooth_max(g, alpha)
            return s, w @ J

        r1 = minimize(fun, theta0, jac=True, method="L-BFGS-B", bounds=bounds,
                      options=dict(maxiter=maxiter))
        th1 = _clip(spec, r1.x)
        q_start = np.maximum(q0, Q_FLOOR)
        t0 = -float(np.min(self._log_epigraph(np.concatenate([th1, q_start, [0.0]]), d)[0]))
        z0 = np.concatenate([th1, q_start, [t0]])
        cons = self._constraints(d, True, log_form=True)
        r2 = minimize(lambda z: z[-1], z0, jac=lambda z: np.eye(z.size)[-1], method="SLSQP",
                      bounds=bounds + [(Q_FLOOR, 1.0)] * self.nq + [(None, None)],
                      constraints=cons, options=dict(maxiter=maxiter, ftol=1e-12))
        th2 = _clip(spec, r2.x[:d])
        v1, v2 = self.exact(th1), self.exact(th2)
        theta, obj = (th2, v2) if v2 <= v1 else (th1, v1)
        q = self.lp(theta, max(obj, 0.0) + 1e-9) if np.isfinite(obj) else None
        return dict(theta=theta, q=q0 if q is None else q, objective=obj,
                    converged=bool(r1.success or r2.success),
                    hit_limit=bool(r1.status == 1 and r2.status == 9))

    def optimize_from(self, theta0, q0, u, maxiter=500, radius=None):
        spec, d = self.spec, self.spec.param_dim
        if q0 is None:
            q0 = self.lp(theta0, FEAS_TOL)
            q0 = self.initial_q() if q0 is None else q0
        z0 = np.concatenate([theta0, q0])
        grad = np.concatenate([u, np.zeros(self.nq)])
        bounds = (_box_bounds(spec) if radius is None
                  else _trust_bounds(spec, theta0, radius)[0])
        z0[d:] = np.maximum(z0[d:], Q_FLOOR)
        r = minimize(lambda z: float(u @ z[:d]), z0, jac=lambda z: grad, method="SLSQP",
                     bounds=bounds + [(Q_FLOOR, 1.0)] * self.nq,
                     constraints=self._constraints(d, False, log_form=True),
                     options=dict(maxiter=maxiter, ftol=1e-12))
        return dict(theta=_clip(spec, r.x[:d]), q=np.clip(r.x[d:], 0, 1),
                    converged=bool(r.success), hit_limit=r.status == 9)


# ---------------------------------------------------------------------------
# multi-start drivers
# ---------------------------------------------------------------------------

def _run_starts(fn, points, threads):
    if threads and threads > 1 and len(points) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, points))
    return [fn(p) for p in points]


def _search(program, spec, starts, seed, extra=(), smooth_alpha=SMOOTH_ALPHA, maxiter=500,
            threads=1):
    points = list(start_points(spec, starts, seed)) + [np.asarray(e, float) for e in extra]
    runs = _run_starts(lambda p: program.feasible_from(p, smooth_alpha, maxiter), points,
                       threads)
    for k, r in enumerate(runs):
        r["start"] = k
    return runs


def _center(spec, ccp, family, seed, smooth_alpha, threads):
    """Min-criterion point of the ABJ relaxation: the point of largest uniform slack."""
    if family.kind == "abj":
        return []
    abj = build_family(spec, "abj", grid=family.grid)
    prog = _program(spec, ccp, abj)
    runs = _search(prog, spec, 2, seed, smooth_alpha=smooth_alpha, threads=threads)
    best = min(runs, key=lambda r: (r["objective"], r["start"]))
    return [best["theta"]] if np.isfinite(best["objective"]) else []


def _program(spec, ccp, family):
    if family.grid is None:
        return LogProgram(spec, ccp, family)
    bins, lo, hi = _ccp_bounds(spec, ccp)
    return LevelProgram(spec, family, bins, lo, hi, family.grid)


def _summarize(runs, tol):
    best = min(runs, key=lambda r: (r["objective"], r["start"]))
    if not any(r["converged"] for r in runs) and not best["objective"] <= tol:
        status = "max-iter" if any(r["hit_limit"] for r in runs) else "stalled"
    else:
        status = "optimal" if best["objective"] <= tol else "infeasible"
    return best, status


def feasible_search(program, spec, starts=4, seed=0, extra=(), tol=FEAS_TOL,
                    smooth_alpha=SMOOTH_ALPHA, maxiter=500, threads=1) -> SolveReport:
    """Multi-start ``min t s.t. g <= t`` on a prepared program (log or level form)."""
    runs = _search(program, spec, starts, seed, extra, smooth_alpha, maxiter, threads)
    best, status = _summarize(runs, tol)
    return SolveReport(best["objective"], best["theta"], status, len(runs), [seed] * len(runs),
                       q=None if best["q"] is None else best["q"].reshape(program.shape_q),
                       diagnostics=dict(runs=runs, excluded=getattr(program, "excluded", [])))


def find_feasible_point(spec: GameSpec, phi, family: InequalityFamily, starts: int = 4,
                        seed: int = 0, tol: float = FEAS_TOL,
                        smooth_alpha: float = SMOOTH_ALPHA, x0=None, maxiter: int = 500,
                        threads: int = 1) -> SolveReport:
    """Search for theta with ``max g(theta) <= tol``.

    Latin-hypercube starts over the parameter box, the ABJ min-criterion
    point and any user starts ``x0`` are each refined by smooth-max descent
    and an exact-max epigraph polish; the best run is reported.
    """
    if starts < 1:
        raise ContractError("starts must be >= 1")
    ccp = as_ccp(spec, phi)
    check_family(spec, family)
    extra = [] if x0 is None else list(np.atleast_2d(np.asarray(x0, dtype=float)))
    extra += _center(spec, ccp, family, seed, smooth_alpha, threads)
    program = _program(spec, ccp, family)
    return feasible_search(program, spec, starts, seed, extra, tol, smooth_alpha, maxiter,
                           threads)


def bisect_endpoint(program: LogProgram, theta_in, u, bounds_lo=None, step: float = 0.05,
                    tol: float = 1e-6, max_expand: int = 60):
    """Lower end of ``u . theta`` over the set by bisection on cut feasibility.

    ``theta_in`` must be a member.  Only valid for convex sets.
    Returns ``(level, member)``, the smallest certified level and a member
    attaining it (``-inf`` if the set is unbounded along ``-u``).
    """
    spec = program.spec
    lo, hi = spec.lower, spec.upper
    with np.errstate(invalid="ignore"):
        floor = float(np.sum(np.where(u > 0, u * lo, np.where(u < 0, u * hi, 0.0))))
    c_in, best = float(u @ theta_in), np.asarray(theta_in, dtype=float)
    c_out, h = None, step
    for _ in range(max_expand):
        c = c_in - h
        if c < floor:
            c_out = c
            break
        ok, th = program.cut_feasible(best, u, c)
        if ok:
            c_in, best = float(u @ th), th
            h *= 2
        else:
            c_out = c
            break
    if c_out is None:
        return -math.inf, best
    while c_in - c_out > tol:
        c = 0.5 * (c_in + c_out)
        ok, th = program.cut_feasible(best, u, c)
        if ok:
            c_in, best = min(c, float(u @ th)), th
        else:
            c_out = c
    return c_in, best


def project(spec: GameSpec, phi, family: InequalityFamily, direction, sense: str = "min",
            starts: int = 4, seed: int = 0, tol: float = FEAS_TOL, verify: bool | None = None,
            smooth_alpha: float = SMOOTH_ALPHA, maxiter: int = 500, threads: int = 1):
    """Minimize or maximize ``p . theta`` over the identified set.

    Returns ``(endpoint, report)``.  Every feasible multi-start point seeds
    a local constrained solve; only results that pass the exact criterion
    are kept.  For convex families (singleton upper bounds, no mixing) the
    endpoint is re-derived by bisection on cut feasibility when ``verify``
    is true (the default for those families); the two must agree to 2e-3.
    """
    ccp = as_ccp(spec, phi)
    check_family(spec, family)
    program = _program(spec, ccp, family)
    extra = _center(spec, ccp, family, seed, smooth_alpha, threads)
    return project_program(program, spec, direction, sense, starts, seed, tol, extra,
                           family.convex if verify is None else verify, smooth_alpha, maxiter,
                           threads)


def project_program(program, spec, direction, sense="min", starts=4, seed=0, tol=FEAS_TOL,
                    extra=(), verify=False, smooth_alpha=SMOOTH_ALPHA, maxiter=500, threads=1,
                    warm=(), runs=None):
    """Projection driver shared by point-identified-set and confidence-set programs.

    ``extra`` are additional raw starting points; ``warm`` are parameter
    values believed to be members, used directly as seeds of the local
    solve when the program accepts them.  ``runs`` reuses the output of an
    earlier feasible-point search on the same program (kept in
    ``report.diagnostics["runs"]``).
    """
    p = np.asarray(direction, dtype=float)
    if p.shape != (spec.param_dim,) or not np.linalg.norm(p) > 0:
        raise ContractError("direction must be a non-zero vector of length d")
    if sense not in ("min", "max"):
        raise ContractError("sense must be 'min' or 'max'")
    s = 1.0 if sense == "min" else -1.0
    u = s * p
    if runs is None:
        runs = _search(program, spec, starts, seed, extra, smooth_alpha, maxiter, threads)
    seeds = [r for r in runs if r["objective"] <= tol]
    for k, th in enumerate(warm):
        th = _clip(spec, np.asarray(th, dtype=float))
        q = program.lp(th, tol) if isinstance(program, LevelProgram) else None
        if (q is not None) if isinstance(program, LevelProgram) else program.accepts(th, tol):
            seeds.append(dict(theta=th, q=q, objective=-math.inf, start=len(runs) + k,
                              converged=True, hit_limit=False))
    diag = dict(excluded=getattr(program, "excluded", []), feasible_starts=len(seeds),
                runs=runs)
    if not seeds:
        best, status = _summarize(runs, tol)
        status = "infeasible" if status == "optimal" else status
        return math.nan, SolveReport(math.nan, None, status, len(runs), [seed] * len(runs),
                                     diagnostics=diag)

    def local(theta, q):
        # A trust box keeps SLSQP's linearised steps from running off along
        # directions where the likelihoods saturate; it is widened whenever
        # the solution lands on one of its artificial faces.
        radius = TRUST_RADIUS
        for _ in range(TRUST_EXPANSIONS):
            out = program.optimize_from(theta, q, u, maxiter, radius)
            out["accepted"] = program.accepts(out["theta"], tol)
            restarts = 0
            while not out["converged"] and out["accepted"] and restarts < MAX_RESTARTS:
                # SLSQP stops with line-search failures at kinks and degenerate
                # vertices; restart from the last member until it stops improving.
                again = program.optimize_from(out["theta"], out["q"], u, maxiter, radius)
                restarts += 1
                if not program.accepts(again["theta"], tol):
                    break
                stuck = u @ again["theta"] >= u @ out["theta"] - 1e-9
                again["accepted"] = True
                again["converged"] = bool(again["converged"] or stuck)
                out = again
            out["unbounded"] = out["accepted"] and _on_artificial_face(
                spec, out["theta"], theta, radius)
            if not out["unbounded"]:
                return out
            theta, q, radius = out["theta"], out["q"], radius * 10
        return out

    def refine(r):
        out = local(r["theta"], r["q"])
        out["start"] = r["start"]
        if not out["accepted"]:
            out.update(theta=r["theta"], q=r["q"])
        out["level"] = -math.inf if out["unbounded"] else float(u @ out["theta"])
        return out

    distinct = []
    for r in sorted(seeds, key=lambda r: (r["objective"], r["start"])):
        if all(np.max(np.abs(r["theta"] - k["theta"])) > 1e-4 for k in distinct):
            distinct.append(r)
    diag["distinct_seeds"] = len(distinct)
    sols = _run_starts(refine, distinct, threads)
    good = [o for o in sols if o["accepted"]]
    pool = good if good else sols
    best = min(pool, key=lambda o: (o["level"], o["start"]))
    value = s * best["level"]
    if good and any(o["converged"] for o in good):
        status = "optimal"
    else:
        status = "max-iter" if any(o["hit_limit"] for o in sols) else "stalled"
    diag["accepted_starts"] = len(good)
    if verify:
        if not isinstance(program, LogProgram) or program.family.kind != "abj":
            raise ContractError("bisection verification needs a convex (ABJ, no mixing) family")
        inner = min(runs, key=lambda r: (r["objective"], r["start"]))["theta"]
        level, _ = bisect_endpoint(program, inner, u)
        diag["bisection"] = s * level
        diag["verified"] = bool(abs(level - best["level"]) <= 2e-3)
    q = best["q"]
    rep = SolveReport(value, best["theta"], status, len(runs), [seed] * len(runs),
                      q=None if q is None else np.asarray(q).reshape(program.shape_q),
                      value=value, violation=program.exact(best["theta"]), diagnostics=diag)
    return value, rep


def projection_interval(spec: GameSpec, phi, family: InequalityFamily, direction, **kw):
    """``(lower, upper, (report_min, report_max))`` for the direction ``p``."""
    lo, rlo = project(spec, phi, family, direction, "min", **kw)
    hi, rhi = project(spec, phi, family, direction, "max", **kw)
    return lo, hi, (rlo, rhi)


def projection_intervals(spec: GameSpec, phi, family: InequalityFamily, directions=None,
                         starts: int = 4, seed: int = 0, tol: float = FEAS_TOL,
                         verify: bool | None = None, smooth_alpha: float = SMOOTH_ALPHA,
                         maxiter: int = 500, threads: int = 1):
    """Intervals ``[min p.theta, max p.theta]`` for each row of ``directions``.

    Defaults to the coordinate axes.  The feasible-point search runs once
    and seeds every projection.  Returns ``(intervals (m, 2), reports)``
    with one ``(report_min, report_max)`` pair per direction.
    """
    ccp = as_ccp(spec, phi)
    check_family(spec, family)
    dirs = np.eye(spec.param_dim) if directions is None else np.atleast_2d(
        np.asarray(directions, dtype=float))
    program = _program(spec, ccp, family)
    extra = _center(spec, ccp, family, seed, smooth_alpha, threads)
    verify = family.convex if verify is None else verify
    runs, out, reports = None, [], []
    for p in dirs:
        pair = []
        for sense in ("min", "max"):
            value, rep = project_program(program, spec, p, sense, starts, seed, tol, extra,
                                         verify, smooth_alpha, maxiter, threads, runs=runs)
            runs = rep.diagnostics["runs"]
            pair.append((value, rep))
        out.append((pair[0][0], pair[1][0]))
        reports.append((pair[0][1], pair[1][1]))
    return np.array(out, dtype=float), reports


# ---------------------------------------------------------------------------
# criterion and membership
# ---------------------------------------------------------------------------

def criterion_Q(spec: GameSpec, theta, phi, family: InequalityFamily) -> float:
    """Maximal log-violation ``max g``; with a mixing grid, minimized over latent q.

    Sharp families are resolved to the core-determining class at ``theta``.
    ``theta`` is in the identified set iff the value is ``<= 0``.
    """
    ccp = as_ccp(spec, phi)
    check_family(spec, family)
    theta = spec.as_theta(theta)
    resolved = family_at(spec, family, theta)
    return _program(spec, ccp, resolved).exact(theta)


def membership(spec: GameSpec, theta, phi, family: InequalityFamily,
               tol: float = MEMBER_TOL) -> bool:
    ccp = as_ccp(spec, phi)
    check_family(spec, family)
    theta = spec.as_theta(theta)
    resolved = family_at(spec, family, theta)
    program = _program(spec, ccp, resolved)
    if isinstance(program, LevelProgram):
        return program.accepts(theta, tol)
    return program.exact(theta) <= tol
