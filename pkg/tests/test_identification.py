import itertools

import numpy as np
import pytest

from logitgame import (CCPTable, SelectionRule, build_family, criterion_Q, entry_game,
                       find_feasible_point, logistic_grid, membership, population_ccp, project,
                       projection_intervals)
from logitgame.errors import ContractError
from logitgame.identification import smooth_max

from conftest import ROUNDED_CCP, THETA0


@pytest.mark.parametrize("kind", ["abj", "sharp"])
def test_criterion_at_zero(entry, kind):
    q = criterion_Q(entry, np.zeros(4), ROUNDED_CCP, build_family(entry, kind))
    assert q == pytest.approx(0.19556678354397526, abs=1e-12)


@pytest.mark.parametrize("kind", ["abj", "abj+lb", "sharp"])
def test_truth_is_feasible(entry, kind):
    phi = population_ccp(entry, THETA0, SelectionRule())
    assert criterion_Q(entry, THETA0, phi, build_family(entry, kind)) <= 1e-12
    assert membership(entry, THETA0, phi, build_family(entry, kind))


@pytest.mark.parametrize("kind", ["abj", "abj+lb", "sharp"])
def test_truth_is_feasible_with_mixing(entry, kind):
    grid = logistic_grid(5, scale=0.5)
    phi = population_ccp(entry, THETA0, SelectionRule(), grid)
    fam = build_family(entry, kind, grid=grid)
    assert criterion_Q(entry, THETA0, phi, fam) <= 1e-9
    assert membership(entry, THETA0, phi, fam)


def test_single_binding_restriction(entry):
    theta = np.array([0.2, -0.3, -0.4, -0.1])
    q = criterion_Q(entry, theta, [0, 0, 0, 1.0], build_family(entry, "abj"))
    F = lambda z: 1 / (1 + np.exp(-z))
    L11 = F(0.2 - 0.4) * F(-0.3 - 0.1)
    assert q == pytest.approx(-np.log(L11), abs=1e-12)


def test_membership_examples(entry):
    sharp = build_family(entry, "sharp")
    assert not membership(entry, np.zeros(4), ROUNDED_CCP, sharp)
    assert not membership(entry, THETA0 + [0, 0, 1.0, 0], ROUNDED_CCP, sharp)


def test_feasible_point_sharp(entry):
    rep = find_feasible_point(entry, ROUNDED_CCP, build_family(entry, "sharp"), seed=3)
    assert rep.ok and rep.objective <= 1e-6
    assert criterion_Q(entry, rep.theta, ROUNDED_CCP, build_family(entry, "sharp")) <= 1e-6


def _grid_oracle_min(phi, lo, hi, m=21):
    """Brute-force min over a grid of the max singleton log-violation."""
    F = lambda z: 1 / (1 + np.exp(-z))
    g = np.linspace(lo, hi, m)
    b1, b2, d1, d2 = np.meshgrid(g, g, g, g, indexing="ij")
    worst = np.full(b1.shape, -np.inf)
    for k, (y1, y2) in enumerate(itertools.product((0, 1), repeat=2)):
        if phi[k] == 0:
            continue
        v1, v2 = b1 + d1 * y2, b2 + d2 * y1
        L = (F(v1) if y1 else F(-v1)) * (F(v2) if y2 else F(-v2))
        worst = np.maximum(worst, np.log(phi[k]) - np.log(L))
    return worst.min()


def test_infeasible_ccp_certified_by_grid(entry):
    spec = entry.with_bounds(lower=-np.ones(4), upper=np.ones(4))
    phi = np.array([0.97, 0.01, 0.01, 0.01])
    # |d log L / d theta| sums to at most 4, and every point is within 0.05
    # of the grid in each coordinate
    delta = _grid_oracle_min(phi, -1, 1) - 4 * 0.05
    assert delta > 0
    rep = find_feasible_point(spec, phi, build_family(spec, "abj"), seed=1)
    assert rep.objective >= delta


def test_direction_scaling(entry):
    fam = build_family(entry, "abj")
    p = np.array([0.0, 0.0, 1.0, 0.5])
    v1, r1 = project(entry, ROUNDED_CCP, fam, p, verify=False)
    v2, r2 = project(entry, ROUNDED_CCP, fam, 2 * p, verify=False)
    assert v2 == pytest.approx(2 * v1, abs=1e-6)
    assert np.allclose(r1.theta, r2.theta, atol=1e-4)


def test_convex_projection_verified_by_bisection(entry):
    iv, reps = projection_intervals(entry, ROUNDED_CCP, build_family(entry, "abj"))
    for (lo, hi), (rlo, rhi) in zip(iv, reps):
        assert rlo.ok and rhi.ok
        assert rlo.diagnostics["verified"] and rhi.diagnostics["verified"]
        assert lo < hi


def test_nested_families(entry):
    ivs = {k: projection_intervals(entry, ROUNDED_CCP, build_family(entry, k))[0]
           for k in ("abj", "abj+lb", "sharp")}
    for tight in ("abj+lb", "sharp"):
        assert np.all(ivs[tight][:, 0] >= ivs["abj"][:, 0] - 1e-5)
        assert np.all(ivs[tight][:, 1] <= ivs["abj"][:, 1] + 1e-5)


def test_empty_set_reported_infeasible(entry):
    spec = entry.with_bounds(lower=-np.ones(4), upper=np.ones(4))
    value, rep = project(spec, [0.97, 0.01, 0.01, 0.01], build_family(spec, "abj"),
                         np.eye(4)[0])
    assert np.isnan(value) and rep.status == "infeasible"


def test_bins_without_data_are_reported():
    g = entry_game(2, bin_shifts=[0.0, 0.3])
    phi = population_ccp(g, THETA0, SelectionRule())
    table = CCPTable(phi[:1], np.array([np.inf]), np.array([0]), [1])
    value, rep = project(g, table, build_family(g, "abj"), np.eye(4)[2], verify=False)
    assert rep.diagnostics["excluded"] == [1] and np.isfinite(value)


def test_mixing_projection(entry):
    grid = logistic_grid(5, scale=0.5)
    phi = population_ccp(entry, THETA0, SelectionRule(), grid)
    fam = build_family(entry, "abj", grid=grid)
    value, rep = project(entry, phi, fam, np.eye(4)[2], starts=2)
    assert rep.ok and value <= THETA0[2] + 1e-6
    assert membership(entry, rep.theta, phi, fam, tol=1e-6)


def test_contract_errors(entry):
    fam = build_family(entry, "abj")
    with pytest.raises(ContractError):
        project(entry, ROUNDED_CCP, fam, np.zeros(4))
    with pytest.raises(ContractError):
        project(entry, ROUNDED_CCP, fam, np.eye(4)[0], sense="up")
    with pytest.raises(ContractError):
        find_feasible_point(entry, ROUNDED_CCP, fam, starts=0)
    with pytest.raises(ContractError):
        criterion_Q(entry, THETA0, [0.5, 0.5, 0.5], fam)


def test_smooth_max_brackets_max():
    v = np.array([0.1, -2.0, 0.3, 0.29])
    s, w = smooth_max(v, 200.0)
    assert v.max() <= s <= v.max() + np.log(v.size) / 200.0
    assert w.sum() == pytest.approx(1.0)
