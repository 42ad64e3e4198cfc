import itertools

import numpy as np
import pytest

from logitgame import (core_determining_family, dominant_lower_bound, entry_game,
                       intersection_probability, logistic_grid, singleton_likelihood,
                       union_likelihood)
from logitgame.errors import ComplexityError, NumericDomainError, UnsupportedStructureError
from logitgame.game import OutcomeEvent
from logitgame.likelihood import BoundKernel, abj_residual, mixed_bound
from logitgame.oracle import mc_bounds

from conftest import ROUNDED_CCP, THETA0, random_binary_spec

# 30-digit evaluations of the logistic expressions
L11 = 0.142536956596550946292
L01 = 0.311229665600927282319
R_MIXED = 0.014996287798405510931
UNION_MIXED = 0.607463043403449053708


def test_both_out_is_a_quarter(entry):
    assert singleton_likelihood(entry, THETA0, (0, 0), 0) == pytest.approx(0.25, abs=1e-15)


def test_joint_entry_likelihood(entry):
    assert singleton_likelihood(entry, THETA0, (1, 1), 0) == pytest.approx(L11, abs=1e-14)
    mc = mc_bounds(entry, THETA0, 0, (1, 1), 400_000, "L", seed=1)
    assert mc.covers(L11)


def test_singletons_sum_to_one_without_interaction(entry):
    theta = np.array([0.4, -0.8, 0.0, 0.0])
    total = sum(singleton_likelihood(entry, theta, y, 0) for y in entry.outcomes())
    assert total == pytest.approx(1.0, abs=1e-14)


def test_residual_at_zero(entry):
    r = abj_residual(entry, np.zeros(4), ROUNDED_CCP[None], (0, 1), 0)
    assert r == pytest.approx(0.19556678354397526446, abs=1e-14)


def test_residual_sentinel_for_zero_ccp(entry):
    phi = np.array([[0.5, 0.5, 0.0, 0.0]])
    assert abj_residual(entry, THETA0, phi, (1, 1), 0) == -np.inf


def test_residual_rejects_non_probability(entry):
    with pytest.raises(NumericDomainError):
        abj_residual(entry, THETA0, np.array([[1.5, 0, 0, 0]]), (0, 0), 0)


def test_residuals_nonpositive_at_truth(entry):
    from logitgame import SelectionRule, population_ccp
    phi = population_ccp(entry, THETA0, SelectionRule())
    for y in entry.outcomes():
        assert abj_residual(entry, THETA0, phi, y, 0) <= 1e-12


def test_dominance_factor_when_staying_out(entry):
    theta = np.array([0.3, -0.2, -0.6, -0.1])
    # with non-positive effects, staying out is dominant iff it beats entry alone
    F = lambda z: 1 / (1 + np.exp(-z))
    expected = F(-0.3) * F(0.2)
    assert dominant_lower_bound(entry, theta, (0, 0), 0) == pytest.approx(expected, abs=1e-14)


def test_joint_entry_dominance(entry):
    assert dominant_lower_bound(entry, THETA0, (1, 1), 0) == pytest.approx(L11, abs=1e-14)
    mc = mc_bounds(entry, THETA0, 0, (1, 1), 400_000, "dominant", seed=2)
    assert mc.covers(L11)


def test_dominance_never_exceeds_likelihood():
    rng = np.random.default_rng(5)
    for _ in range(30):
        spec = random_binary_spec(rng, n_players=3, d=2)
        theta = rng.normal(size=2)
        for y in spec.outcomes():
            assert dominant_lower_bound(spec, theta, y, 0) <= \
                singleton_likelihood(spec, theta, y, 0) + 1e-15


def test_multiplicity_overlap(entry):
    A = [(0, 1), (1, 0)]
    assert intersection_probability(entry, THETA0, A, 0) == pytest.approx(R_MIXED, abs=1e-14)
    mc = mc_bounds(entry, THETA0, 0, A, 400_000, "R_cap", seed=3)
    assert mc.covers(R_MIXED)


def test_incompatible_pair_has_no_overlap(entry):
    assert intersection_probability(entry, THETA0, [(0, 0), (1, 1)], 0) == 0.0


def test_single_member_intersection_is_singleton(entry):
    for y in entry.outcomes():
        assert intersection_probability(entry, THETA0, [y], 0) == \
            pytest.approx(singleton_likelihood(entry, THETA0, y, 0), abs=1e-15)


def test_union_of_mixed_profiles(entry):
    A = [(0, 1), (1, 0)]
    assert union_likelihood(entry, THETA0, A, 0) == pytest.approx(UNION_MIXED, abs=1e-14)
    assert singleton_likelihood(entry, THETA0, (0, 1), 0) == pytest.approx(L01, abs=1e-14)
    mc = mc_bounds(entry, THETA0, 0, A, 400_000, "L", seed=4)
    assert mc.covers(UNION_MIXED)


def test_union_of_everything_is_one(entry):
    assert union_likelihood(entry, THETA0, entry.outcomes(), 0) == pytest.approx(1.0, abs=1e-14)
    mc = mc_bounds(entry, THETA0, 0, entry.outcomes(), 100_000, "L", seed=5)
    assert mc.estimate == 1.0


def test_union_needs_binary_game():
    from logitgame import GameSpec
    coeff = np.zeros((2, 3, 2, 1, 1))
    spec = GameSpec([(0, 1, 2), (0, 1)], ["x0"], coeff, np.zeros((2, 3, 2, 1)), -1, 1)
    with pytest.raises(UnsupportedStructureError):
        union_likelihood(spec, [0.0], [(0, 0), (1, 1)], 0)
    assert singleton_likelihood(spec, [0.0], (2, 1), 0) > 0


def test_inclusion_exclusion_limit(entry):
    with pytest.raises(ComplexityError):
        union_likelihood(entry, THETA0, entry.outcomes(), 0, ie_limit=3)


def test_core_family_with_competition(entry):
    family = core_determining_family(entry, THETA0, 0)
    expected = [{(0, 0)}, {(0, 1)}, {(1, 0)}, {(1, 1)}, {(0, 1), (1, 0)}]
    assert sorted(map(sorted, (e.members for e in family))) == sorted(map(sorted, expected))


def test_core_family_truncated_to_singletons(entry):
    family = core_determining_family(entry, THETA0, 0, max_cardinality=1)
    assert [len(e) for e in family] == [1, 1, 1, 1]


def test_core_family_without_interaction(entry):
    theta = np.array([0.2, -0.1, 0.0, 0.0])
    family = core_determining_family(entry, theta, 0)
    assert all(len(e) == 1 for e in family)
    for a, b in itertools.combinations(entry.outcomes(), 2):
        assert intersection_probability(entry, theta, [a, b], 0) == 0.0


def test_unmixed_when_shock_scale_is_zero(entry):
    grid = logistic_grid(11, scale=0.0)
    for kind, event in (("upper_L", [(1, 1)]), ("R", [(0, 1), (1, 0)]),
                        ("union_L", [(0, 1), (1, 0)]), ("lower_dominant", [(0, 0)])):
        base = {"upper_L": singleton_likelihood, "R": intersection_probability,
                "union_L": union_likelihood,
                "lower_dominant": dominant_lower_bound}[kind]
        ref = base(entry, THETA0, event[0] if kind in ("upper_L", "lower_dominant") else event, 0)
        assert mixed_bound(entry, THETA0, grid, kind, event, 0) == pytest.approx(ref, abs=1e-14)


def test_mixed_value_between_node_values(entry):
    grid = logistic_grid(11, scale=0.8)
    vals = [singleton_likelihood(s, THETA0, (1, 0), 0) for s in grid.node_specs(entry)]
    m = mixed_bound(entry, THETA0, grid, "upper_L", [(1, 0)], 0)
    assert min(vals) <= m <= max(vals)


def test_kernel_matches_single_queries():
    rng = np.random.default_rng(11)
    spec = random_binary_spec(rng, n_players=3, n_bins=2, d=3)
    theta = rng.normal(size=3)
    events = [(0,), (5,), (1, 6), (0, 3, 5)]
    kinds = ["upper", "lower", "upper", "upper"]
    kernel = BoundKernel(spec, events, kinds)
    vals = kernel.log_bounds(theta)
    outcomes = spec.outcomes()
    for x in range(2):
        assert np.exp(vals[0, x]) == pytest.approx(
            singleton_likelihood(spec, theta, outcomes[0], x), rel=1e-12)
        assert np.exp(vals[1, x]) == pytest.approx(
            dominant_lower_bound(spec, theta, outcomes[5], x), rel=1e-12)
        for k in (2, 3):
            ev = OutcomeEvent(frozenset(outcomes[j] for j in events[k]))
            assert np.exp(vals[k, x]) == pytest.approx(
                union_likelihood(spec, theta, ev, x), rel=1e-12)


def test_three_player_union_against_simulation():
    rng = np.random.default_rng(12)
    spec = random_binary_spec(rng, n_players=3, d=2)
    theta = rng.normal(size=2)
    A = [(0, 1, 1), (1, 0, 1), (1, 1, 0)]
    mc = mc_bounds(spec, theta, 0, A, 300_000, "L", seed=6)
    assert mc.covers(union_likelihood(spec, theta, A, 0))
