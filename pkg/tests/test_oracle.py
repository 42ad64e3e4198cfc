import numpy as np
import pytest

from logitgame import SelectionRule, entry_game, population_ccp, simulate_dataset
from logitgame.errors import ContractError
from logitgame.oracle import (LatentDraw, ct_bounds, ct_criterion, enumerate_pure_nash, mc_bounds,
                              read_dataset, write_dataset)

from conftest import EXACT_CCP, THETA0

L01 = 0.311229665600927282319
PHI10_FIRST_LISTED = 0.296233377802521771389


def test_center_region_has_two_equilibria(entry):
    draw = LatentDraw.from_xi([[0.25, 0.25]])
    assert enumerate_pure_nash(entry, THETA0, 0, draw) == {(0, 1), (1, 0)}


def test_very_negative_shocks_keep_everyone_out(entry):
    draw = LatentDraw.from_xi([[-5.0, -5.0]])
    assert enumerate_pure_nash(entry, THETA0, 0, draw) == {(0, 0)}


def test_no_interaction_gives_independent_best_responses(entry):
    rng = np.random.default_rng(0)
    theta = np.array([0.3, -0.4, 0.0, 0.0])
    xi = rng.logistic(size=(50, 2))
    for row in xi:
        eq = enumerate_pure_nash(entry, theta, 0, LatentDraw.from_xi([row]))
        expected = tuple(int(theta[i] + row[i] > 0) for i in range(2))
        assert eq == {expected}


def test_population_ccp_uniform(entry):
    phi = population_ccp(entry, THETA0, SelectionRule())
    assert np.allclose(phi[0], EXACT_CCP, atol=1e-14)


def test_first_listed_selection(entry):
    rule = SelectionRule("first-listed", ((0, 1),))
    phi = population_ccp(entry, THETA0, rule)[0]
    assert phi[1] == pytest.approx(L01, abs=1e-14)
    assert phi[2] == pytest.approx(PHI10_FIRST_LISTED, abs=1e-14)
    sim = simulate_dataset(entry, THETA0, rule, 200_000, seed=4)
    freq = np.bincount(sim.outcome_index(entry), minlength=4) / len(sim)
    se = np.sqrt(phi * (1 - phi) / len(sim))
    assert np.all(np.abs(freq - phi) <= 3 * se)


def test_empty_dataset(entry):
    data = simulate_dataset(entry, THETA0, SelectionRule(), 0)
    assert len(data) == 0 and data.y.shape == (0, 2)


def test_simulation_independent_of_threads(entry):
    a = simulate_dataset(entry, THETA0, SelectionRule(), 150_000, seed=9, threads=1)
    b = simulate_dataset(entry, THETA0, SelectionRule(), 150_000, seed=9, threads=3)
    assert np.array_equal(a.y, b.y) and np.array_equal(a.x, b.x)


def test_dataset_csv_round_trip(entry, tmp_path):
    g = entry_game(2, bin_shifts=[0.0, 0.5])
    data = simulate_dataset(g, THETA0, SelectionRule(), 500, seed=1)
    path = tmp_path / "d.csv"
    write_dataset(path, data, g)
    back = read_dataset(path, g)
    assert np.array_equal(back.x, data.x) and np.array_equal(back.y, data.y)
    assert path.read_text().splitlines()[0] == "market_id,x_bin,y_1,y_2"


def test_bad_design_rejected(entry):
    with pytest.raises(ContractError):
        simulate_dataset(entry, THETA0, SelectionRule(), 10, design=[0.5, 0.5])


def test_simulated_upper_bound_of_joint_entry(entry):
    h1, h2 = ct_bounds(entry, THETA0, 400_000, seed=3)
    se = np.sqrt(0.1425 * 0.8575 / 400_000)
    assert abs(h2[0, 3] - 0.142536956596550946292) <= 3 * se
    # joint entry is never part of a multiple-equilibrium draw here
    assert h1[0, 3] == h2[0, 3]


def test_simulated_overlap(entry):
    mc = mc_bounds(entry, THETA0, 0, [(0, 1), (1, 0)], 400_000, "R_cap", seed=8)
    assert mc.covers(0.014996287798405510931)


def test_simulated_criterion_vanishes_at_truth(entry):
    assert ct_criterion(entry, THETA0, EXACT_CCP[None], 200_000) < 1e-4
    assert ct_criterion(entry, np.zeros(4), EXACT_CCP[None], 200_000) > 1e-3


def test_unknown_selection_rule():
    with pytest.raises(ContractError):
        SelectionRule("random-dictator")
