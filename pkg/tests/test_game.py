import numpy as np
import pytest

from logitgame import GameSpec, OutcomeEvent, entry_game, logistic_grid
from logitgame.errors import ContractError, SpecFormatError
from logitgame.game import MixingGrid, as_event, stack_nodes
from logitgame.likelihood import payoff_index

from conftest import THETA0


def test_payoff_of_joint_entry(entry):
    assert payoff_index(entry, THETA0, 0, (1, 1), 0) == pytest.approx(-0.5)


def test_outside_option_is_zero(entry):
    theta = np.array([0.7, -1.2, -0.3, 2.0])
    for other in (0, 1):
        assert payoff_index(entry, theta, 0, (0, other), 0) == 0.0


def test_payoffs_are_linear(entry):
    theta = np.array([0.3, -0.4, -0.2, -0.9])
    assert np.allclose(entry.payoffs(2 * theta), 2 * entry.payoffs(theta))


def test_bin_shift_enters_entry_payoffs_only():
    g = entry_game(2, bin_shifts=[0.0, 0.4])
    V = g.payoffs(np.zeros(4))
    assert V[0, 1, 0, 1] == pytest.approx(0.4)
    assert V[0, 0, 1, 1] == 0.0


def test_single_action_player_rejected(entry):
    coeff = np.zeros((2, 1, 2, 1, 4))
    with pytest.raises(SpecFormatError):
        GameSpec([(0,), (0, 1)], ["x0"], coeff, np.zeros((2, 1, 2, 1)), -np.inf, np.inf)


def test_inverted_box_rejected(entry):
    with pytest.raises(SpecFormatError):
        entry.with_bounds(lower=[0, 0, 0, 1.0], upper=[1, 1, 1, 0.0])


def test_theta_shape_checked(entry):
    with pytest.raises(ContractError):
        entry.payoffs([0.0, 0.0])


def test_event_coercion(entry):
    assert as_event(entry, (1, 1)) == OutcomeEvent(frozenset({(1, 1)}))
    assert len(as_event(entry, [(0, 1), (1, 0)])) == 2
    with pytest.raises(IndexError):
        as_event(entry, (2, 0))
    with pytest.raises(ContractError):
        OutcomeEvent(frozenset())


def test_logistic_grid_first_node():
    grid = logistic_grid(11)
    assert grid.nodes[0] == pytest.approx(-3.04452243772342299650, abs=1e-12)
    assert grid.weights.sum() == pytest.approx(1.0)
    assert np.allclose(grid.nodes, -grid.nodes[::-1])


def test_grid_validation():
    with pytest.raises(ContractError):
        MixingGrid([0.0, 0.0], [0.5, 0.5])
    with pytest.raises(ContractError):
        MixingGrid([0.0, 1.0], [0.2, 0.2])
    with pytest.raises(ContractError):
        MixingGrid([0.0], [1.0], scale=-1.0)


def test_free_scale_shift_is_affine(entry):
    theta = np.array([0.1, 0.2, -0.3, -0.4])
    shifted = entry.shifted(1.5, theta_index=2)
    fixed = entry.shifted(1.5 * theta[2])
    assert np.allclose(shifted.payoffs(theta), fixed.payoffs(theta))


def test_stacked_nodes_keep_node_major_order():
    g = entry_game(2, bin_shifts=[0.0, 1.0])
    grid = logistic_grid(3, scale=0.5)
    specs = grid.node_specs(g)
    stacked = stack_nodes(specs)
    assert stacked.n_bins == 6
    V = stacked.payoffs(np.zeros(4))
    for k, s in enumerate(specs):
        assert np.allclose(V[..., 2 * k: 2 * k + 2], s.payoffs(np.zeros(4)))
