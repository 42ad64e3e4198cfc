import numpy as np
import pytest

from logitgame import GameSpec, entry_game

THETA0 = np.array([0.0, 0.0, -0.5, -0.5])
ROUNDED_CCP = np.array([0.250, 0.304, 0.304, 0.142])
# uniform selection at THETA0, evaluated in 30-digit arithmetic
EXACT_CCP = np.array([0.25, 0.303731521701724526854, 0.303731521701724526854,
                      0.142536956596550946292])


@pytest.fixture
def entry():
    return entry_game(2)


@pytest.fixture
def entry_neg():
    """Two-firm entry game with competitive effects restricted to be non-positive."""
    return entry_game(2, upper=[np.inf, np.inf, 0.0, 0.0])


def random_binary_spec(rng, n_players=2, n_bins=1, d=3, scale=1.0):
    """Binary game with Gaussian payoff coefficients; out-payoffs are normalised to zero."""
    shape = (2,) * n_players
    coeff = rng.normal(0, scale, (n_players, *shape, n_bins, d))
    offset = rng.normal(0, scale, (n_players, *shape, n_bins))
    for i in range(n_players):
        idx = [slice(None)] * n_players
        idx[i] = 0
        coeff[(i, *idx)] = 0.0
        offset[(i, *idx)] = 0.0
    return GameSpec([(0, 1)] * n_players, [f"x{k}" for k in range(n_bins)], coeff, offset,
                    -np.inf, np.inf)


# one status line per acceptance criterion, repeated at the end of the run
ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
