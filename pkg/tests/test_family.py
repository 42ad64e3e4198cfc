import numpy as np
import pytest

from logitgame import build_family, family_at, logistic_grid
from logitgame.errors import ContractError, UnsupportedStructureError
from logitgame.family import structural_adjacency

from conftest import THETA0


def test_abj_family_is_singletons(entry):
    fam = build_family(entry, "abj")
    assert fam.events == [(0,), (1,), (2,), (3,)] and set(fam.bounds) == {"upper"}
    assert len(fam) == 4 and fam.convex


def test_lower_bounds_added(entry):
    fam = build_family(entry, "abj+lb")
    assert fam.bounds.count("lower") == 4 and not fam.convex


def test_sharp_superset_has_connected_pairs(entry):
    fam = build_family(entry, "sharp")
    assert sorted(fam.events) == [(0,), (0, 3), (1,), (1, 2), (2,), (3,)]


def test_structural_graph_links_profiles_differing_in_both_actions(entry):
    adj = structural_adjacency(entry)
    assert adj[0, 3] and adj[1, 2] and not adj[0, 1]


def test_family_at_drops_disconnected_pairs(entry):
    fam = build_family(entry, "sharp")
    at = family_at(entry, fam, THETA0)
    active = {e for e, row in zip(at.events, at.active) if row[0]}
    assert active == {(0,), (1,), (2,), (3,), (1, 2)}
    at0 = family_at(entry, fam, np.array([0.1, 0.1, 0.0, 0.0]))
    assert all(len(e) == 1 for e, row in zip(at0.events, at0.active) if row[0])


def test_family_at_with_grid_keeps_union_of_nodes(entry):
    fam = build_family(entry, "sharp", grid=logistic_grid(5))
    at = family_at(entry, fam, THETA0)
    assert at.grid is fam.grid and at.active[at.events.index((1, 2))].all()


def test_truncation_and_errors(entry):
    assert all(len(e) == 1 for e in build_family(entry, "sharp", K=1).events)
    with pytest.raises(ContractError):
        build_family(entry, "sharp", K=5)
    with pytest.raises(ContractError):
        build_family(entry, "nope")


def test_sharp_needs_binary_game():
    from logitgame import GameSpec
    spec = GameSpec([(0, 1, 2), (0, 1)], ["x0"], np.zeros((2, 3, 2, 1, 1)),
                    np.zeros((2, 3, 2, 1)), -1, 1)
    with pytest.raises(UnsupportedStructureError):
        build_family(spec, "sharp")
    assert len(build_family(spec, "abj")) == 6


def test_extra_events_merge(entry):
    fam = build_family(entry, "abj")
    more = fam.with_events(entry, [((0, 3), 0, "upper"), ((0,), 0, "upper")])
    assert len(more) == 5
