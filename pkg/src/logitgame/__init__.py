"""Partial identification and inference for discrete entry games with logit shocks.

Closed-form generalized likelihoods turn the identified set into a small
smooth constraint system, so projections are solved by nonlinear
programming instead of grid search.
"""

from .ccp import CCPTable, read_ccp, write_ccp
from .errors import (ComplexityError, ContractError, DegenerateModelError, GameError,
                     NumericDomainError, SolverError, SpecFormatError,
                     UnsupportedStructureError)
from .family import InequalityFamily, build_family, family_at
from .game import GameSpec, MixingGrid, OutcomeEvent, entry_game, logistic_grid
from .identification import (SolveReport, criterion_Q, find_feasible_point, membership,
                             project, projection_interval, projection_intervals)
from .inference import (ConfidenceBand, confidence_intervals, confidence_membership,
                        confidence_project, confidence_projections, frequency_ccp, fs_band,
                        replicate_confidence)
from .likelihood import (core_determining_family, dominant_lower_bound,
                         intersection_probability, singleton_likelihood, union_likelihood)
from .oracle import (MarketDataset, SelectionRule, population_ccp, read_dataset,
                     simulate_dataset, write_dataset)
from .specfile import fixture_path, load_game_spec, parse_game_spec, write_game_spec

__version__ = "0.1.0"
