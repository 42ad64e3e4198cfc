"""Exception hierarchy shared by all modules."""


class GameError(Exception):
    """Base class for errors raised by logitgame."""


class UnsupportedStructureError(GameError):
    """The operation needs a binary-action game and got something else."""


class NumericDomainError(GameError, ArithmeticError):
    """A payoff or probability left its numeric domain (NaN, inf, >1, ...)."""


class ComplexityError(GameError):
    """The requested inclusion-exclusion expansion is too large."""


class ContractError(GameError, ValueError):
    """Arguments are individually valid but inconsistent with each other."""


class DegenerateModelError(GameError):
    """A shock draw produced no pure-strategy Nash equilibrium."""

    def __init__(self, message, draw=None):
        super().__init__(message)
        self.draw = draw


class SpecFormatError(GameError, ValueError):
    """A game-spec file is malformed; the message names the offending field."""


class SolverError(GameError, RuntimeError):
    """A numerical solver failed in a way that does not decide the question asked."""
