"""Exception types shared across the package.

The CLI maps these onto its exit codes: :class:`ConfigError` is a usage
problem (64) and :class:`ContractError` is a violated precondition (65).
"""


class BellAuditError(Exception):
    """Base class for all package errors."""


class ConfigError(BellAuditError):
    """A configuration document or input file could not be parsed."""


class ContractError(BellAuditError):
    """An operation was invoked outside its contract."""


class UndefinedCellError(ContractError):
    """No trials were recorded for a setting pair that an estimator needs."""

    def __init__(self, pair):
        self.pair = tuple(pair)
        super().__init__(f"undefined cell: no trials with setting pair AB={pair[0]}{pair[1]}")


class DegenerateTableError(ContractError):
    """A contingency table has fewer than two populated rows or columns."""


class QuadratureWarning(UserWarning):
    """Halving the quadrature step moved an integral by more than the tolerance."""
