"""Exception taxonomy shared by all modules.

The CLI maps these onto its exit-code contract: configuration-class errors
exit 2, invariant breaches exit 4.  Non-convergence of the solver is *not*
an exception (it is reported in the result and exits 3 at the CLI level).
"""


class TwoPhaseError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(TwoPhaseError):
    """Invalid construction parameters (bad grid geometry, bad config keys)."""


class ResolutionError(ConfigurationError):
    """Grid too coarse for the requested operation (R/h below floor, empty ball)."""


class InputError(TwoPhaseError):
    """A caller-supplied value violates an operation precondition."""


class DomainError(InputError):
    """Argument outside the mathematical domain of a law or operator."""


class StencilError(TwoPhaseError):
    """A finite-difference stencil reaches outside the lattice ball."""


class OperatorError(TwoPhaseError):
    """A user-supplied operator callback misbehaved (non-finite value)."""


class GeometryError(InputError):
    """A requested region (annulus, ball) does not fit inside the grid."""


class NoInterfaceError(InputError):
    """An interface-dependent operation was applied to a one-signed field."""


class InvariantError(TwoPhaseError):
    """An internal invariant was violated; indicates a bug or corrupt state."""
