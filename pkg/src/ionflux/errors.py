"""Exception types shared across the package.

The CLI maps these onto exit codes: configuration problems exit 1,
solver and numerical failures exit 2, validation failures exit 3.
"""


class IonfluxError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(IonfluxError):
    """Invalid physical or run configuration (bad keys, ranges, beam setup)."""


class UnreachableTemperatureError(ConfigurationError):
    """Requested bath temperature below the Doppler limit."""


class SingularityError(IonfluxError):
    """Coincident ion positions passed to the potential or its derivatives."""


class SolverError(IonfluxError):
    """A numerical solve failed (non-convergence, ill-conditioning, no dissipation)."""


class InternalConsistencyError(SolverError):
    """A solved steady state violates an exact identity such as J_L + J_R = 0."""


class InstabilityError(SolverError):
    """Stochastic trajectory blew up (time step too large for the stiffest mode)."""


class UndefinedRectificationError(SolverError):
    """Both bias currents vanish; the rectification factor has no value."""
