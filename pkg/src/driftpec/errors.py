"""Exception types raised across the package."""


class DriftPecError(Exception):
    """Base class for all domain errors."""


class InvalidLabel(DriftPecError):
    """Pauli label contains characters outside {I, X, Y, Z} or is empty."""


class DimMismatch(DriftPecError):
    """Operands have incompatible dimensions."""


class InvalidInput(DriftPecError):
    """Input violates a structural invariant (simplex, positivity, shape)."""


class InvalidTime(DriftPecError):
    """A time argument is nonpositive or nonfinite."""


class InfeasibleTimes(DriftPecError):
    """T2 exceeds 2*T1, outside the Bloch-Redfield feasible region."""


class InvalidParam(DriftPecError):
    """Damping parameter outside [0, 1]."""


class InvalidChannel(DriftPecError):
    """Kraus set fails the completeness (CPTP) check."""


class InvalidPeriod(DriftPecError):
    """Schedule period index out of range."""


class DegenerateSeries(DriftPecError):
    """Correlation requested on a zero-variance series."""


class NonInvertibleChannel(DriftPecError):
    """Channel attenuation too strong to cancel (a transfer eigenvalue ~ 0)."""


class DegenerateHistogram(DriftPecError):
    """Signed histogram has no positive mass left after clipping."""


class IncompleteGrid(DriftPecError):
    """CSV schedule is missing one or more (qubit, period) cells."""


class ConfigError(DriftPecError):
    """Experiment configuration is malformed or incomplete."""
