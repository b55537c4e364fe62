"""Exception hierarchy for the chaosid package.

Every error raised deliberately by this package derives from
:class:`ChaosidError`, so callers (and the CLI) can distinguish expected
failure modes from genuine bugs with a single ``except`` clause.
"""


class ChaosidError(Exception):
    """Base class for all errors raised by chaosid."""


class InvalidStateError(ChaosidError):
    """A state vector does not conform to its parameters (wrong lengths,
    non-finite entries) or an internal numeric invariant was violated."""


class NumericOverflowError(ChaosidError):
    """A derivative evaluation produced non-finite values inside an
    integrator stage."""


class IntegrationDivergedError(ChaosidError):
    """The integrated state became non-finite (blow-up).

    Attributes
    ----------
    step : int
        Index of the failing step.
    sim_index : int or None
        Simulation index, when raised from batched generation.
    """

    def __init__(self, message, step, sim_index=None):
        super().__init__(message)
        self.step = step
        self.sim_index = sim_index


class ConfigurationError(ChaosidError):
    """An experiment configuration or prior is internally inconsistent."""


class DatasetFormatError(ChaosidError):
    """A dataset file on disk is malformed; the message names the file
    and, where possible, the offending location."""


class NotPositiveDefiniteError(ChaosidError):
    """Cholesky factorization failed even after jitter escalation."""


class OptimizationFailedError(ChaosidError):
    """Every hyperparameter candidate failed factorization."""


class SingularDesignError(ChaosidError):
    """The linear-regression normal equations are singular even after
    the ridge fallback."""


class TrainingDivergedError(ChaosidError):
    """Network training produced a non-finite loss.

    Attributes
    ----------
    epoch : int
        Epoch index at which the loss became non-finite.
    """

    def __init__(self, message, epoch):
        super().__init__(message)
        self.epoch = epoch


class EmptySampleError(ChaosidError):
    """A histogram was requested for an empty sample."""


class IncompatibleHistogramError(ChaosidError):
    """Two histograms with different bin edges were compared."""


class SerializationError(ChaosidError):
    """A serialized model record is malformed or does not match the
    data it is being rebound to."""
