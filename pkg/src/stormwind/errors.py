"""Exception hierarchy shared by all stormwind modules."""


class StormWindError(Exception):
    """Base class for every error raised by this package."""


class ParameterError(StormWindError, ValueError):
    """A configuration value is outside its valid range."""


class ShapeError(StormWindError, ValueError):
    pass


class LengthError(StormWindError, ValueError):
    pass


class DegenerateInputError(StormWindError, ValueError):
    """Input is silent (or otherwise degenerate) where a non-zero signal is required."""


class SpectrogramStateError(StormWindError, ValueError):
    """Operation applied to a spectrogram in the wrong warped/unwarped state."""


class NormalizationError(StormWindError, ArithmeticError):
    pass


class NumericalDivergenceError(StormWindError, ArithmeticError):
    """A model produced non-finite values.

    ``tau`` and ``sigma`` carry the diffusion time and noise level at which
    the failure was detected (either may be ``None``).
    """

    def __init__(self, message, tau=None, sigma=None):
        super().__init__(message)
        self.tau = tau
        self.sigma = sigma


class TrainingDivergedError(NumericalDivergenceError):
    """Training loss became non-finite; ``last_good`` holds the last finite state."""

    def __init__(self, message, last_good=None, tau=None, sigma=None):
        super().__init__(message, tau=tau, sigma=sigma)
        self.last_good = last_good


class AudioFormatError(StormWindError, ValueError):
    pass


class CheckpointError(StormWindError, ValueError):
    pass


class ConfigError(StormWindError, ValueError):
    pass
