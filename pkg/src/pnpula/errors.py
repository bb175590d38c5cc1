"""Exception types shared across the package."""


class PnpUlaError(Exception):
    """Base class for all package errors."""


class DegenerateModelError(PnpUlaError):
    """A covariance or precision matrix failed the SPD check."""


class DimensionMismatchError(PnpUlaError):
    """Inputs have inconsistent shapes or an unsupported dimension."""


class SampleBudgetError(PnpUlaError):
    """An exact computation was requested above its cost guard."""


class InsufficientDataError(PnpUlaError):
    """An estimator received an empty or too-small sample set."""


class DegenerateInputError(PnpUlaError):
    """An input has zero variance or is otherwise statistically degenerate."""


class ConfigError(PnpUlaError):
    """An experiment configuration or model file is invalid."""


class DivergenceError(PnpUlaError):
    """The Markov chain left the finite / bounded region.

    Carries the step index at which divergence was detected.
    """

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step
