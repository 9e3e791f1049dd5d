"""Exception hierarchy shared by all dualdyn modules."""


class DualDynError(Exception):
    """Base class for every error raised by the package."""


class SpaceMismatchError(DualDynError):
    pass


class EvaluationError(DualDynError):
    """A physical variable produced a non-finite value."""


class DegenerateMeasureError(DualDynError):
    pass


class EmptyEnsembleError(DualDynError):
    pass


class UnsupportedRepresentationError(DualDynError):
    pass


class StabilityError(DualDynError):
    """Explicit time step violates the CFL bound."""


class CoefficientError(DualDynError):
    pass


class ConfigError(DualDynError):
    pass


class UnknownSettingError(DualDynError, KeyError):
    pass


class MissingSpectrumError(DualDynError):
    pass


class UnsupportedModelError(DualDynError):
    pass


class DegenerateSubensembleError(DualDynError):
    """No jointly detected events: the post-selected estimator is undefined."""


class NegativeDensityError(DualDynError):
    """Density negativity beyond round-off tolerance."""
