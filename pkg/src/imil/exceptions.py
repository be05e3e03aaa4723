"""Exception types shared across the package."""


class ImilError(Exception):
    """Base class for all package errors."""


class ValidationError(ImilError):
    """Input violates a documented precondition or invariant."""


class NotFoundError(ImilError):
    """A referenced sample, case, or file does not exist."""


class LoadError(ImilError):
    """A dataset resource could not be read or decoded."""


class StateError(ImilError):
    """Operation is illegal in the object's current state."""


class CapabilityError(ImilError):
    """Backend does not support a required capability."""


class UndefinedMetricError(ImilError):
    """Metric is undefined for the given inputs (e.g. single-class AUROC)."""


class TrainingError(ImilError):
    """Training aborted; message carries epoch/batch context."""


class FeedbackTimeout(ImilError):
    """Feedback session exceeded its configured time budget."""


class ConfigError(ImilError):
    """Experiment configuration failed to parse or validate."""
