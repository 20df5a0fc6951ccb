"""Exception types shared across the package."""


class HerdidError(Exception):
    """Base class for all herdid errors."""


class ManifestError(HerdidError, ValueError):
    """Malformed or inconsistent dataset manifest.

    Carries the offending line number when raised during parsing.
    """

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ProvenanceConflictError(HerdidError, ValueError):
    """Feature vector provenance or dimension disagrees with prior contents."""


class FeatureNotFoundError(HerdidError, KeyError):
    """Requested (image_id, flipped) key is not in the feature store."""


class InvalidPoolSizeError(HerdidError, ValueError):
    """Pooling window does not fit the activation tensor."""


class InsufficientSamplesError(HerdidError, ValueError):
    """Too few samples to fit the requested model."""


class SingleClassError(HerdidError, ValueError):
    """Classifier training requires at least two distinct labels."""


class DimensionMismatchError(HerdidError, ValueError):
    """Vector dimensionality disagrees with the fitted model."""


class NotCalibratedError(HerdidError, RuntimeError):
    """Calibrated probabilities requested from an uncalibrated model."""


class ArchiveFormatError(HerdidError, ValueError):
    """Model archive file is corrupt or has an unsupported version."""


class BackendError(HerdidError, RuntimeError):
    """Embedding or detector backend failed to load or run."""
