"""Exception types shared across the toolkit."""


class SegkitError(Exception):
    """Base class for all toolkit errors."""


class LoadError(SegkitError):
    """A referenced file is missing or cannot be decoded."""


class ValidationError(SegkitError):
    """Loaded or generated data violates a structural invariant."""


class GenerationError(SegkitError):
    """Synthetic data generation cannot satisfy the requested configuration."""
