"""Exception types shared across the package."""


class SynthPersonError(Exception):
    """Base class for all package errors."""


class ConfigurationError(SynthPersonError):
    """A config value or preset reference is unusable (exit code 2)."""


class ValidationError(SynthPersonError):
    """An argument or domain object violates its contract (exit code 2)."""


class IntegrityError(SynthPersonError):
    """An emitted artifact is internally inconsistent (exit code 4)."""


class UndefinedVisibilityError(SynthPersonError):
    """Occlusion ratio requested for an identity outside the camera frustum."""
