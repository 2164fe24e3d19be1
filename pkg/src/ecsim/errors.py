"""Exception types shared across the package."""


class ValidationError(ValueError):
    """An input violates a documented precondition or invariant."""


class SizingError(ValidationError):
    """A requested computation exceeds the configured basis-size caps."""


class NumericsError(RuntimeError):
    """A numerical routine failed to converge or an invariant was breached at runtime."""


class ConfigError(ValueError):
    """An experiment configuration failed validation."""
