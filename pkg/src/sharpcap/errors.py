"""Exception types shared across the package."""


class ShapeError(ValueError):
    """An array argument has the wrong shape or length."""


class EmptyInputError(ValueError):
    """An operation that needs at least one row received none."""


class DomainError(ValueError):
    """A design point lies outside the task's box bounds."""


class SingularityError(ValueError):
    """A quadratic form that must be positive evaluated to <= 0."""


class ConfigError(ValueError):
    """Invalid experiment configuration, reported with its field path."""

    def __init__(self, path: str, message: str):
        self.path = path
        self.message = message
        super().__init__(f"{path}: {message}")
