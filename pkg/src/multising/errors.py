"""Exception types shared across the package."""


class PreconditionError(ValueError):
    """A numerical precondition was violated (e.g. a closed form asked for
    outside its validity range)."""


class InfeasibleSizeError(ValueError):
    """The requested exact computation exceeds the hard size caps."""


class ObservableSyntaxError(ValueError):
    """Raised by the observable expression parser; carries the offending
    position in the source text."""

    def __init__(self, message, position):
        super().__init__(f"{message} (at position {position})")
        self.position = position
