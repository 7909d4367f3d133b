"""Exception types shared across the package."""


class SupportError(ValueError):
    """A support, shift or dilation would leave the grid domain."""


class ZeroModeError(ValueError):
    """An operand carries a real zero mode where a null integral is required."""


class NumericalGuardError(RuntimeError):
    """A numerical safeguard tripped.

    Parameters
    ----------
    guard : str
        Short machine-readable name of the guard.
    message : str
        Human-readable explanation.
    """

    def __init__(self, guard, message):
        super().__init__(f"[{guard}] {message}")
        self.guard = guard
