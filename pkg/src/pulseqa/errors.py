"""Exception types shared across the package."""


class InputError(ValueError):
    """Rejected input: bad shapes, non-finite values, violated preconditions."""


class NumericalError(RuntimeError):
    """Integration or solver failure (non-finite state, singular point)."""

    def __init__(self, message: str, t: float | None = None):
        super().__init__(message if t is None else f"{message} (t={t:.6g})")
        self.t = t
