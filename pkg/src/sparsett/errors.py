"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of a function."""


class ConvergenceError(RuntimeError):
    """An iterative evaluation hit its iteration cap before converging."""


class OutOfRangeError(ValueError):
    """A travel-time sample falls outside the discretized support."""

    def __init__(self, samples, lo, hi):
        self.samples = list(samples)
        super().__init__(
            f"samples outside support [{lo:g}, {hi:g}]: {self.samples[:10]}"
            + (" ..." if len(self.samples) > 10 else "")
        )


class GridTooSmallError(ValueError):
    """The support grid is too short to hold the dictionary tails."""

    def __init__(self, required, actual):
        self.required = required
        self.actual = actual
        super().__init__(
            f"support size N={actual} is below the tail bound; need N >= {required}"
        )
