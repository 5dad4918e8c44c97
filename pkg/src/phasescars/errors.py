"""Error types raised by the numerical self-checks."""


class NumericalCheckError(RuntimeError):
    """A computed quantity failed a built-in consistency check.

    Raised when a propagator is not unitary within tolerance, a diagonal field
    keeps an imaginary part, a trace identity does not close, or an exact
    enumeration disagrees with its closed-form count.
    """

    def __init__(self, check: str, residual: float, tolerance: float) -> None:
        self.check = check
        self.residual = residual
        self.tolerance = tolerance
        super().__init__(f"{check} check failed: residual {residual:.3e} exceeds tolerance {tolerance:.1e}")
