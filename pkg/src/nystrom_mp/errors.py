"""Exception types raised across the package."""

from __future__ import annotations


class ConfigError(ValueError):
    """Invalid configuration: unknown names, malformed files, bad parameters."""


class NumericError(ArithmeticError):
    """A numerical procedure could not produce a meaningful result."""


class FormatOverflowError(NumericError):
    """A value left the finite range of a simulated format."""

    def __init__(self, fmt_name: str, magnitude: float):
        self.fmt_name = fmt_name
        self.magnitude = magnitude
        super().__init__(f"overflow in {fmt_name}: magnitude {magnitude:.6g} exceeds the format range")


class NotPsdError(NumericError):
    def __init__(self, lambda_min: float, lambda_max: float, tol: float):
        self.lambda_min = lambda_min
        self.lambda_max = lambda_max
        super().__init__(
            f"matrix is not positive semidefinite: lambda_min={lambda_min:.6g} < "
            f"-{tol:g} * lambda_max (lambda_max={lambda_max:.6g})"
        )


class CholeskyError(NumericError):
    def __init__(self, pivot: int):
        self.pivot = pivot
        super().__init__(f"Cholesky factorization failed: leading minor of order {pivot} is not positive")


class TheoryRangeError(ValueError):
    """The rounding-error model does not apply (c * n * u_p >= 1)."""

    def __init__(self, nu: float):
        self.nu = nu
        super().__init__(f"error analysis out of range: c*n*u_p = {nu:.6g} >= 1")


class RankDeficiencyError(NumericError):
    pass


class SingularPreconditionerError(NumericError):
    pass


class BreakdownError(NumericError):
    def __init__(self, iteration: int, value: float):
        self.iteration = iteration
        super().__init__(f"PCG breakdown at iteration {iteration}: non-positive curvature {value:.6g}")


class MatrixMarketError(ValueError):
    def __init__(self, message: str, path=None, line: int | None = None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)
