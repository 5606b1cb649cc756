"""Exception types shared across the solver."""

from __future__ import annotations


class SlotpnpError(Exception):
    """Base class for all package-specific errors."""


class GridMismatchError(SlotpnpError, ValueError):
    """Two fields that must live on the same grid do not."""


class ConfigError(SlotpnpError, ValueError):
    """A run configuration failed validation.

    ``key`` and ``line`` locate the offending entry when known.
    """

    def __init__(self, message: str, key: str | None = None, line: int | None = None):
        self.key = key
        self.line = line
        loc = ""
        if key is not None:
            loc += f" (key '{key}'"
            loc += f", line {line})" if line is not None else ")"
        super().__init__(message + loc)


class IncompatibleRhsError(SlotpnpError, ValueError):
    """Poisson right-hand side has a cell mean too large for the periodic problem."""

    def __init__(self, mean_value: float, limit: float):
        self.mean_value = mean_value
        self.limit = limit
        super().__init__(
            f"Poisson rhs mean {mean_value:.6e} exceeds compatibility limit {limit:.6e}; "
            "the periodic problem is only solvable for (numerically) zero-mean sources"
        )


class NonConvergenceError(SlotpnpError, RuntimeError):
    """An iterative solve hit its iteration cap before reaching tolerance."""

    def __init__(self, what: str, iterations: int, residual: float, tol: float):
        self.iterations = iterations
        self.residual = residual
        self.tol = tol
        super().__init__(
            f"{what}: no convergence after {iterations} iterations "
            f"(relative residual {residual:.6e}, tolerance {tol:.6e})"
        )


class PositivityViolationError(SlotpnpError, RuntimeError):
    """A source-free transport step produced a non-positive concentration.

    The scheme preserves positivity exactly, so this signals a solver or
    implementation fault rather than a model state; the offending cell is
    reported for debugging.
    """

    def __init__(self, species: str, cell_index: tuple[int, ...], value: float):
        self.species = species
        self.cell_index = cell_index
        self.value = value
        super().__init__(
            f"concentration of species '{species}' non-positive at cell {cell_index}: "
            f"{value:.6e} (internal error: the scheme guarantees positivity)"
        )
