"""Exception types shared across the package."""


class GridError(ValueError):
    """Invalid discretization, region, or mismatched grids."""


class DefinitenessError(ValueError):
    """A metric failed the positive-definiteness check at some node."""

    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


class SupportError(ValueError):
    """A field violates a compact-support requirement."""


class GateError(ValueError):
    """A smallness condition gating an estimate or a solve is violated."""

    def __init__(self, message, gate=None, value=None):
        super().__init__(message)
        self.gate = gate
        self.value = value


class BreakdownError(RuntimeError):
    """Iterative solver lost coercivity or stagnated.

    This is the runtime signature of a violated smallness condition
    c1 * ||f_-||_{n/2} < 1 for the zeroth-order term of the operator.
    """

    def __init__(self, message, iterations=None, residual=None):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


class PositivityError(ValueError):
    """A conformal factor is non-positive somewhere."""

    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


class ConfigError(ValueError):
    """Malformed pipeline configuration."""
