"""Exception taxonomy shared across the package.

The CLI maps these onto its exit codes: ConfigError -> 2,
NumericalError -> 3, I/O problems -> 4.
"""


class GraphampError(Exception):
    """Base class for all package errors."""


class GraphError(GraphampError):
    """Invalid graph structure or unknown edge."""


class ShapeError(GraphampError):
    """Array shape inconsistent with the graph/nonlinearity contract."""


class NumericalError(GraphampError):
    """Non-finite iterate, failed factorization, or solver breakdown."""

    def __init__(self, msg, edge=None, t=None):
        super().__init__(msg)
        self.edge = edge
        self.t = t


class ConfigError(GraphampError):
    """Malformed or inconsistent experiment configuration."""
