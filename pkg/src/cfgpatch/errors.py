"""Exception hierarchy shared across the package.

Scorer-side failures are split into distinct kinds so callers can tell a
dead transport from a misbehaving-but-alive endpoint; the optimizer treats
all of them as evaluation errors for the affected candidate.
"""


class CfgPatchError(Exception):
    """Base class for all package errors."""


class ParameterError(CfgPatchError, ValueError):
    """A value lies outside its documented domain."""


class ShapeError(CfgPatchError, ValueError):
    """Array dimensions do not match what an operation requires."""


class ConfigError(CfgPatchError, ValueError):
    """A run configuration failed schema validation."""


class ScorerError(CfgPatchError):
    """Base class for failures at the black-box scorer boundary."""


class ScorerTimeoutError(ScorerError):
    """The scorer did not answer within the configured deadline."""


class TransportError(ScorerError):
    """The connection or subprocess carrying the scorer died."""


class MalformedResponseError(ScorerError):
    """The scorer answered with bytes that do not parse as a valid response."""


class ClassCountMismatchError(ScorerError):
    """The scorer returned a score vector whose length contradicts its handshake."""


class EvaluationError(CfgPatchError):
    """A candidate evaluation failed; carries the particle tag when known."""

    def __init__(self, message, particle=None):
        super().__init__(message)
        self.particle = particle
