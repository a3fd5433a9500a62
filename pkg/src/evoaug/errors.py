"""Exception types shared across the engine."""


class EvoAugError(Exception):
    """Base class for every error this package raises deliberately."""


class IoError(EvoAugError):
    """A file was missing, unreadable, or unwritable."""


class FormatError(EvoAugError):
    """An image payload is unsupported or corrupt."""


class ConfigError(EvoAugError):
    """A configuration value violates its declared bounds or preconditions."""


class InvalidTreeError(EvoAugError):
    """An augmentation tree violates a structural invariant."""

    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


class TreeParseError(EvoAugError):
    """Tree text does not conform to the grammar."""

    def __init__(self, position: int, expected: str):
        super().__init__(f"position {position}: expected {expected}")
        self.position = position
        self.expected = expected


class OperatorError(EvoAugError):
    """An operator application failed (after any configured retries)."""

    def __init__(self, op: str, detail: str):
        super().__init__(f"operator {op!r}: {detail}")
        self.op = op
        self.detail = detail


class UnknownOperatorError(EvoAugError):
    """A tree references an operator tag that is not registered."""


class DuplicateOperatorError(EvoAugError):
    """An operator tag was registered twice."""


class WorkerUnreachableError(EvoAugError):
    """The remote worker could not be spawned, reached, or answered too late."""


class ProtocolError(EvoAugError):
    """The remote worker sent a response that violates the wire protocol."""


class ManifestError(EvoAugError):
    """A dataset manifest line is malformed."""

    def __init__(self, line: int, detail: str):
        super().__init__(f"manifest line {line}: {detail}")
        self.line = line
        self.detail = detail


class EmptyClassError(EvoAugError):
    """A dataset class has no items."""


class TooFewItemsError(EvoAugError):
    """A class does not hold enough items for the requested split or draw."""


class TooFewClassesError(EvoAugError):
    """The dataset does not hold enough classes for the requested draw."""


class DimensionMismatchError(EvoAugError):
    """Matrix shapes do not line up."""


class MissingEmbeddingError(EvoAugError):
    """A precomputed embedding file lacks a required id."""


class NonFiniteEmbeddingError(EvoAugError):
    """An embedding contains NaN or infinite entries."""


class SingleClusterError(EvoAugError):
    """A clustering metric needs at least two distinct clusters."""


class CoincidentCentroidsError(EvoAugError):
    """Two cluster centroids coincide, so their separation is undefined."""


class DepthMismatchError(EvoAugError):
    """Crossover parents have different depths."""
