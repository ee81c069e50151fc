"""Exception hierarchy shared by all platekit modules."""


class PlatekitError(Exception):
    """Base class for every error raised by this package."""


class ShapeError(PlatekitError):
    """Invalid extents, or shapes that do not compose."""


class InvalidRangeError(PlatekitError):
    """A numeric range parameter is empty or inverted."""


class NumericError(PlatekitError):
    """A computation produced non-finite values."""


class DegenerateBatchError(PlatekitError):
    """Batch statistics requested on a batch too small to have any."""


class EmptyInputError(PlatekitError):
    """An operation that needs at least one element got none."""


class BuildError(PlatekitError):
    """A network description does not compose; message names the layer."""


class InvalidLabelError(PlatekitError):
    """A token id lies outside the class range."""


class InfeasibleTargetError(PlatekitError):
    """Target sequence cannot be expressed in the available frames."""


class OracleSizeError(PlatekitError):
    """Brute-force enumeration would exceed the instance guard."""


class InvalidArgumentError(PlatekitError):
    """An argument violates a documented precondition."""


class InvalidTokenError(PlatekitError):
    """A token id is unknown to the alphabet."""


class LayoutError(PlatekitError):
    """Render geometry too small for the requested glyph layout."""


class InvalidTransformError(PlatekitError):
    """A geometric transform is singular or otherwise unusable."""


class CheckpointError(PlatekitError):
    """A checkpoint file is malformed, truncated, or mismatched."""


class StateError(PlatekitError):
    """Optimizer state missing or inconsistent with its parameters."""


class ConfigError(PlatekitError):
    """A run configuration is malformed; message names the key."""


class DataError(PlatekitError):
    """A dataset is missing, malformed, or contains an unusable sample."""


class DivergenceError(PlatekitError):
    """Training produced a non-finite loss."""
