"""Exception taxonomy shared by all modules.

Every failure the pipeline can report is a subclass of TerrafuseError,
grouped into configuration errors (CLI exit code 2) and data errors
(exit code 3). Anything else escaping a stage is an internal error
(exit code 4).
"""


class TerrafuseError(Exception):
    """Base class for all package errors."""

    @property
    def category(self) -> str:
        return type(self).__name__


class ConfigError(TerrafuseError):
    """Invalid or inconsistent configuration document."""


# raster_model
class DimensionMismatch(TerrafuseError):
    pass


class DuplicateBandName(TerrafuseError):
    pass


class FormatError(TerrafuseError):
    """Corrupt or malformed on-disk container."""


class IoError(TerrafuseError):
    """Filesystem failure while reading or writing an artifact."""


# compositing
class EmptyResult(TerrafuseError):
    """A filter left no items; a downstream reduce would be undefined."""


class MissingBand(TerrafuseError):
    pass


class EmptyCollection(TerrafuseError):
    pass


# samples
class ParseError(TerrafuseError):
    pass


class AllSamplesDropped(TerrafuseError):
    pass


class InsufficientPixels(TerrafuseError):
    pass


# cart
class EmptyCounts(TerrafuseError):
    pass


class EmptyTrainingSet(TerrafuseError):
    pass


# classify
class BandOrderMismatch(TerrafuseError):
    pass


class MissingPaletteEntry(TerrafuseError):
    pass


# validation
class EmptyValidationSet(TerrafuseError):
    pass


class EmptyMatrix(TerrafuseError):
    pass


class LegendMismatch(TerrafuseError):
    pass


# service
class PortInUse(TerrafuseError):
    pass


class Busy(TerrafuseError):
    """Another mutating job is already running."""
