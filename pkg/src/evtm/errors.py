"""Exception hierarchy shared by all evtm modules."""


class EvtmError(Exception):
    """Base class for every error raised by this package."""


class OutOfBounds(EvtmError):
    """Event coordinates exceed the sensor geometry."""


class BadPolarity(EvtmError):
    """Event polarity is not -1 or +1."""


class BadParam(EvtmError):
    """A parameter violates its documented invariant."""


class GeometryMismatch(EvtmError):
    """Two rasters that must share a geometry do not."""


class LengthMismatch(EvtmError):
    """Frame count and field length disagree."""


class TooFewFrames(EvtmError):
    """Operation needs more frames than were supplied."""


class TooSmall(EvtmError):
    """Raster is below the minimum size for the operation."""


class BadSpan(EvtmError):
    """Time span is empty or inverted."""


class DegenerateVariance(EvtmError):
    """Correlation undefined: one input is constant over the interior."""


class TrajectoryOutOfBounds(EvtmError):
    """Injected object would leave the background during its trajectory."""


class WindowOutOfSpan(EvtmError):
    """Requested temporal window is not covered by the event stream."""


class FormatError(EvtmError):
    """Base class for file-format errors (maps to I/O exit status)."""


class BadMagic(FormatError):
    """File does not start with the expected magic bytes."""


class Corrupt(FormatError):
    """File payload is truncated or internally inconsistent."""


class Unsorted(FormatError):
    """Stored event timestamps are not non-decreasing."""
