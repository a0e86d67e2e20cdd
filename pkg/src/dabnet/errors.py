"""Exception types shared across the toolkit."""


class DabNetError(Exception):
    """Base class for all toolkit errors."""


class ShapeError(DabNetError):
    """Tensor or layer shapes are inconsistent (mismatched dims, degenerate output)."""


class AllocationError(DabNetError):
    """Requested element count cannot be represented or allocated."""


class WeightStoreError(DabNetError):
    """Weight store is incomplete, has extras, or a lookup key is missing."""


class FormatError(DabNetError):
    """A serialized file violates its format grammar."""


class TruncationError(FormatError):
    """A serialized file ended before its declared payload."""


class DataError(DabNetError):
    """Runtime data is out of its declared range (e.g. label values)."""


class MetricError(DabNetError):
    """A metric is undefined for the accumulated data."""
