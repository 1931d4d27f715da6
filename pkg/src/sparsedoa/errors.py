"""Domain-specific errors shared across the processing pipeline."""


class TooManySourcesError(ValueError):
    """Requested source count exceeds what the data or geometry can identify."""


class DegenerateCoarrayError(ValueError):
    """The contiguous coarray segment is too small for spatial smoothing."""
