"""Exception types shared across the package."""


class DimensionError(ValueError):
    """An array argument has an incompatible or malformed shape."""


class SegmentationError(ValueError):
    """A recording cannot be split under the requested segmentation plan."""


class ConfigError(ValueError):
    """An experiment configuration is missing, inconsistent, or unusable."""
