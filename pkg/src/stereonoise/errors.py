"""Exception types shared across the toolkit."""


class StereoNoiseError(Exception):
    """Base class for all toolkit errors."""


class DomainError(StereoNoiseError):
    """An argument lies outside the mathematical domain of an operation."""


class ApproximationDomainError(DomainError):
    """The Gaussian shot-noise approximation was requested below its validity threshold."""


class GeometryError(StereoNoiseError):
    """A geometric configuration cannot be realised (e.g. shift leaves the scanline)."""


class MatchError(StereoNoiseError):
    """Disparity estimation failed for one trial (textureless window or divergence)."""


class DegenerateDataError(StereoNoiseError):
    """The sample set cannot identify the model parameters."""


class NoRootError(StereoNoiseError):
    """The profile score has no root inside the requested bracket."""


class SaddleError(StereoNoiseError):
    """The critical point is not a maximum (observed information not positive definite)."""


class FormatError(StereoNoiseError):
    """A dataset, manifest, or config document violates its schema."""


class SerializationError(StereoNoiseError):
    """A value cannot be represented in the on-disk format."""


class IoError(StereoNoiseError):
    """A referenced file is missing or unreadable."""


class ConfigError(StereoNoiseError):
    """Command-line or config-file options conflict or are incomplete."""
