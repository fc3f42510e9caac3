"""Stereo triangulation geometry and power-law range-error models.

Ranges are axial (parallel to the optical axis) and in meters; focal length
and disparity are in pixels. The camera pair is assumed ideally rectified and
coplanar, so range and disparity are exact inverses: Z = f*b/d.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class StereoRig:
    """Rectified stereo geometry shared by the passive and active setups.

    focal_length is in pixels, baseline in meters. control_range is the
    reference distance all range-dependent scaling laws are anchored to.
    """

    focal_length: float
    baseline: float
    pixel_count_x: int = 640
    control_range: float = 1.0

    def __post_init__(self):
        if self.focal_length <= 0:
            raise DomainError(f"focal_length must be > 0, got {self.focal_length}")
        if self.baseline <= 0:
            raise DomainError(f"baseline must be > 0, got {self.baseline}")
        if self.pixel_count_x <= 0:
            raise DomainError(f"pixel_count_x must be > 0, got {self.pixel_count_x}")
        if self.control_range <= 0:
            raise DomainError(f"control_range must be > 0, got {self.control_range}")

    @property
    def fb(self) -> float:
        """Product focal_length * baseline, in pixel-meters."""
        return self.focal_length * self.baseline


def disparity_to_range(d, rig: StereoRig):
    """Triangulate range Z = f*b/d from a positive disparity (pixels -> meters)."""
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise DomainError("disparity must be > 0 to triangulate")
    out = rig.fb / d
    return float(out) if out.ndim == 0 else out


def range_to_disparity(z, rig: StereoRig):
    """Inverse of disparity_to_range: d = f*b/Z (meters -> pixels)."""
    z = np.asarray(z, dtype=float)
    if np.any(z <= 0):
        raise DomainError("range must be > 0")
    out = rig.fb / z
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class PowerLawModel:
    """Range-error law sigma_Z = scale * Z**exponent.

    scale carries units of meters**(1 - exponent) and is only meaningful
    reported together with the exponent.
    """

    scale: float
    exponent: float

    def __post_init__(self):
        if self.scale <= 0:
            raise DomainError(f"scale must be > 0, got {self.scale}")
        if self.exponent < 0:
            raise DomainError(f"exponent must be >= 0, got {self.exponent}")

    def sigma_at(self, z):
        """Predicted range error (meters) at range z > 0."""
        z = np.asarray(z, dtype=float)
        if np.any(z <= 0):
            raise DomainError("range must be > 0")
        out = self.scale * z ** self.exponent
        return float(out) if out.ndim == 0 else out


class BaselineKind(enum.Enum):
    """Published Kinect-v1 range-error models used for comparison."""

    KHOSHELHAM_QUADRATIC = "khoshelham"
    NGUYEN_OFFSET_QUADRATIC = "nguyen"


_BASELINE_COEFF_COUNT = {
    BaselineKind.KHOSHELHAM_QUADRATIC: 1,
    BaselineKind.NGUYEN_OFFSET_QUADRATIC: 3,
}


@dataclass(frozen=True)
class BaselineModel:
    """One of the published comparison curves.

    KHOSHELHAM_QUADRATIC:      sigma = c1 * Z**2
    NGUYEN_OFFSET_QUADRATIC:   sigma = c1 + c2 * (Z - c3)**2
    """

    kind: BaselineKind
    coefficients: tuple = field(default=())

    def __post_init__(self):
        want = _BASELINE_COEFF_COUNT[self.kind]
        coeffs = tuple(float(c) for c in self.coefficients)
        object.__setattr__(self, "coefficients", coeffs)
        if len(coeffs) != want:
            raise DomainError(
                f"{self.kind.name} takes exactly {want} coefficient(s), got {len(coeffs)}"
            )

    def sigma_at(self, z):
        """Evaluate the published curve at range z >= 0 (meters)."""
        z = np.asarray(z, dtype=float)
        if np.any(z < 0):
            raise DomainError("range must be >= 0")
        c = self.coefficients
        if self.kind is BaselineKind.KHOSHELHAM_QUADRATIC:
            out = c[0] * z ** 2
        else:
            out = c[0] + c[1] * (z - c[2]) ** 2
        return float(out) if out.ndim == 0 else out


# Coefficients recovered by least squares from the published curves; the
# fitting script lives in scripts/fit_baseline_coefficients.py and checks
# residuals below 1e-9.
KHOSHELHAM_KINECT1 = BaselineModel(BaselineKind.KHOSHELHAM_QUADRATIC, (0.001425,))
NGUYEN_KINECT1 = BaselineModel(BaselineKind.NGUYEN_OFFSET_QUADRATIC, (0.0012, 0.0019, 0.4))
