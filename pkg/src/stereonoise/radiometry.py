"""Incident-light and shot-noise models.

Intensities are linear photon-count proxies: exposure, gain, and surface
reflectance are folded into a single multiplicative constant, so the pixel
value is the Poisson rate and its shot-noise variance at the same time.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import ApproximationDomainError, DomainError

# Below this rate the normal approximation of the Poisson law is refused
# (skewness 1/sqrt(rate) exceeds ~0.22).
GAUSSIAN_APPROX_MIN_RATE = 20.0


class IlluminationMode(enum.Enum):
    PASSIVE = "passive"   # external source: pixel intensity independent of range
    ACTIVE = "active"     # co-located projector: inverse-square intensity falloff


@dataclass(frozen=True)
class IlluminationModel:
    """Range-dependent intensity law anchored at a control range.

    intensity_at_control is the pixel intensity observed at control_range;
    for PASSIVE the intensity is that value at every range, for ACTIVE it
    falls off as (Z / control_range)**-2.
    """

    mode: IlluminationMode
    intensity_at_control: float
    control_range: float

    def __post_init__(self):
        if self.intensity_at_control <= 0:
            raise DomainError("intensity_at_control must be > 0")
        if self.control_range <= 0:
            raise DomainError("control_range must be > 0")

    def intensity_at(self, z):
        return intensity_at_range(self, z)


def flux_ratio(illum: IlluminationModel, z):
    """Integrated per-pixel flux relative to the control range.

    The per-patch flux scales as (Z/Z0)**-2 (passive) or (Z/Z0)**-4 (active);
    the surface area seen by one pixel grows as (Z/Z0)**2, which cancels the
    passive dependence entirely and leaves (Z/Z0)**-2 for active.
    """
    z = np.asarray(z, dtype=float)
    if np.any(z <= 0):
        raise DomainError("range must be > 0")
    if illum.mode is IlluminationMode.PASSIVE:
        out = np.ones_like(z)
    else:
        out = (z / illum.control_range) ** -2.0
    return float(out) if out.ndim == 0 else out


def intensity_at_range(illum: IlluminationModel, z):
    """Pixel intensity at range z under the illumination law."""
    ratio = flux_ratio(illum, z)
    out = illum.intensity_at_control * np.asarray(ratio)
    return float(out) if out.ndim == 0 else out


def pixel_noise_variance(illum: IlluminationModel, intensity_at_control, z):
    """Shot-noise variance of a pixel whose control-range intensity is given.

    Poisson statistics make the variance equal to the mean intensity, so the
    variance follows the same range scaling as the intensity itself.
    """
    if np.any(np.asarray(intensity_at_control) <= 0):
        raise DomainError("intensity_at_control must be > 0")
    out = np.asarray(intensity_at_control) * np.asarray(flux_ratio(illum, z))
    return float(out) if out.ndim == 0 else out


class NoiseApproximation(enum.Enum):
    EXACT_POISSON = "poisson"
    GAUSSIAN = "gaussian"


@dataclass(frozen=True)
class ShotNoiseSpec:
    """Shot-noise sampling recipe: expected intensity and approximation choice."""

    rate: float
    approximation: NoiseApproximation = NoiseApproximation.EXACT_POISSON

    def __post_init__(self):
        if self.rate <= 0:
            raise DomainError("rate must be > 0")
        if (
            self.approximation is NoiseApproximation.GAUSSIAN
            and self.rate < GAUSSIAN_APPROX_MIN_RATE
        ):
            raise ApproximationDomainError(
                f"Gaussian approximation needs rate >= {GAUSSIAN_APPROX_MIN_RATE}, "
                f"got {self.rate}"
            )


def sample_shot_noise(spec: ShotNoiseSpec, rng: np.random.Generator, size=None):
    """Draw intensity samples: Poisson(rate) exactly, or N(rate, rate)."""
    if spec.approximation is NoiseApproximation.EXACT_POISSON:
        return rng.poisson(spec.rate, size=size)
    return rng.normal(spec.rate, np.sqrt(spec.rate), size=size)
