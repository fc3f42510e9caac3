"""Dataset statistics and the sampling protocol.

Pixelwise means (never a global mean, so surface structure is not mistaken
for noise), balanced per-distance subsampling, range binning, and the
model-normalized kurtosis diagnostic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, FormatError
from .estimator import FitInput
from .model import PowerLawModel
from .simulate import RangeSamples

MIN_KURTOSIS_SAMPLES = 100


@dataclass(frozen=True)
class PixelSeries:
    """Valid measurements of one pixel across frames, with their mean."""

    pixel_index: int
    values: np.ndarray

    @property
    def mean(self) -> float:
        return float(self.values.mean())


@dataclass(frozen=True)
class BinStats:
    """Per-range-window sample count and kurtosis (NaN below the count rule)."""

    z_lo: float
    z_hi: float
    count: int
    kurtosis: float

    @property
    def center(self) -> float:
        return 0.5 * (self.z_lo + self.z_hi)


def pixelwise_means(frames) -> tuple[np.ndarray, np.ndarray]:
    """Mean over valid (finite, positive) entries per pixel of a frame stack.

    Accepts any iterable of equally shaped arrays and streams them, so a
    full recording never needs to be resident at once. Returns (means,
    counts); pixels with no valid measurement get NaN.
    """
    total = None
    count = None
    shape = None
    for frame in frames:
        frame = np.asarray(frame, dtype=float)
        if shape is None:
            shape = frame.shape
            total = np.zeros(shape)
            count = np.zeros(shape, dtype=np.int64)
        elif frame.shape != shape:
            raise FormatError(f"frame shape {frame.shape} != first frame {shape}")
        ok = np.isfinite(frame) & (frame > 0)
        total[ok] += frame[ok]
        count += ok
    if shape is None:
        raise FormatError("need at least one frame")
    with np.errstate(invalid="ignore"):
        means = np.where(count > 0, total / np.maximum(count, 1), np.nan)
    return means, count


def pixel_series_from_stack(frames) -> list[PixelSeries]:
    """Materialize per-pixel series for small stacks (testing/inspection)."""
    stack = np.stack([np.asarray(f, dtype=float).ravel() for f in frames])
    out = []
    for idx in range(stack.shape[1]):
        col = stack[:, idx]
        vals = col[np.isfinite(col) & (col > 0)]
        if vals.size:
            out.append(PixelSeries(pixel_index=idx, values=vals))
    return out


def pairs_from_samples(samples: RangeSamples) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Build (z, zbar, group_key) pairs from a sample set.

    zbar is the mean of valid measurements sharing (nominal range, pixel);
    groups with no valid sample are dropped. group_key is the nominal range
    of each pair, used for per-distance balanced sampling.
    """
    ok = samples.valid
    z = samples.z[ok]
    nominal = samples.nominal_range[ok]
    pixel = samples.pixel_index[ok]
    key = np.stack([nominal, pixel.astype(float)], axis=1)
    _, inverse = np.unique(key, axis=0, return_inverse=True)
    sums = np.bincount(inverse, weights=z)
    counts = np.bincount(inverse)
    zbar = (sums / counts)[inverse]
    return z, zbar, nominal


def balanced_sample(
    groups: dict,
    per_group: int,
    seed: int,
) -> tuple[FitInput, int]:
    """Uniform subsample without replacement of per_group pairs per group.

    groups maps a sortable key (e.g. capture distance) to a pair of arrays
    (z, zbar). Groups smaller than per_group contribute everything they
    have; the number of such short groups is returned alongside the pooled
    FitInput. Group order is sorted by key so the draw is reproducible.
    """
    if per_group < 1:
        raise DomainError("per_group must be >= 1")
    if not groups:
        raise FormatError("no groups to sample from")
    rng = np.random.default_rng(seed)
    zs, zbars = [], []
    short = 0
    for key in sorted(groups):
        z, zbar = groups[key]
        z = np.asarray(z, dtype=float)
        zbar = np.asarray(zbar, dtype=float)
        if z.size > per_group:
            idx = rng.choice(z.size, size=per_group, replace=False)
            idx.sort()
            zs.append(z[idx])
            zbars.append(zbar[idx])
        else:
            short += int(z.size < per_group)
            zs.append(z)
            zbars.append(zbar)
    return FitInput(np.concatenate(zs), np.concatenate(zbars), allow_small=True), short


def flat_sample(z, zbar, total: int, seed: int) -> FitInput:
    """Single uniform subsample of at most `total` pairs (tilted protocol)."""
    if total < 1:
        raise DomainError("total must be >= 1")
    z = np.asarray(z, dtype=float)
    zbar = np.asarray(zbar, dtype=float)
    if z.size == 0:
        raise FormatError("no pairs to sample from")
    if z.size <= total:
        return FitInput(z, zbar, allow_small=True)
    rng = np.random.default_rng(seed)
    idx = rng.choice(z.size, size=total, replace=False)
    idx.sort()
    return FitInput(z[idx], zbar[idx], allow_small=True)


def group_pairs_by_distance(z, zbar, nominal) -> dict:
    """Split pairs by their nominal capture distance."""
    groups = {}
    for d in np.unique(nominal):
        mask = nominal == d
        groups[float(d)] = (z[mask], zbar[mask])
    return groups


def group_pairs_by_mean_bin(z, zbar, width: float) -> dict:
    """Alternative grouping: equidistant bins of the per-pixel mean range."""
    if width <= 0:
        raise DomainError("width must be > 0")
    idx = np.floor(np.asarray(zbar) / width).astype(np.int64)
    groups = {}
    for b in np.unique(idx):
        mask = idx == b
        groups[float(b) * width] = (z[mask], zbar[mask])
    return groups


def normalized_kurtosis(residuals, sigmas) -> float:
    """Mean fourth power of residuals normalized by the model sigma.

    Gaussian residuals give 3; heavier tails give more. Returns NaN below
    the minimum sample-count rule.
    """
    r = np.asarray(residuals, dtype=float)
    s = np.asarray(sigmas, dtype=float)
    if r.shape != s.shape:
        raise DomainError("residuals and sigmas must have matching shapes")
    if np.any(s <= 0):
        raise DomainError("sigmas must be > 0")
    if r.size < MIN_KURTOSIS_SAMPLES:
        return float("nan")
    return float(np.mean((r / s) ** 4))


def bin_by_range(z, zbar, width: float, model: PowerLawModel) -> list[BinStats]:
    """Assign pairs to [n*width, (n+1)*width) windows of zbar.

    Each window reports its sample count and the kurtosis of residuals
    normalized by the fitted model sigma at each pair's zbar; windows with
    fewer than 100 samples report NaN kurtosis. Covers the full range from
    zero through the last occupied window, including empty windows.
    """
    if width <= 0:
        raise DomainError("width must be > 0")
    z = np.asarray(z, dtype=float)
    zbar = np.asarray(zbar, dtype=float)
    if z.size == 0:
        return []
    idx = np.floor(zbar / width).astype(np.int64)
    out = []
    for b in range(int(idx.max()) + 1):
        mask = idx == b
        n = int(np.count_nonzero(mask))
        if n >= MIN_KURTOSIS_SAMPLES:
            kurt = normalized_kurtosis(z[mask] - zbar[mask], model.sigma_at(zbar[mask]))
        else:
            kurt = float("nan")
        out.append(BinStats(z_lo=b * width, z_hi=(b + 1) * width, count=n, kurtosis=kurt))
    return out
