"""Monte Carlo verification engines.

Two routes produce range samples:

* an image-level scanline simulator: textured pattern -> noisy left/right
  intensity pair -> subpixel disparity estimate -> triangulated range;
* a direct generative sampler drawing ranges from N(Z, (scale * Z**exp)**2).

Both emit the same columnar sample container so measured and simulated data
flow through one estimator path. All randomness comes from explicit seeds;
trials are chunked with seeds derived deterministically from the master seed,
so results are identical for any worker count.
"""

from __future__ import annotations

import enum
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import DomainError, GeometryError, MatchError
from .model import StereoRig, PowerLawModel, disparity_to_range, range_to_disparity
from .radiometry import (
    GAUSSIAN_APPROX_MIN_RATE,
    IlluminationModel,
    intensity_at_range,
)

_CHUNK_TRIALS = 4096
_SEARCH_HALFWIDTH = 2  # integer SSD candidates either side of round(d_init)


class PatternKind(enum.Enum):
    SPECKLE = "speckle"
    SMOOTH = "smooth"


@dataclass(frozen=True)
class ScanlinePattern:
    """Dimensionless texture I(x) sampled on integer pixel positions.

    Values are nonnegative with mean approximately 1, so multiplying by the
    illumination intensity gives the per-pixel Poisson rate directly.
    Subpixel positions are evaluated with a cubic spline.
    """

    samples: np.ndarray
    kind: PatternKind

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim != 1 or samples.size < 4:
            raise DomainError("pattern needs a 1-D array of at least 4 samples")
        if np.any(samples < 0) or not np.all(np.isfinite(samples)):
            raise DomainError("pattern intensities must be finite and >= 0")
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return self.samples.size

    @cached_property
    def _spline(self) -> CubicSpline:
        return CubicSpline(np.arange(self.samples.size), self.samples)

    def at(self, x):
        """Pattern value at (possibly subpixel) positions inside the domain."""
        x = np.asarray(x, dtype=float)
        if np.any(x < 0) or np.any(x > self.samples.size - 1):
            raise GeometryError("requested position outside the pattern domain")
        return np.clip(self._spline(x), 0.0, None)

    def gradient_energy(self, center: int, half_width: int) -> float:
        """Sum of squared central-difference gradients over one window."""
        offs = np.arange(center - half_width, center + half_width + 1)
        g = (self.samples[offs + 1] - self.samples[offs - 1]) / 2.0
        return float((g * g).sum())


def speckle_pattern(
    length: int,
    rng: np.random.Generator,
    correlation_length: float = 3.0,
    contrast: float = 0.35,
    floor: float = 0.05,
) -> ScanlinePattern:
    """Projector-like speckle: low-pass-filtered uniform noise.

    The Gaussian smoothing kernel width sets the correlation length, chosen
    so every default correlation window contains usable gradients.
    """
    if length < 16:
        raise DomainError("speckle pattern needs length >= 16")
    if correlation_length <= 0 or contrast <= 0:
        raise DomainError("correlation_length and contrast must be > 0")
    reach = max(1, int(round(4 * correlation_length)))
    white = rng.uniform(-1.0, 1.0, length + 2 * reach)
    xk = np.arange(-reach, reach + 1)
    kernel = np.exp(-0.5 * (xk / correlation_length) ** 2)
    kernel /= kernel.sum()
    smooth = np.convolve(white, kernel, mode="valid")
    smooth = (smooth - smooth.mean()) / smooth.std()
    values = np.clip(1.0 + contrast * smooth[:length], floor, None)
    return ScanlinePattern(values, PatternKind.SPECKLE)


def smooth_pattern(
    length: int,
    period: float = 40.0,
    contrast: float = 0.5,
    phase: float = 0.0,
) -> ScanlinePattern:
    """Slowly varying sinusoidal texture (benign for interpolation tests)."""
    if length < 16 or period <= 0 or not 0 < contrast < 1:
        raise DomainError("invalid smooth pattern parameters")
    x = np.arange(length, dtype=float)
    values = 1.0 + contrast * np.sin(2.0 * np.pi * x / period + phase)
    return ScanlinePattern(values, PatternKind.SMOOTH)


@dataclass(frozen=True)
class CorrelationWindow:
    """Matching window: offsets -half_width..half_width around a center pixel."""

    half_width: int
    center: int | None = None

    def __post_init__(self):
        if self.half_width < 1:
            raise DomainError("half_width must be >= 1")

    @property
    def offsets(self) -> np.ndarray:
        return np.arange(-self.half_width, self.half_width + 1)

    def resolve_center(self, scanline_length: int) -> int:
        c = self.center if self.center is not None else scanline_length // 2
        if c - self.half_width - 1 < 0 or c + self.half_width + 1 >= scanline_length:
            raise GeometryError("window (plus gradient margin) leaves the scanline")
        return c


def render_noisy_pair(
    pattern: ScanlinePattern,
    illum: IlluminationModel,
    z: float,
    d_true: float,
    rng: np.random.Generator,
    length: int | None = None,
    trials: int = 1,
    noise: str = "poisson",
    squeeze: bool = True,
):
    """Render a left/right intensity pair at range z with disparity d_true.

    left(x) samples the pattern at x, right(x) at x + d_true (cubic
    interpolation), both scaled by the illumination intensity at z; shot
    noise is drawn independently per pixel and per image. noise is one of
    "poisson", "gaussian", "none". With trials > 1 the returned arrays have
    shape (trials, length) and share the same clean signal.
    """
    if z <= 0:
        raise DomainError("range must be > 0")
    if d_true < 0:
        raise GeometryError("disparity must be >= 0")
    n = len(pattern)
    if length is None:
        length = n - int(np.ceil(d_true)) - 1
    if length < 4:
        raise GeometryError("scanline too short")
    if length - 1 + d_true > n - 1:
        raise GeometryError("shift exceeds the pattern domain")

    scale = intensity_at_range(illum, z)
    x = np.arange(length, dtype=float)
    mean_left = scale * pattern.samples[:length]
    mean_right = scale * pattern.at(x + d_true)

    if noise == "none":
        left, right = mean_left.copy(), mean_right.copy()
        if trials > 1:
            left = np.broadcast_to(left, (trials, length)).copy()
            right = np.broadcast_to(right, (trials, length)).copy()
    elif noise == "poisson":
        left = rng.poisson(np.broadcast_to(mean_left, (trials, length))).astype(float)
        right = rng.poisson(np.broadcast_to(mean_right, (trials, length))).astype(float)
    elif noise == "gaussian":
        low = min(mean_left.min(), mean_right.min())
        if low < GAUSSIAN_APPROX_MIN_RATE:
            raise DomainError(
                f"gaussian noise mode needs intensities >= {GAUSSIAN_APPROX_MIN_RATE}"
            )
        left = rng.normal(
            np.broadcast_to(mean_left, (trials, length)), np.sqrt(mean_left)
        )
        right = rng.normal(
            np.broadcast_to(mean_right, (trials, length)), np.sqrt(mean_right)
        )
    else:
        raise DomainError(f"unknown noise mode {noise!r}")

    if squeeze and trials == 1 and left.ndim == 2:
        left, right = left[0], right[0]
    return left, right


def _disparity_batch(left, right, center: int, half_width: int, d_init: float):
    """Vectorized integer-SSD search plus one Gauss-Newton refinement.

    Returns (d_hat, valid); entries with zero gradient energy or a
    refinement step beyond +-1 px are marked invalid.
    """
    left = np.atleast_2d(np.asarray(left, dtype=float))
    right = np.atleast_2d(np.asarray(right, dtype=float))
    trials, length = left.shape
    w = center + np.arange(-half_width, half_width + 1)

    d0 = int(round(d_init))
    cands = d0 + np.arange(-_SEARCH_HALFWIDTH, _SEARCH_HALFWIDTH + 1)
    if w[0] - cands.max() < 0 or w[-1] + 1 >= length or cands.min() < 0:
        raise GeometryError("window or disparity candidates leave the scanline")

    ssd = np.stack(
        [((left[:, w] - right[:, w - c]) ** 2).sum(axis=1) for c in cands], axis=1
    )
    best = cands[np.argmin(ssd, axis=1)]

    # One Gauss-Newton step from the integer minimum; gradients are central
    # differences on the noisy left image.
    g = (left[:, w + 1] - left[:, w - 1]) / 2.0
    energy = (g * g).sum(axis=1)
    rows = np.arange(trials)[:, None]
    e = right[rows, w[None, :] - best[:, None]] - left[:, w]
    with np.errstate(divide="ignore", invalid="ignore"):
        delta = np.where(energy > 0, (g * e).sum(axis=1) / energy, np.nan)

    valid = (energy > 0) & np.isfinite(delta) & (np.abs(delta) <= 1.0)
    d_hat = best + delta
    return d_hat, valid


def estimate_disparity(
    left,
    right,
    window: CorrelationWindow,
    d_init: float,
) -> float:
    """Subpixel disparity of one rendered pair.

    Integer SSD search around round(d_init) followed by one Gauss-Newton
    step using the intensity-gradient linearization. Raises MatchError for a
    textureless window or a refinement step diverging beyond +-1 px.
    """
    left = np.asarray(left, dtype=float)
    center = window.resolve_center(left.size)
    d_hat, valid = _disparity_batch(left, right, center, window.half_width, d_init)
    if not valid[0]:
        raise MatchError("window is textureless or the refinement diverged")
    return float(d_hat[0])


def predicted_disparity_variance(sigma_sq: float, gradients) -> float:
    """Disparity-estimate variance: noise variance over window gradient energy."""
    g = np.asarray(gradients, dtype=float)
    energy = float((g * g).sum())
    if energy <= 0:
        raise DomainError("gradient energy must be > 0")
    if sigma_sq < 0:
        raise DomainError("noise variance must be >= 0")
    return float(sigma_sq) / energy


@dataclass(frozen=True)
class SimRun:
    """One scanline Monte Carlo batch at a single true range."""

    rig: StereoRig
    illum: IlluminationModel
    true_range: float
    trials: int
    seed: int
    noise: str = "poisson"
    center: int | None = None
    range_noise_floor_std: float = 0.0  # meters, added to triangulated ranges
    workers: int = 1

    def __post_init__(self):
        if self.trials < 1:
            raise DomainError("trials must be >= 1")
        if self.true_range <= 0:
            raise DomainError("true_range must be > 0")
        if self.range_noise_floor_std < 0:
            raise DomainError("range_noise_floor_std must be >= 0")


@dataclass
class RangeSamples:
    """Columnar range-measurement set; invalid entries are NaN in z."""

    z: np.ndarray
    nominal_range: np.ndarray
    pixel_index: np.ndarray
    frame_index: np.ndarray
    n_match_errors: int = 0

    def __post_init__(self):
        self.z = np.asarray(self.z, dtype=float)
        self.nominal_range = np.asarray(self.nominal_range, dtype=float)
        self.pixel_index = np.asarray(self.pixel_index, dtype=np.int64)
        self.frame_index = np.asarray(self.frame_index, dtype=np.int64)

    @property
    def valid(self) -> np.ndarray:
        return np.isfinite(self.z) & (self.z > 0)

    def __len__(self) -> int:
        return self.z.size

    @staticmethod
    def concatenate(parts: list["RangeSamples"]) -> "RangeSamples":
        return RangeSamples(
            np.concatenate([p.z for p in parts]),
            np.concatenate([p.nominal_range for p in parts]),
            np.concatenate([p.pixel_index for p in parts]),
            np.concatenate([p.frame_index for p in parts]),
            sum(p.n_match_errors for p in parts),
        )


def pipeline_layout(rig: StereoRig, max_range_disparity: float, window: CorrelationWindow):
    """Common (center, scanline length, pattern length) for a distance sweep.

    Keeping one center across distances means the same pattern patch stays in
    the window at every range, which is what a camera-mounted projector does.
    """
    d_max = int(np.ceil(max_range_disparity))
    center = window.center
    if center is None:
        center = window.half_width + d_max + _SEARCH_HALFWIDTH + 2
    length = center + window.half_width + 2
    pattern_length = length + d_max + 4
    return center, length, pattern_length


def run_pipeline(
    run: SimRun,
    pattern: ScanlinePattern,
    window: CorrelationWindow,
) -> RangeSamples:
    """Render, match, and triangulate `run.trials` independent stereo pairs.

    Match failures become NaN samples and are counted, never raised; the
    batch is chunked with per-chunk child seeds so any worker count gives
    bit-identical output.
    """
    d_true = range_to_disparity(run.true_range, run.rig)
    center, length, _ = pipeline_layout(run.rig, d_true, window)
    if length - 1 + d_true > len(pattern) - 1:
        raise GeometryError("pattern too short for this range's disparity shift")

    n_chunks = (run.trials + _CHUNK_TRIALS - 1) // _CHUNK_TRIALS
    seeds = np.random.SeedSequence(run.seed).spawn(n_chunks)

    def one_chunk(i: int):
        rng = np.random.Generator(np.random.PCG64(seeds[i]))
        t = min(_CHUNK_TRIALS, run.trials - i * _CHUNK_TRIALS)
        left, right = render_noisy_pair(
            pattern, run.illum, run.true_range, d_true, rng,
            length=length, trials=t, noise=run.noise, squeeze=False,
        )
        d_hat, valid = _disparity_batch(left, right, center, window.half_width, d_true)
        z = np.where(valid & (d_hat > 0), run.rig.fb / d_hat, np.nan)
        if run.range_noise_floor_std > 0:
            z = z + rng.normal(0.0, run.range_noise_floor_std, z.shape)
        return z

    if run.workers > 1 and n_chunks > 1:
        with ThreadPoolExecutor(max_workers=run.workers) as pool:
            chunks = list(pool.map(one_chunk, range(n_chunks)))
    else:
        chunks = [one_chunk(i) for i in range(n_chunks)]

    z = np.concatenate(chunks)
    n_bad = int(np.count_nonzero(~(np.isfinite(z) & (z > 0))))
    return RangeSamples(
        z=z,
        nominal_range=np.full(run.trials, run.true_range),
        pixel_index=np.full(run.trials, center, dtype=np.int64),
        frame_index=np.arange(run.trials, dtype=np.int64),
        n_match_errors=n_bad,
    )


def run_distance_sweep(
    rig: StereoRig,
    illum: IlluminationModel,
    distances,
    trials: int,
    seed: int,
    window: CorrelationWindow | None = None,
    pattern: ScanlinePattern | None = None,
    noise: str = "poisson",
    range_noise_floor_std: float = 0.0,
    workers: int = 1,
    pattern_contrast: float = 0.35,
    pattern_correlation_length: float = 3.0,
) -> RangeSamples:
    """Run the scanline pipeline over a grid of distances with shared layout.

    The pattern and the window center are shared by all distances, and each
    distance gets an independent child seed.
    """
    distances = np.asarray(distances, dtype=float)
    if distances.size == 0 or np.any(distances <= 0):
        raise DomainError("distances must be a nonempty positive grid")
    window = window or CorrelationWindow(half_width=10)
    d_max = float(range_to_disparity(distances.min(), rig))
    center, length, pattern_length = pipeline_layout(rig, d_max, window)
    if pattern is None:
        pattern_rng = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence([seed, 2]))
        )
        pattern = speckle_pattern(
            pattern_length,
            pattern_rng,
            correlation_length=pattern_correlation_length,
            contrast=pattern_contrast,
        )
    elif len(pattern) < pattern_length:
        raise GeometryError("supplied pattern too short for the closest distance")

    run_seeds = np.random.SeedSequence([seed, 1]).generate_state(distances.size)
    parts = []
    for i, z_true in enumerate(distances):
        run = SimRun(
            rig=rig,
            illum=illum,
            true_range=float(z_true),
            trials=trials,
            seed=int(run_seeds[i]),
            noise=noise,
            center=center,
            range_noise_floor_std=range_noise_floor_std,
            workers=workers,
        )
        parts.append(run_pipeline(run, pattern, window))
    return RangeSamples.concatenate(parts)


def sample_range_model(
    model: PowerLawModel,
    true_ranges,
    n_per_range: int,
    rng: np.random.Generator,
) -> RangeSamples:
    """Draw range measurements directly from the generative law N(Z, sigma(Z))."""
    true_ranges = np.asarray(true_ranges, dtype=float)
    if np.any(true_ranges <= 0):
        raise DomainError("ranges must be > 0")
    if n_per_range < 1:
        raise DomainError("n_per_range must be >= 1")
    nominal = np.repeat(true_ranges, n_per_range)
    z = rng.normal(nominal, model.sigma_at(nominal))
    return RangeSamples(
        z=z,
        nominal_range=nominal,
        pixel_index=np.zeros(nominal.size, dtype=np.int64),
        frame_index=np.tile(np.arange(n_per_range, dtype=np.int64), true_ranges.size),
    )
