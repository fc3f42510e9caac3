"""Range-error modeling and calibration for passive and active stereo depth sensors.

Shot-noise radiometry makes the range error of a shot-noise-limited stereo
pair grow quadratically with range when the scene is externally lit and
cubically when the illuminator rides with the cameras; this package simulates
both regimes and fits the two-parameter law sigma_Z = k * Z**lambda to
measured or simulated depth data by joint maximum likelihood.
"""

from ._version import __version__
from .errors import (
    ApproximationDomainError,
    ConfigError,
    DegenerateDataError,
    DomainError,
    FormatError,
    GeometryError,
    IoError,
    MatchError,
    NoRootError,
    SaddleError,
    SerializationError,
    StereoNoiseError,
)
from .model import (
    BaselineKind,
    BaselineModel,
    KHOSHELHAM_KINECT1,
    NGUYEN_KINECT1,
    PowerLawModel,
    StereoRig,
    disparity_to_range,
    range_to_disparity,
)
from .radiometry import (
    IlluminationMode,
    IlluminationModel,
    NoiseApproximation,
    ShotNoiseSpec,
    flux_ratio,
    intensity_at_range,
    pixel_noise_variance,
    sample_shot_noise,
)
from .simulate import (
    CorrelationWindow,
    PatternKind,
    RangeSamples,
    ScanlinePattern,
    SimRun,
    estimate_disparity,
    predicted_disparity_variance,
    render_noisy_pair,
    run_distance_sweep,
    run_pipeline,
    sample_range_model,
    smooth_pattern,
    speckle_pattern,
)
from .estimator import (
    FitInput,
    PowerLawFit,
    exponent_score,
    fit_power_law,
    hessian_at,
    log_likelihood,
    scale_for_exponent,
)
from .stats import (
    BinStats,
    PixelSeries,
    balanced_sample,
    bin_by_range,
    flat_sample,
    normalized_kurtosis,
    pairs_from_samples,
    pixelwise_means,
)
from .dataset import (
    CaptureEntry,
    Dataset,
    DatasetManifest,
    DepthFrame,
    DepthUnit,
    ExperimentKind,
    read_dataset,
    read_frame,
    write_dataset,
    write_frame,
)
