"""Command-line surface: simulate, fit, stats, baselines, report.

Commands log to stderr; stdout carries machine-readable CSV when no output
directory is given. Identical inputs, config, and seed produce byte-identical
artifacts. Exit codes: 0 success, 2 configuration errors, 3 dataset/format
errors, 4 estimation/matching failures.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from ._version import __version__
from . import config as cfg
from . import report as rpt
from .dataset import (
    CaptureEntry,
    Dataset,
    DatasetManifest,
    DepthUnit,
    ExperimentKind,
    read_dataset,
    write_dataset,
)
from .errors import (
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
from .estimator import FitInput, fit_power_law
from .model import (
    KHOSHELHAM_KINECT1,
    NGUYEN_KINECT1,
    PowerLawModel,
    StereoRig,
)
from .radiometry import IlluminationMode, IlluminationModel
from .simulate import RangeSamples, run_distance_sweep, sample_range_model
from .stats import (
    balanced_sample,
    bin_by_range,
    flat_sample,
    group_pairs_by_distance,
    group_pairs_by_mean_bin,
    pixelwise_means,
)

log = logging.getLogger("stereonoise")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_ESTIMATOR = 4

# Simulated rasters use 0.1 mm units: millimeter quantization alone would
# perturb the recovered exponent by more than the round-trip tolerance.
SIM_DEPTH_SCALE = 1e-4


# --------------------------------------------------------------------------
# argument parsing


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="INI config file ([stereonoise] section)")
    p.add_argument("--seed", type=int, help="master random seed (default 0)")
    p.add_argument("--workers", type=int, help="parallel worker cap "
                   f"(default ${cfg.WORKERS_ENV_VAR} or 1)")
    p.add_argument("--verbose", action="store_true", help="chatty logging to stderr")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stereonoise",
        description="Simulate, fit, and report stereo range-error models.",
    )
    parser.add_argument("--version", action="version", version=f"stereonoise {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write a simulated dataset to disk")
    _add_common(p)
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--mode", choices=("generative", "pipeline"), default="generative")
    p.add_argument("--illumination", choices=("passive", "active"))
    p.add_argument("--k", dest="scale", type=float,
                   help="generative mode: true sigma scale [m^(1-lambda)]")
    p.add_argument("--lambda", dest="exponent", type=float,
                   help="generative mode: true sigma exponent")
    p.add_argument("--distances", help="capture grid lo:hi:step in meters "
                   "(default 0.5:3.0:0.25)")
    p.add_argument("--pixels", type=int, help="pixels per scanline frame (default 200)")
    p.add_argument("--frames", type=int, help="frames per capture (default 300)")
    p.add_argument("--focal-length", type=float, help="pipeline: focal length [px]")
    p.add_argument("--baseline", type=float, help="pipeline: baseline [m]")
    p.add_argument("--control-range", type=float, help="pipeline: control range [m]")
    p.add_argument("--intensity", type=float,
                   help="pipeline: pixel intensity at the control range")
    p.add_argument("--noise-floor-std", type=float,
                   help="pipeline: range-independent extra range noise [m] (default 0)")
    p.add_argument("--pattern", choices=("speckle", "smooth"), help="pipeline texture")
    p.add_argument("--window-half-width", type=int, help="matcher window half width")

    p = sub.add_parser("fit", help="fit the power-law model to a dataset")
    _add_common(p)
    _add_fit_options(p)
    p.add_argument("--windows",
                   help='"standard" for the six reporting windows, or '
                        'comma-separated lo:hi spans (default: --window)')
    p.add_argument("--window", help="single data-range window lo:hi in meters "
                   "(default 0.75:3.00)")
    p.add_argument("--out", help="write fit.csv and fit.json here (default: CSV to stdout)")

    p = sub.add_parser("stats", help="range-window statistics and plots")
    _add_common(p)
    _add_fit_options(p)
    p.add_argument("--bin-width", type=float, help="range window width [m] (default 0.25)")
    p.add_argument("--out", required=True, help="output directory for CSV and SVG")

    p = sub.add_parser("baselines", help="emit published comparison curves")
    _add_common(p)
    p.add_argument("--z-max", type=float, help="grid upper end [m] (default 4.0)")
    p.add_argument("--z-step", type=float, help="grid step [m] (default 0.05)")
    p.add_argument("--k", dest="scale", type=float, help="optional fitted scale to compare")
    p.add_argument("--lambda", dest="exponent", type=float,
                   help="optional fitted exponent to compare")
    p.add_argument("--out", help="write baselines.csv here (default: stdout)")

    p = sub.add_parser("report", help="fit + stats + baselines into one directory")
    _add_common(p)
    _add_fit_options(p)
    p.add_argument("--bin-width", type=float, help="range window width [m] (default 0.25)")
    p.add_argument("--out", required=True, help="output directory")

    return parser


def _add_fit_options(p: argparse.ArgumentParser):
    p.add_argument("--dataset", required=True, help="dataset directory or manifest path")
    p.add_argument("--per-group", type=int,
                   help="pairs sampled per distance group; 0 keeps everything "
                        "(default 200)")
    p.add_argument("--flat-total", type=int,
                   help="tilted experiments: total pairs sampled (default 5000)")
    p.add_argument("--group-by", choices=("distance", "mean-bin"),
                   help="balanced-sampling grouping (default distance)")
    p.add_argument("--bracket", help="exponent search bracket lo:hi (default 0:5)")
    p.add_argument("--tol", type=float, help="root-finder tolerance (default 1e-10)")


# --------------------------------------------------------------------------
# shared pipeline pieces


def _resolved(args, key, cast=None):
    file_cfg = getattr(args, "_file_cfg", {})
    return cfg.resolve(getattr(args, key, None), file_cfg, key, cast)


def _dataset_pairs(ds: Dataset):
    """Stream every capture into (z, zbar, nominal_distance) pair arrays."""
    zs, zbars, nominals = [], [], []
    for ci, cap in enumerate(ds.manifest.captures):
        means, counts = pixelwise_means(ds.frames(ci))
        usable = counts > 0
        for frame in ds.frames(ci):
            ok = np.isfinite(frame) & (frame > 0) & usable
            if not ok.any():
                continue
            zs.append(frame[ok])
            zbars.append(means[ok])
            nominal = cap.nominal_distance
            nominals.append(np.full(int(ok.sum()), np.nan if nominal is None else nominal))
        log.info("capture %d: %d valid pixels", ci, int(usable.sum()))
    if not zs:
        raise FormatError("dataset contains no valid measurements")
    return np.concatenate(zs), np.concatenate(zbars), np.concatenate(nominals)


def _sampled_fit_input(ds: Dataset, args) -> FitInput:
    z, zbar, nominal = _dataset_pairs(ds)
    seed = _resolved(args, "seed", int)
    if ds.manifest.experiment_kind is ExperimentKind.TILTED:
        total = _resolved(args, "flat_total", int)
        data = flat_sample(z, zbar, total, seed)
        log.info("tilted protocol: sampled %d of %d pairs", len(data), z.size)
        return data
    per_group = _resolved(args, "per_group", int)
    if per_group == 0:
        log.info("using all %d pairs (no subsampling)", z.size)
        return FitInput(z, zbar)
    group_by = _resolved(args, "group_by")
    if group_by == "mean-bin":
        groups = group_pairs_by_mean_bin(z, zbar, _resolved(args, "bin_width", float))
    else:
        if np.all(np.isnan(nominal)):
            raise FormatError(
                "captures carry no nominal distances; use --group-by mean-bin"
            )
        groups = group_pairs_by_distance(z, zbar, nominal)
    data, short = balanced_sample(groups, per_group, seed)
    if short:
        log.warning("%d group(s) had fewer than %d pairs", short, per_group)
    log.info("balanced sampling: %d pairs from %d groups", len(data), len(groups))
    return data


def _fit_windows(data: FitInput, windows, bracket, tol):
    fits = []
    for lo, hi in windows:
        fits.append(fit_power_law(data, bracket=bracket, tol=tol, data_range=(lo, hi)))
        log.info("window %.2f-%.2f m: k=%.6g lambda=%.4f",
                 lo, hi, fits[-1].scale, fits[-1].exponent)
    return fits


# --------------------------------------------------------------------------
# commands


def cmd_simulate(args) -> int:
    out = Path(args.out)
    seed = _resolved(args, "seed", int)
    mode = args.mode
    illum_name = _resolved(args, "illumination") or "active"
    illumination = IlluminationMode(illum_name)
    lo, hi, step = (
        cfg.parse_grid(_resolved(args, "distances"))
        if isinstance(_resolved(args, "distances"), str)
        else _resolved(args, "distances")
    )
    distances = np.round(np.arange(lo, hi + 0.5 * step, step), 9)
    pixels = _resolved(args, "pixels", int)
    frames = _resolved(args, "frames", int)
    noise_floor = _resolved(args, "noise_floor_std", float)

    provenance = {
        "tool_version": __version__,
        "mode": mode,
        "illumination": illumination.value,
        "seed": str(seed),
        "distances": ",".join(repr(d) for d in distances),
        "pixels": str(pixels),
        "frames": str(frames),
    }

    if mode == "generative":
        if args.scale is None or args.exponent is None:
            raise ConfigError("generative mode requires --k and --lambda")
        if noise_floor:
            raise ConfigError("--noise-floor-std applies to pipeline mode only")
        model = PowerLawModel(scale=args.scale, exponent=args.exponent)
        per_capture = []
        seeds = np.random.SeedSequence(seed).spawn(distances.size)
        for i, d in enumerate(distances):
            rng = np.random.Generator(np.random.PCG64(seeds[i]))
            samples = sample_range_model(model, [d], pixels * frames, rng)
            per_capture.append(samples.z.reshape(frames, 1, pixels))
        provenance["k"] = repr(model.scale)
        provenance["lambda"] = repr(model.exponent)
    else:
        if args.scale is not None or args.exponent is not None:
            raise ConfigError("--k/--lambda are generative-mode options")
        rig = StereoRig(
            focal_length=_resolved(args, "focal_length", float),
            baseline=_resolved(args, "baseline", float),
            control_range=_resolved(args, "control_range", float),
        )
        illum = IlluminationModel(
            mode=illumination,
            intensity_at_control=_resolved(args, "intensity", float),
            control_range=rig.control_range,
        )
        samples = run_distance_sweep(
            rig,
            illum,
            distances,
            trials=pixels * frames,
            seed=seed,
            workers=_resolved(args, "workers", int) or cfg.default_workers(),
            range_noise_floor_std=noise_floor,
        )
        if samples.n_match_errors:
            log.warning("%d of %d trials failed to match",
                        samples.n_match_errors, len(samples))
        per_capture = [
            samples.z[samples.nominal_range == d].reshape(frames, 1, pixels)
            for d in distances
        ]
        provenance.update({
            "focal_length": repr(rig.focal_length),
            "baseline": repr(rig.baseline),
            "control_range": repr(rig.control_range),
            "intensity": repr(illum.intensity_at_control),
            "noise_floor_std": repr(noise_floor),
            "match_errors": str(samples.n_match_errors),
        })

    captures = tuple(
        CaptureEntry(
            frame_count=frames,
            frame_files=f"captures/c{i:02d}/frame_%04d.dfr",
            nominal_distance=float(d),
        )
        for i, d in enumerate(distances)
    )
    manifest = DatasetManifest(
        experiment_kind=ExperimentKind.SIMULATED,
        illumination=illumination,
        captures=captures,
        width=pixels,
        height=1,
        depth_unit=DepthUnit.MILLIMETERS,
        depth_scale=SIM_DEPTH_SCALE,
        notes=f"simulated ({mode})",
    )
    write_dataset(out, manifest, per_capture)
    prov_lines = ["[provenance]"] + [f"{k} = {v}" for k, v in provenance.items()]
    rpt.write_text(out / "provenance.ini", "\n".join(prov_lines) + "\n")
    log.info("wrote %d captures x %d frames to %s", len(captures), frames, out)
    return EXIT_OK


def cmd_fit(args) -> int:
    ds = read_dataset(Path(args.dataset))
    data = _sampled_fit_input(ds, args)
    if args.windows:
        windows = cfg.parse_windows(args.windows)
    else:
        windows = [cfg.parse_span(args.window) if args.window else cfg.DEFAULTS["window"]]
    bracket = cfg.parse_span(args.bracket) if args.bracket else cfg.DEFAULTS["bracket"]
    tol = _resolved(args, "tol", float)
    fits = _fit_windows(data, windows, bracket, tol)
    csv_text = rpt.fit_csv(fits)
    if args.out:
        out = Path(args.out)
        rpt.write_text(out / "fit.csv", csv_text)
        rpt.write_text(
            out / "fit.json",
            rpt.fit_record(fits, dataset_hash=ds.content_hash(),
                           config=_public_config(args)),
        )
        log.info("wrote %s and fit.json", out / "fit.csv")
    else:
        sys.stdout.write(csv_text)
    return EXIT_OK


def cmd_stats(args) -> int:
    ds = read_dataset(Path(args.dataset))
    z, zbar, _ = _dataset_pairs(ds)
    data = _sampled_fit_input(ds, args)
    bracket = cfg.parse_span(args.bracket) if args.bracket else cfg.DEFAULTS["bracket"]
    tol = _resolved(args, "tol", float)
    fit = fit_power_law(data, bracket=bracket, tol=tol)
    model = PowerLawModel(scale=fit.scale, exponent=fit.exponent)
    width = _resolved(args, "bin_width", float)
    bins = bin_by_range(z, zbar, width, model)

    out = Path(args.out)
    rpt.write_text(out / "bins.csv", rpt.bin_csv(bins))
    rpt.write_text(
        out / "fit.json",
        rpt.fit_record([fit], dataset_hash=ds.content_hash(),
                       config=_public_config(args)),
    )

    rng = np.random.default_rng(_resolved(args, "seed", int))
    n_show = min(z.size, 2200)
    idx = np.sort(rng.choice(z.size, size=n_show, replace=False))
    grid = np.linspace(max(zbar.min(), 1e-6), zbar.max(), 200)
    rpt.write_text(
        out / "sigma_vs_range.svg",
        rpt.svg_plot(
            [
                rpt.Series(zbar[idx], np.abs(z - zbar)[idx], "samples |z - mean|",
                           kind="points", color="#bbbbbb"),
                rpt.Series(grid, model.sigma_at(grid),
                           f"fit: {fit.scale:.4g} * Z^{fit.exponent:.3f}"),
            ],
            "Range error vs range", "Z [m]", "sigma_Z [m]",
        ),
    )
    centers = np.array([b.center for b in bins])
    kurt = np.array([b.kurtosis for b in bins])
    counts = np.array([b.count for b in bins], dtype=float)
    rpt.write_text(
        out / "kurtosis.svg",
        rpt.svg_plot(
            [rpt.Series(centers, kurt, "kurtosis", kind="points"),
             rpt.Series(np.array([centers.min(), centers.max()]),
                        np.array([3.0, 3.0]), "normal (3)", color="#999999")],
            f"Residual kurtosis per {width:g} m window", "Z [m]",
            "E[(z - mean)^4 / sigma^4]",
        ),
    )
    rpt.write_text(
        out / "counts.svg",
        rpt.svg_plot(
            [rpt.Series(centers, counts, "samples", kind="points")],
            f"Samples per {width:g} m window", "Z [m]", "count",
        ),
    )
    log.info("wrote bins.csv, fit.json, and 3 SVG plots to %s", out)
    return EXIT_OK


def cmd_baselines(args) -> int:
    z_max = _resolved(args, "z_max", float)
    z_step = _resolved(args, "z_step", float)
    if z_max <= 0 or z_step <= 0:
        raise ConfigError("--z-max and --z-step must be > 0")
    z = np.round(np.arange(0.0, z_max + 0.5 * z_step, z_step), 9)
    columns = {
        "sigma_khoshelham": KHOSHELHAM_KINECT1.sigma_at(z),
        "sigma_nguyen": NGUYEN_KINECT1.sigma_at(z),
    }
    if (args.scale is None) != (args.exponent is None):
        raise ConfigError("--k and --lambda must be given together")
    if args.scale is not None:
        model = PowerLawModel(scale=args.scale, exponent=args.exponent)
        with np.errstate(divide="ignore"):
            columns["sigma_fit"] = np.where(z > 0, model.sigma_at(np.maximum(z, 1e-300)), 0.0)
    csv_text = rpt.curve_csv(z, columns)
    if args.out:
        out = Path(args.out)
        target = out / "baselines.csv" if not out.suffix else out
        rpt.write_text(target, csv_text)
        log.info("wrote %s", target)
    else:
        sys.stdout.write(csv_text)
    return EXIT_OK


def cmd_report(args) -> int:
    out = Path(args.out)
    args.windows = "standard"
    args.window = None
    args.out = str(out)
    code = cmd_fit(args)
    if code:
        return code
    args.out = str(out)
    code = cmd_stats(args)
    if code:
        return code
    fits_ns = argparse.Namespace(
        z_max=None, z_step=None, scale=None, exponent=None,
        out=str(out / "baselines.csv"), _file_cfg=getattr(args, "_file_cfg", {}),
    )
    return cmd_baselines(fits_ns)


def _public_config(args) -> dict:
    skip = {"_file_cfg", "command", "verbose", "func"}
    return {
        k: v for k, v in sorted(vars(args).items())
        if k not in skip and v is not None and not k.startswith("_")
    }


# --------------------------------------------------------------------------


_DISPATCH = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "stats": cmd_stats,
    "baselines": cmd_baselines,
    "report": cmd_report,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
        format="%(levelname)s %(message)s",
    )
    try:
        args._file_cfg = cfg.load_config_file(args.config) if getattr(args, "config", None) else {}
        return _DISPATCH[args.command](args)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except (FormatError, IoError, SerializationError) as exc:
        log.error("dataset error: %s", exc)
        return EXIT_DATA
    except (DegenerateDataError, NoRootError, SaddleError, DomainError,
            MatchError, GeometryError) as exc:
        log.error("estimation error: %s", exc)
        return EXIT_ESTIMATOR
    except StereoNoiseError as exc:
        log.error("%s", exc)
        return EXIT_ESTIMATOR


if __name__ == "__main__":
    sys.exit(main())
