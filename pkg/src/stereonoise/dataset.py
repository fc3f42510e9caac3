"""On-disk dataset format shared by recorded and simulated depth data.

A dataset is a directory with a plain-text manifest (INI key/value document)
plus one binary raster file per depth frame:

    magic "DPTHFRM1" | width u32 LE | height u32 LE | width*height u16 LE

Raw values are converted to meters on read using the manifest's depth unit
(or an explicit depth_scale in meters per raw unit); the sentinel raw value
(default 0, i.e. "unmatched") becomes NaN. Frames are loaded lazily so long
recordings can be streamed through per-pixel accumulators.
"""

from __future__ import annotations

import configparser
import enum
import hashlib
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FormatError, IoError, SerializationError
from .radiometry import IlluminationMode

FRAME_MAGIC = b"DPTHFRM1"
SCHEMA_VERSION = 1
MANIFEST_NAME = "manifest.ini"
_MAX_RAW = 0xFFFF


class ExperimentKind(enum.Enum):
    PERPENDICULAR = "perpendicular"
    TILTED = "tilted"
    SIMULATED = "simulated"


class DepthUnit(enum.Enum):
    MILLIMETERS = "millimeters"
    METERS = "meters"


_UNIT_SCALE = {DepthUnit.MILLIMETERS: 1e-3, DepthUnit.METERS: 1.0}


@dataclass(frozen=True)
class CaptureEntry:
    """One capture: frames recorded at a fixed camera pose."""

    frame_count: int
    frame_files: str  # printf-style pattern relative to the dataset root
    nominal_distance: float | None = None

    def frame_path(self, root: Path, index: int) -> Path:
        return root / (self.frame_files % index)


@dataclass(frozen=True)
class DatasetManifest:
    experiment_kind: ExperimentKind
    illumination: IlluminationMode
    captures: tuple[CaptureEntry, ...]
    width: int
    height: int
    depth_unit: DepthUnit = DepthUnit.MILLIMETERS
    depth_scale: float | None = None  # meters per raw unit, overrides depth_unit
    invalid_value: int = 0
    notes: str = ""
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        if self.schema_version != SCHEMA_VERSION:
            raise FormatError(f"unsupported schema_version {self.schema_version}")
        if not self.captures:
            raise FormatError("manifest declares no captures")
        for cap in self.captures:
            if cap.frame_count < 1:
                raise FormatError("each capture needs frame_count >= 1")
            if (
                self.experiment_kind is ExperimentKind.PERPENDICULAR
                and cap.nominal_distance is None
            ):
                raise FormatError("perpendicular captures must carry nominal_distance")
        if self.width < 1 or self.height < 1:
            raise FormatError("frame dimensions must be >= 1")
        if not 0 <= self.invalid_value <= _MAX_RAW:
            raise FormatError("invalid_value must fit in 16 bits")
        if self.depth_scale is not None and self.depth_scale <= 0:
            raise FormatError("depth_scale must be > 0")

    @property
    def meters_per_unit(self) -> float:
        if self.depth_scale is not None:
            return self.depth_scale
        return _UNIT_SCALE[self.depth_unit]


@dataclass(frozen=True)
class DepthFrame:
    """Raw raster exactly as stored on disk."""

    width: int
    height: int
    values: np.ndarray  # uint16, shape (height, width)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.uint16)
        if v.shape != (self.height, self.width):
            raise FormatError("values shape does not match declared dimensions")
        object.__setattr__(self, "values", v)


def write_frame(path: Path, raw: np.ndarray) -> None:
    raw = np.asarray(raw)
    if raw.ndim != 2:
        raise SerializationError("frame must be 2-D")
    if raw.dtype != np.uint16:
        if np.any(raw < 0) or np.any(raw > _MAX_RAW):
            raise SerializationError("raw depth values must fit in 16 bits")
        raw = raw.astype(np.uint16)
    h, w = raw.shape
    try:
        with open(path, "wb") as fh:
            fh.write(FRAME_MAGIC)
            fh.write(struct.pack("<II", w, h))
            fh.write(raw.astype("<u2").tobytes())
    except OSError as exc:
        raise IoError(f"cannot write frame {path}: {exc}") from exc


def read_frame(path: Path) -> DepthFrame:
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read frame {path}: {exc}") from exc
    if len(blob) < 16 or blob[:8] != FRAME_MAGIC:
        raise FormatError(f"{path}: not a depth frame (bad magic)")
    w, h = struct.unpack("<II", blob[8:16])
    expected = 16 + 2 * w * h
    if len(blob) != expected:
        raise FormatError(f"{path}: expected {expected} bytes, found {len(blob)}")
    values = np.frombuffer(blob, dtype="<u2", offset=16).reshape(h, w)
    return DepthFrame(width=w, height=h, values=values.copy())


def meters_to_raw(z_meters: np.ndarray, manifest: DatasetManifest) -> np.ndarray:
    """Quantize meter values to raw units; NaN/nonpositive become the sentinel."""
    z = np.asarray(z_meters, dtype=float)
    raw = np.where(np.isfinite(z) & (z > 0), np.round(z / manifest.meters_per_unit), 0)
    finite_bad = np.isfinite(z) & (z > 0) & ((raw < 0) | (raw > _MAX_RAW))
    if np.any(finite_bad):
        raise SerializationError(
            f"depth value exceeds the 16-bit raster range "
            f"(max {_MAX_RAW * manifest.meters_per_unit} m)"
        )
    raw = raw.astype(np.uint16)
    return np.where(np.isfinite(z) & (z > 0), raw, np.uint16(manifest.invalid_value))


def raw_to_meters(raw: np.ndarray, manifest: DatasetManifest) -> np.ndarray:
    """Convert a raw raster to meters with NaN at the invalid sentinel."""
    raw = np.asarray(raw)
    z = raw.astype(float) * manifest.meters_per_unit
    return np.where(raw == manifest.invalid_value, np.nan, z)


class Dataset:
    """A manifest plus lazy access to its frames, converted to meters."""

    def __init__(self, root: Path, manifest: DatasetManifest):
        self.root = Path(root)
        self.manifest = manifest

    def frame_paths(self, capture_index: int) -> list[Path]:
        cap = self.manifest.captures[capture_index]
        return [cap.frame_path(self.root, i) for i in range(cap.frame_count)]

    def frames(self, capture_index: int):
        """Yield this capture's frames as float meter arrays (NaN = invalid)."""
        for path in self.frame_paths(capture_index):
            frame = read_frame(path)
            if (frame.width, frame.height) != (self.manifest.width, self.manifest.height):
                raise FormatError(
                    f"{path}: frame is {frame.width}x{frame.height}, manifest says "
                    f"{self.manifest.width}x{self.manifest.height}"
                )
            yield raw_to_meters(frame.values, self.manifest)

    def iter_all_frames(self):
        """(capture_index, frame) over every declared frame."""
        for ci in range(len(self.manifest.captures)):
            for frame in self.frames(ci):
                yield ci, frame

    def content_hash(self) -> str:
        """SHA-256 over the manifest and every frame file, in declared order."""
        h = hashlib.sha256()
        h.update((self.root / MANIFEST_NAME).read_bytes())
        for ci in range(len(self.manifest.captures)):
            for path in self.frame_paths(ci):
                h.update(path.read_bytes())
        return h.hexdigest()


def _manifest_to_ini(manifest: DatasetManifest) -> configparser.ConfigParser:
    cp = configparser.ConfigParser(interpolation=None)
    cp["dataset"] = {
        "schema_version": str(manifest.schema_version),
        "experiment": manifest.experiment_kind.value,
        "illumination": manifest.illumination.value,
        "depth_unit": manifest.depth_unit.value,
        "invalid_value": str(manifest.invalid_value),
        "width": str(manifest.width),
        "height": str(manifest.height),
    }
    if manifest.depth_scale is not None:
        cp["dataset"]["depth_scale"] = repr(manifest.depth_scale)
    if manifest.notes:
        cp["dataset"]["notes"] = manifest.notes
    for i, cap in enumerate(manifest.captures):
        section = f"capture {i}"
        cp[section] = {
            "frame_count": str(cap.frame_count),
            "frame_files": cap.frame_files,
        }
        if cap.nominal_distance is not None:
            cp[section]["nominal_distance"] = repr(cap.nominal_distance)
    return cp


def _manifest_from_ini(cp: configparser.ConfigParser) -> DatasetManifest:
    if "dataset" not in cp:
        raise FormatError("manifest is missing the [dataset] section")
    ds = cp["dataset"]
    try:
        captures = []
        for section in cp.sections():
            if not section.startswith("capture"):
                continue
            sec = cp[section]
            captures.append(
                CaptureEntry(
                    frame_count=sec.getint("frame_count"),
                    frame_files=sec["frame_files"],
                    nominal_distance=(
                        float(sec["nominal_distance"])
                        if "nominal_distance" in sec
                        else None
                    ),
                )
            )
        return DatasetManifest(
            experiment_kind=ExperimentKind(ds["experiment"]),
            illumination=IlluminationMode(ds["illumination"]),
            captures=tuple(captures),
            width=ds.getint("width"),
            height=ds.getint("height"),
            depth_unit=DepthUnit(ds.get("depth_unit", "millimeters")),
            depth_scale=(
                float(ds["depth_scale"]) if "depth_scale" in ds else None
            ),
            invalid_value=ds.getint("invalid_value", 0),
            notes=ds.get("notes", ""),
            schema_version=ds.getint("schema_version", -1),
        )
    except (KeyError, ValueError) as exc:
        raise FormatError(f"malformed manifest: {exc}") from exc


def write_dataset(root: Path, manifest: DatasetManifest, frames_per_capture) -> Path:
    """Write a manifest and its frames (meter-float arrays) under root.

    frames_per_capture is a sequence parallel to manifest.captures; each
    element is an iterable of (height, width) arrays in meters.
    """
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    for cap, frames in zip(manifest.captures, frames_per_capture):
        written = 0
        for i, frame in enumerate(frames):
            frame = np.asarray(frame, dtype=float)
            if frame.shape != (manifest.height, manifest.width):
                raise FormatError(
                    f"frame shape {frame.shape} inconsistent with manifest "
                    f"({manifest.height}, {manifest.width})"
                )
            path = cap.frame_path(root, i)
            path.parent.mkdir(parents=True, exist_ok=True)
            write_frame(path, meters_to_raw(frame, manifest))
            written += 1
        if written != cap.frame_count:
            raise FormatError(
                f"capture declares {cap.frame_count} frames, got {written}"
            )
    manifest_path = root / MANIFEST_NAME
    with open(manifest_path, "w", encoding="utf-8") as fh:
        _manifest_to_ini(manifest).write(fh)
    return manifest_path


def read_dataset(manifest_path: Path) -> Dataset:
    """Parse and validate a manifest; frames stay on disk until iterated."""
    manifest_path = Path(manifest_path)
    if manifest_path.is_dir():
        manifest_path = manifest_path / MANIFEST_NAME
    if not manifest_path.exists():
        raise IoError(f"manifest not found: {manifest_path}")
    cp = configparser.ConfigParser(interpolation=None)
    try:
        with open(manifest_path, encoding="utf-8") as fh:
            cp.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise FormatError(f"cannot parse manifest: {exc}") from exc
    manifest = _manifest_from_ini(cp)
    ds = Dataset(manifest_path.parent, manifest)
    for ci in range(len(manifest.captures)):
        for path in ds.frame_paths(ci):
            if not path.exists():
                raise IoError(f"frame file missing: {path}")
    return ds
