"""Scan datasets: tracked transverse frames, their masks and probe poses.

On-disk layout (all paths in the manifest are relative to the manifest)::

    manifest.json   {"version": 1, "subject_id": ..., "posture": "neutral",
                     "pixel_spacing_mm": [w, h], "frame_size": [W, H],
                     "pose_file": "poses.csv",
                     "frames": [{"index": 0, "intensity_file": ...,
                                 "mask_file": ...}, ...]}
    poses.csv       index,x_mm,y_mm,z_mm,qw,qx,qy,qz
    *.pgm / *.png   8-bit single-channel rasters, one per frame and channel

``frame_size`` is optional; without it every frame must be 640x480.

Probe coordinates of pixel (row j, column i) are ``(i * sx, j * sy, 0)``: the
image width runs along probe x (lateral), the image height along probe y
(depth). A pose maps probe coordinates to world millimetres as
``world = R(q) @ p + t``.
"""

from __future__ import annotations

import csv
import enum
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from laminacurve.errors import DatasetError

log = logging.getLogger(__name__)

MANIFEST_VERSION = 1
DEFAULT_FRAME_SIZE = (640, 480)
FRAME_COUNT_RANGE = (300, 600)
POSE_JUMP_MM = 20.0
POSE_COLUMNS = ("index", "x_mm", "y_mm", "z_mm", "qw", "qx", "qy", "qz")


class Posture(str, enum.Enum):
    NEUTRAL = "neutral"
    FLEXION = "flexion"


def quat_to_matrix(q):
    """Rotation matrix of a unit quaternion given as (w, x, y, z)."""
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def quat_from_axis_angle(axis, angle_rad):
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    s = math.sin(angle_rad / 2.0)
    return (math.cos(angle_rad / 2.0), axis[0] * s, axis[1] * s, axis[2] * s)


def normalize_quat(q):
    # Leave already-unit quaternions untouched so that load/save is a fixed point.
    q = tuple(float(v) for v in q)
    norm = math.sqrt(sum(v * v for v in q))
    if norm == 0.0 or not math.isfinite(norm):
        raise ValueError("quaternion has zero or non-finite norm")
    if abs(norm - 1.0) <= 1e-12:
        return q
    return tuple(v / norm for v in q)


@dataclass(frozen=True)
class Pose:
    position: tuple[float, float, float]
    orientation: tuple[float, float, float, float] = (1.0, 0.0, 0.0, 0.0)

    def __post_init__(self):
        pos = tuple(float(v) for v in self.position)
        if len(pos) != 3 or not all(math.isfinite(v) for v in pos):
            raise ValueError(f"position must be 3 finite values, got {self.position!r}")
        if len(self.orientation) != 4:
            raise ValueError("orientation must be a (w, x, y, z) quaternion")
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "orientation", normalize_quat(self.orientation))

    @property
    def rotation(self):
        return quat_to_matrix(self.orientation)

    def apply(self, points):
        """Map an (n, 3) array of probe-space points to world space."""
        return np.asarray(points, dtype=float) @ self.rotation.T + np.asarray(self.position)


@dataclass(frozen=True, eq=False)
class TrackedFrame:
    """One transverse image. ``intensity`` and ``mask`` are (H, W) arrays."""

    index: int
    intensity: np.ndarray
    mask: np.ndarray
    pose: Pose
    pixel_spacing: tuple[float, float]

    def __post_init__(self):
        if self.index < 0:
            raise DatasetError("negative frame index", frame=self.index)
        if self.intensity.shape != self.mask.shape:
            raise DatasetError(
                f"dimension mismatch: intensity {_wh(self.intensity)} vs mask {_wh(self.mask)}",
                frame=self.index,
            )
        if self.intensity.ndim != 2:
            raise DatasetError("rasters must be single-channel 2D", frame=self.index)
        if not np.isin(self.mask, (0, 1)).all():
            raise DatasetError("mask is not binary", frame=self.index)
        sx, sy = self.pixel_spacing
        if not (sx > 0 and sy > 0):
            raise DatasetError(f"pixel spacing must be positive, got {self.pixel_spacing}")

    @property
    def size(self):
        """(W, H) in pixels."""
        return self.intensity.shape[1], self.intensity.shape[0]

    def probe_coords(self, rows, cols):
        sx, sy = self.pixel_spacing
        rows = np.asarray(rows, dtype=float)
        cols = np.asarray(cols, dtype=float)
        return np.stack([cols * sx, rows * sy, np.zeros_like(rows)], axis=-1)

    def world_coords(self, rows, cols):
        """World (x, y, z) millimetres of the given pixel centres."""
        return self.pose.apply(self.probe_coords(rows, cols))

    def corner_points(self):
        w, h = self.size
        rows = np.array([0, 0, h - 1, h - 1])
        cols = np.array([0, w - 1, 0, w - 1])
        return self.world_coords(rows, cols)


@dataclass(frozen=True, eq=False)
class ScanDataset:
    frames: list[TrackedFrame]
    subject_id: str
    posture: Posture = Posture.NEUTRAL
    frame_size: tuple[int, int] | None = None

    def __post_init__(self):
        object.__setattr__(self, "posture", Posture(self.posture))
        indices = [f.index for f in self.frames]
        if any(b <= a for a, b in zip(indices, indices[1:])):
            raise DatasetError(f"frame indices must be strictly increasing, got {indices[:10]}...")

    def __len__(self):
        return len(self.frames)

    @property
    def pixel_spacing(self):
        return self.frames[0].pixel_spacing if self.frames else None


def _wh(arr):
    return f"{arr.shape[1]}x{arr.shape[0]}" if arr.ndim == 2 else str(arr.shape)


def read_raster(path):
    """Read an 8-bit single-channel raster into an (H, W) uint8 array."""
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"missing raster file {path}")
    with Image.open(path) as img:
        if img.mode == "1":
            img = img.convert("L")
        if img.mode != "L":
            raise DatasetError(f"{path} is not 8-bit single-channel (mode {img.mode})")
        return np.array(img, dtype=np.uint8)


def read_mask(path, frame=None):
    """Read a binary mask stored as {0, 1} or {0, 255}; returns {0, 1} uint8."""
    arr = read_raster(path)
    values = np.unique(arr)
    if np.isin(values, (0, 1)).all():
        return arr
    if np.isin(values, (0, 255)).all():
        return (arr // 255).astype(np.uint8)
    raise DatasetError(f"mask {Path(path).name} is not binary (values {values[:6].tolist()})", frame=frame)


def write_raster(path, arr):
    arr = np.asarray(arr)
    if arr.dtype != np.uint8 or arr.ndim != 2:
        raise ValueError("expected a 2D uint8 array")
    fmt = "PPM" if Path(path).suffix.lower() == ".pgm" else None
    Image.fromarray(arr).save(path, format=fmt)


def _read_poses(path):
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"missing pose file {path}")
    poses = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != POSE_COLUMNS:
            raise DatasetError(f"pose file header must be {','.join(POSE_COLUMNS)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            frame = row[0] if row else None
            if len(row) != len(POSE_COLUMNS):
                raise DatasetError(f"malformed pose row at line {lineno}", frame=frame)
            try:
                index = int(row[0])
                vals = [float(v) for v in row[1:]]
                pose = Pose(tuple(vals[:3]), tuple(vals[3:]))
            except ValueError as exc:
                raise DatasetError(f"malformed pose row at line {lineno}: {exc}", frame=frame) from None
            if index in poses:
                raise DatasetError("duplicate pose row", frame=index)
            poses[index] = pose
    return poses


def _write_poses(path, frames):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(POSE_COLUMNS)
        for f in frames:
            writer.writerow(
                [f.index, *(repr(v) for v in f.pose.position), *(repr(v) for v in f.pose.orientation)]
            )


def load_dataset(manifest_path):
    """Load and validate a dataset from its JSON manifest.

    Frames come back sorted by index regardless of manifest order. Frame
    count outside 300-600 is logged as a warning, not raised.
    """
    manifest_path = Path(manifest_path)
    if manifest_path.is_dir():
        manifest_path = manifest_path / "manifest.json"
    if not manifest_path.is_file():
        raise DatasetError(f"missing manifest {manifest_path}")
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DatasetError(f"manifest is not valid JSON: {exc}") from None
    root = manifest_path.parent

    for key in ("subject_id", "posture", "pixel_spacing_mm", "frames", "pose_file"):
        if key not in manifest:
            raise DatasetError(f"manifest lacks required field {key!r}")
    try:
        spacing = tuple(float(v) for v in manifest["pixel_spacing_mm"])
        posture = Posture(manifest["posture"])
    except (TypeError, ValueError) as exc:
        raise DatasetError(f"bad manifest field: {exc}") from None
    if len(spacing) != 2 or not all(s > 0 for s in spacing):
        raise DatasetError(f"pixel_spacing_mm must be two positive values, got {manifest['pixel_spacing_mm']}")
    declared = manifest.get("frame_size")
    frame_size = tuple(int(v) for v in declared) if declared else None
    expected = frame_size or DEFAULT_FRAME_SIZE

    entries = sorted(manifest["frames"], key=lambda e: int(e["index"]))
    poses = _read_poses(root / manifest["pose_file"])
    frames = []
    seen = set()
    for entry in entries:
        index = int(entry["index"])
        if index in seen:
            raise DatasetError("duplicate frame index in manifest", frame=index)
        seen.add(index)
        intensity = read_raster(root / entry["intensity_file"])
        mask = read_mask(root / entry["mask_file"], frame=index)
        if intensity.shape != mask.shape:
            raise DatasetError(
                f"dimension mismatch: intensity {_wh(intensity)} vs mask {_wh(mask)}", frame=index
            )
        if (intensity.shape[1], intensity.shape[0]) != expected:
            raise DatasetError(
                f"frame size {_wh(intensity)} differs from expected {expected[0]}x{expected[1]}",
                frame=index,
            )
        if index not in poses:
            raise DatasetError("no pose row for frame", frame=index)
        frames.append(TrackedFrame(index, intensity, mask, poses[index], spacing))

    ds = ScanDataset(frames, str(manifest["subject_id"]), posture, frame_size)
    if not frames:
        raise DatasetError("dataset has no frames")
    lo, hi = FRAME_COUNT_RANGE
    if not lo <= len(frames) <= hi:
        log.warning("%s: %d frames, outside the usual %d-%d range", ds.subject_id, len(frames), lo, hi)
    return ds


def save_dataset(ds, directory, raster_ext=".pgm"):
    """Write ``ds`` in the manifest layout; returns the manifest path."""
    directory = Path(directory)
    (directory / "frames").mkdir(parents=True, exist_ok=True)
    (directory / "masks").mkdir(parents=True, exist_ok=True)
    entries = []
    for f in ds.frames:
        ifile = f"frames/intensity_{f.index:04d}{raster_ext}"
        mfile = f"masks/mask_{f.index:04d}{raster_ext}"
        write_raster(directory / ifile, f.intensity.astype(np.uint8))
        write_raster(directory / mfile, f.mask.astype(np.uint8))
        entries.append({"index": f.index, "intensity_file": ifile, "mask_file": mfile})
    _write_poses(directory / "poses.csv", ds.frames)
    manifest = {
        "version": MANIFEST_VERSION,
        "subject_id": ds.subject_id,
        "posture": ds.posture.value,
        "pixel_spacing_mm": list(ds.pixel_spacing) if ds.frames else None,
        "pose_file": "poses.csv",
        "frames": entries,
    }
    if ds.frame_size is not None:
        manifest["frame_size"] = list(ds.frame_size)
    path = directory / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return path


def validate_dataset(ds):
    """Return human-readable warnings about a loaded dataset."""
    warnings = []
    lo, hi = FRAME_COUNT_RANGE
    n = len(ds.frames)
    if not lo <= n <= hi:
        warnings.append(f"frame count {n} outside the expected {lo}-{hi} range")
    prev = None
    for f in ds.frames:
        pos = np.asarray(f.pose.position)
        if prev is not None:
            jump = float(np.linalg.norm(pos - prev[1]))
            if jump > POSE_JUMP_MM:
                warnings.append(f"pose jump of {jump:.1f} mm between frames {prev[0]} and {f.index}")
        prev = (f.index, pos)
        if not f.mask.any():
            warnings.append(f"frame {f.index}: empty mask")
    return warnings
