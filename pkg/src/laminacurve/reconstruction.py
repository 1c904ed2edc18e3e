"""Forward pixel-to-voxel compounding of tracked frames into a voxel volume.

Each pixel centre is mapped through its frame pose to world millimetres and
dropped into the nearest voxel. Intensity compounds by maximum, the bone mask
by logical OR and ``hit_count`` by sum, so the result does not depend on the
order in which frames are processed.

Axis convention of the grid: x lateral (left negative), y depth (posterior to
anterior), z longitudinal (caudal to cranial). Arrays are indexed ``[x, y, z]``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy import ndimage

from laminacurve.errors import DatasetError

DEFAULT_VOXEL_MM = 0.5
DEFAULT_FILL_MM = 1.0


@dataclass(frozen=True)
class VolumeGeometry:
    origin: tuple[float, float, float]
    spacing: tuple[float, float, float]
    dims: tuple[int, int, int]

    def __post_init__(self):
        if any(s <= 0 for s in self.spacing):
            raise ValueError(f"voxel spacing must be positive, got {self.spacing}")
        if any(int(d) < 1 for d in self.dims):
            raise ValueError(f"dims must be >= 1, got {self.dims}")

    def to_index(self, points):
        """Nearest voxel index of each world point, shape (n, 3), int64."""
        rel = (np.asarray(points, dtype=float) - np.asarray(self.origin)) / np.asarray(self.spacing)
        return np.rint(rel).astype(np.int64)

    def to_world(self, index):
        return np.asarray(self.origin) + np.asarray(index, dtype=float) * np.asarray(self.spacing)

    def lateral_mm(self, ix):
        return self.origin[0] + ix * self.spacing[0]


@dataclass(frozen=True, eq=False)
class Volume:
    geometry: VolumeGeometry
    intensity: np.ndarray
    bone: np.ndarray
    hit_count: np.ndarray
    filled: np.ndarray | None = None

    @property
    def shape(self):
        return self.intensity.shape

    def is_identical(self, other):
        same = (
            self.geometry == other.geometry
            and np.array_equal(self.intensity, other.intensity)
            and np.array_equal(self.bone, other.bone)
            and np.array_equal(self.hit_count, other.hit_count)
        )
        if not same:
            return False
        a = self.filled if self.filled is not None else np.zeros(self.shape, bool)
        b = other.filled if other.filled is not None else np.zeros(other.shape, bool)
        return np.array_equal(a, b)


def plan_geometry(ds, spacing=(DEFAULT_VOXEL_MM,) * 3):
    """Axis-aligned grid enclosing every pixel centre of ``ds``, padded by one voxel."""
    if not ds.frames:
        raise DatasetError("cannot plan a volume for an empty dataset")
    spacing = tuple(float(s) for s in np.broadcast_to(np.asarray(spacing, dtype=float), (3,)))
    if any(s <= 0 for s in spacing):
        raise ValueError(f"voxel spacing must be positive, got {spacing}")
    corners = np.concatenate([f.corner_points() for f in ds.frames])
    lo = corners.min(axis=0)
    hi = corners.max(axis=0)
    s = np.asarray(spacing)
    n = np.ceil((hi - lo) / s - 1e-6).astype(int)
    n = np.maximum(n, 0)
    origin = tuple(float(v) for v in lo - s)
    dims = tuple(int(v) + 3 for v in n)
    return VolumeGeometry(origin, spacing, dims)


def _frame_voxels(frame, geom):
    h, w = frame.intensity.shape
    rows, cols = np.mgrid[0:h, 0:w]
    idx = geom.to_index(frame.world_coords(rows.ravel(), cols.ravel()))
    dims = np.asarray(geom.dims)
    if (idx < 0).any() or (idx >= dims).any():
        raise RuntimeError(f"frame {frame.index} projects outside the volume geometry")
    return np.ravel_multi_index(idx.T, geom.dims)


def compound(ds, geom):
    """Project every pixel of every frame into ``geom`` (max / OR / count)."""
    nvox = int(np.prod(geom.dims))
    intensity = np.zeros(nvox, np.uint8)
    bone = np.zeros(nvox, np.uint8)
    hits = np.zeros(nvox, np.uint32)
    for frame in ds.frames:
        flat = _frame_voxels(frame, geom)
        np.maximum.at(intensity, flat, frame.intensity.ravel())
        np.maximum.at(bone, flat, frame.mask.ravel().astype(np.uint8))
        np.add.at(hits, flat, 1)
    shape = geom.dims
    return Volume(geom, intensity.reshape(shape), bone.reshape(shape), hits.reshape(shape))


def fill_holes(vol, radius=DEFAULT_FILL_MM):
    """Fill unhit voxels from the nearest hit voxel within ``radius`` mm.

    Only voxels lying between the first and last hit voxel of their z-column
    are eligible. Filled voxels are flagged in ``Volume.filled``.
    """
    if radius < 0:
        raise ValueError("radius must be >= 0")
    hit = vol.hit_count > 0
    filled = np.zeros(vol.shape, bool) if vol.filled is None else vol.filled.copy()
    if radius == 0 or hit.all() or not hit.any():
        return replace(vol, intensity=vol.intensity.copy(), bone=vol.bone.copy(), filled=filled)

    nz = vol.shape[2]
    any_hit = hit.any(axis=2)
    first = np.argmax(hit, axis=2)
    last = nz - 1 - np.argmax(hit[:, :, ::-1], axis=2)
    z = np.arange(nz)[None, None, :]
    inside = any_hit[:, :, None] & (z > first[:, :, None]) & (z < last[:, :, None])

    dist, nearest = ndimage.distance_transform_edt(
        ~hit, sampling=vol.geometry.spacing, return_indices=True
    )
    target = inside & ~hit & (dist <= radius + 1e-9)
    src = tuple(nearest[k][target] for k in range(3))
    intensity = vol.intensity.copy()
    bone = vol.bone.copy()
    intensity[target] = vol.intensity[src]
    bone[target] = vol.bone[src]
    filled |= target
    return replace(vol, intensity=intensity, bone=bone, filled=filled)


def reconstruct(ds, voxel_mm=DEFAULT_VOXEL_MM, fill_mm=DEFAULT_FILL_MM):
    geom = plan_geometry(ds, (voxel_mm,) * 3)
    return fill_holes(compound(ds, geom), fill_mm)


_CHANNELS = (("intensity", "<u1"), ("bone", "<u1"), ("hit_count", "<u4"), ("filled", "<u1"))


def write_volume(vol, path):
    """Dump channels as raw little-endian C-order arrays plus a JSON sidecar.

    Returns ``(raw_path, json_path)``.
    """
    path = Path(path)
    raw_path = path.with_suffix(".raw")
    json_path = path.with_suffix(".json")
    channels = []
    offset = 0
    filled = vol.filled if vol.filled is not None else np.zeros(vol.shape, bool)
    arrays = {"intensity": vol.intensity, "bone": vol.bone, "hit_count": vol.hit_count, "filled": filled}
    with open(raw_path, "wb") as fh:
        for name, dtype in _CHANNELS:
            buf = np.ascontiguousarray(arrays[name], dtype=dtype).tobytes()
            fh.write(buf)
            channels.append({"name": name, "dtype": dtype, "offset": offset, "nbytes": len(buf)})
            offset += len(buf)
    g = vol.geometry
    sidecar = {
        "raw_file": raw_path.name,
        "origin_mm": list(g.origin),
        "spacing_mm": list(g.spacing),
        "dims": list(g.dims),
        "index_order": "x,y,z (C order, z fastest)",
        "axes": {"x": "lateral, left negative", "y": "depth, posterior to anterior", "z": "caudal to cranial"},
        "channels": channels,
    }
    json_path.write_text(json.dumps(sidecar, indent=2) + "\n", encoding="utf-8")
    return raw_path, json_path


def read_volume(json_path):
    json_path = Path(json_path)
    meta = json.loads(json_path.read_text(encoding="utf-8"))
    geom = VolumeGeometry(tuple(meta["origin_mm"]), tuple(meta["spacing_mm"]), tuple(meta["dims"]))
    blob = (json_path.parent / meta["raw_file"]).read_bytes()
    count = math.prod(geom.dims)
    arrays = {}
    for ch in meta["channels"]:
        arr = np.frombuffer(blob, dtype=ch["dtype"], count=count, offset=ch["offset"])
        arrays[ch["name"]] = arr.reshape(geom.dims).copy()
    return Volume(
        geom,
        arrays["intensity"].astype(np.uint8),
        arrays["bone"].astype(np.uint8),
        arrays["hit_count"].astype(np.uint32),
        arrays["filled"].astype(bool),
    )
