"""Key sagittal frame selection.

Every sagittal slice (fixed lateral index) of the compounded volume is scored
with

    weight = ln(sum of per-row bone maxima) * (number of rows holding bone)

where a "row" is one longitudinal (z) position. The row count rewards slices
that show the spine over its whole length, the log-sum rewards bright bone.
The highest-scoring slice on each side of the midline is the key frame.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from laminacurve.errors import PipelineError

DEFAULT_MARGIN_MM = 5.0


class Side(str, enum.Enum):
    LEFT = "left"
    RIGHT = "right"


@dataclass(frozen=True, eq=False)
class SagittalSlice:
    """Grids are (nz, ny): rows are z, columns are y."""

    lateral_index: int
    lateral_mm: float
    intensity: np.ndarray
    bone: np.ndarray
    z_origin_mm: float = 0.0
    y_origin_mm: float = 0.0
    dz_mm: float = 1.0
    dy_mm: float = 1.0

    @property
    def extent(self):
        """(z_left, z_right, y_bottom, y_top) pixel-edge extent for imshow."""
        nz, ny = self.intensity.shape
        return (
            self.z_origin_mm - self.dz_mm / 2,
            self.z_origin_mm + (nz - 0.5) * self.dz_mm,
            self.y_origin_mm + (ny - 0.5) * self.dy_mm,
            self.y_origin_mm - self.dy_mm / 2,
        )


@dataclass(frozen=True, eq=False)
class KeyFrame:
    slice: SagittalSlice
    weight: float
    side: Side
    len_rows: int
    row_maxima: np.ndarray

    @property
    def lateral_mm(self):
        return self.slice.lateral_mm

    @property
    def lateral_index(self):
        return self.slice.lateral_index

    def to_dict(self):
        return {
            "side": self.side.value,
            "lateral_index": int(self.lateral_index),
            "lateral_mm": float(self.lateral_mm),
            "weight": float(self.weight),
            "len_rows": int(self.len_rows),
        }


def sagittal_slice(vol, ix):
    g = vol.geometry
    return SagittalSlice(
        int(ix),
        float(g.lateral_mm(ix)),
        vol.intensity[ix].T,
        vol.bone[ix].T,
        z_origin_mm=g.origin[2],
        y_origin_mm=g.origin[1],
        dz_mm=g.spacing[2],
        dy_mm=g.spacing[1],
    )


def slice_weight(sl):
    """Score one slice; returns ``(weight, len_rows, row_maxima)`` or None.

    None means the slice shows no bone (or only zero-intensity bone) and can
    never be selected.
    """
    bone = sl.bone.astype(bool)
    masked = np.where(bone, sl.intensity, 0).astype(np.int64)
    effective = bone.any(axis=1)
    len_rows = int(effective.sum())
    if len_rows == 0:
        return None
    row_maxima = masked.max(axis=1)[effective]
    total = int(row_maxima.sum())
    if total == 0:
        return None
    return math.log(total) * len_rows, len_rows, row_maxima


def _slice_weights(vol):
    """Weights for all lateral indices at once (nan = no bone)."""
    bone = vol.bone.astype(bool)
    masked = np.where(bone, vol.intensity, np.uint8(0))
    # rows are z: reduce over y (axis 1)
    len_rows = bone.any(axis=1).sum(axis=1)
    sums = masked.max(axis=1).astype(np.int64).sum(axis=1)
    weights = np.full(vol.shape[0], np.nan)
    ok = (len_rows > 0) & (sums > 0)
    for ix in np.flatnonzero(ok):
        weights[ix] = math.log(int(sums[ix])) * int(len_rows[ix])
    return weights


def find_midline(vol):
    """Intensity-weighted lateral centroid (mm) of all bone voxels."""
    bone = vol.bone.astype(bool)
    if not bone.any():
        raise PipelineError("volume contains no bone voxels")
    w = np.where(bone, vol.intensity, 0).astype(np.float64).sum(axis=(1, 2))
    xs = vol.geometry.lateral_mm(np.arange(vol.shape[0]))
    if w.sum() == 0:
        # bone present but all zero intensity: fall back to occupancy
        w = bone.sum(axis=(1, 2)).astype(np.float64)
    return float((w * xs).sum() / w.sum())


def _pick(vol, candidates, weights, midline, side):
    best = None
    for ix in candidates:
        wt = weights[ix]
        if np.isnan(wt):
            continue
        key = (wt, abs(vol.geometry.lateral_mm(ix) - midline), -ix)
        if best is None or key > best[0]:
            best = (key, ix)
    if best is None:
        raise PipelineError("no sagittal slice with bone on this side of the midline", side=side.value)
    ix = best[1]
    sl = sagittal_slice(vol, ix)
    weight, len_rows, row_maxima = slice_weight(sl)
    return KeyFrame(sl, weight, side, len_rows, row_maxima)


def select_key_frames(vol, margin=DEFAULT_MARGIN_MM, midline=None):
    """Pick the maximal-weight slice left and right of the midline.

    Slices within ``margin`` mm of the midline are not candidates. Ties go to
    the slice farther from the midline, then to the lower index.
    """
    if margin < 0:
        raise ValueError("margin must be >= 0")
    if midline is None:
        midline = find_midline(vol)
    weights = _slice_weights(vol)
    xs = vol.geometry.lateral_mm(np.arange(vol.shape[0]))
    left = np.flatnonzero(xs < midline - margin)
    right = np.flatnonzero(xs > midline + margin)
    return (
        _pick(vol, left, weights, midline, Side.LEFT),
        _pick(vol, right, weights, midline, Side.RIGHT),
    )
