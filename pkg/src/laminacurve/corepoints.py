"""Lamina core points: one intensity-weighted centroid per frame and side.

The lamina region of a frame is the set of mask pixels whose world lateral
coordinate lies within ``band`` mm of a key frame's plane. Its centroid,
computed in world coordinates from the original frame, is projected onto the
sagittal plane by dropping the lateral coordinate.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from laminacurve.errors import PipelineError
from laminacurve.keyframe import Side

DEFAULT_BAND_MM = 4.0


@dataclass(frozen=True)
class CorePoint:
    z_mm: float
    y_mm: float
    source_frame: int
    side: Side
    weight: float


def frame_centroids(frame, planes, band):
    """Centroids of one frame for each ``(side, lateral_mm)`` in ``planes``."""
    rows, cols = np.nonzero(frame.mask)
    if rows.size == 0:
        return []
    world = frame.world_coords(rows, cols)
    values = frame.intensity[rows, cols].astype(np.float64)
    out = []
    for side, lateral in planes:
        sel = np.abs(world[:, 0] - lateral) <= band
        w = values[sel]
        total = w.sum()
        if total <= 0:
            continue
        z = float(np.dot(w, world[sel, 2]) / total)
        y = float(np.dot(w, world[sel, 1]) / total)
        out.append(CorePoint(z, y, frame.index, side, float(total)))
    return out


def extract_core_points(ds, left, right, band=DEFAULT_BAND_MM):
    """Return ``(left_points, right_points)`` ordered by source frame."""
    if band <= 0:
        raise ValueError("band must be positive")
    planes = [(Side.LEFT, left.lateral_mm), (Side.RIGHT, right.lateral_mm)]
    found = {Side.LEFT: [], Side.RIGHT: []}
    for frame in ds.frames:
        for p in frame_centroids(frame, planes, band):
            found[p.side].append(p)
    for side, pts in found.items():
        if not pts:
            raise PipelineError("no lamina core points found near the key frame", side=side.value)
    return found[Side.LEFT], found[Side.RIGHT]


CSV_COLUMNS = ("side", "source_frame", "z_mm", "y_mm", "weight")


def write_core_points(path, points):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for p in points:
            writer.writerow([p.side.value, p.source_frame, repr(p.z_mm), repr(p.y_mm), repr(p.weight)])


def read_core_points(path):
    with open(Path(path), newline="", encoding="utf-8") as fh:
        return [
            CorePoint(float(r["z_mm"]), float(r["y_mm"]), int(r["source_frame"]), Side(r["side"]), float(r["weight"]))
            for r in csv.DictReader(fh)
        ]
