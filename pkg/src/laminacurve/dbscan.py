"""Density-based outlier removal for core points (DBSCAN).

Points are processed in (z, y, source_frame) lexicographic order, which makes
cluster numbering independent of input order. A point is a core point when
its closed ``eps`` ball (itself included) holds at least ``min_pts`` points.
Border points take the cluster of the lowest-ordered core point within
``eps``. Everything unreachable from a core point is noise.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from laminacurve.errors import PipelineError

NOISE = -1
DEFAULT_EPS_MM = 4.0
DEFAULT_MIN_PTS = 5


@dataclass(frozen=True)
class DbscanParams:
    eps: float = DEFAULT_EPS_MM
    min_pts: int = DEFAULT_MIN_PTS

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError(f"eps must be > 0, got {self.eps}")
        if int(self.min_pts) != self.min_pts or self.min_pts < 1:
            raise ValueError(f"min_pts must be an integer >= 1, got {self.min_pts}")


def dbscan_labels(xy, eps, min_pts):
    """Cluster labels (0, 1, ... or NOISE) for an (n, 2) array, in given order."""
    xy = np.asarray(xy, dtype=float).reshape(-1, 2)
    n = len(xy)
    labels = np.full(n, NOISE, dtype=int)
    if n == 0:
        return labels
    neighbors = [sorted(nb) for nb in cKDTree(xy).query_ball_point(xy, eps)]
    core = np.array([len(nb) >= min_pts for nb in neighbors])

    cluster = 0
    for i in range(n):
        if not core[i] or labels[i] != NOISE:
            continue
        labels[i] = cluster
        queue = deque([i])
        while queue:
            j = queue.popleft()
            for k in neighbors[j]:
                if core[k] and labels[k] == NOISE:
                    labels[k] = cluster
                    queue.append(k)
        cluster += 1

    for i in np.flatnonzero(~core):
        reach = [k for k in neighbors[i] if core[k]]
        if reach:
            labels[i] = labels[reach[0]]
    return labels


def _order_key(p):
    return (p.z_mm, p.y_mm, p.source_frame)


def dbscan_filter(points, params=DbscanParams()):
    """Split core points into ``(kept, noise)``, both in processing order."""
    ordered = sorted(points, key=_order_key)
    xy = np.array([[p.z_mm, p.y_mm] for p in ordered]).reshape(-1, 2)
    labels = dbscan_labels(xy, params.eps, params.min_pts)
    kept = [p for p, lab in zip(ordered, labels) if lab != NOISE]
    noise = [p for p, lab in zip(ordered, labels) if lab == NOISE]
    if not kept:
        side = ordered[0].side.value if ordered else None
        raise PipelineError("every core point was classified as noise", side=side)
    return kept, noise
