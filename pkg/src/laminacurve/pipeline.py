"""End-to-end measurement: volume, key frames, core points, curve, angles."""

from __future__ import annotations

from dataclasses import asdict, dataclass

from laminacurve import __version__
from laminacurve.corepoints import DEFAULT_BAND_MM, extract_core_points
from laminacurve.curvefit import fit_polynomial, measure_angles
from laminacurve.dbscan import DEFAULT_EPS_MM, DEFAULT_MIN_PTS, DbscanParams, dbscan_filter
from laminacurve.errors import PipelineError
from laminacurve.keyframe import DEFAULT_MARGIN_MM, find_midline, select_key_frames
from laminacurve.reconstruction import DEFAULT_FILL_MM, DEFAULT_VOXEL_MM, reconstruct


@dataclass(frozen=True)
class MeasureParams:
    voxel_mm: float = DEFAULT_VOXEL_MM
    margin_mm: float = DEFAULT_MARGIN_MM
    band_mm: float = DEFAULT_BAND_MM
    eps_mm: float = DEFAULT_EPS_MM
    min_pts: int = DEFAULT_MIN_PTS
    fill_mm: float = DEFAULT_FILL_MM


@dataclass(frozen=True, eq=False)
class SideResult:
    key_frame: object
    points: list
    kept: list
    noise: list
    curve: object

    @property
    def angle_deg(self):
        return self.curve.reported_angle_deg

    def to_dict(self):
        return {
            "key_frame": self.key_frame.to_dict(),
            "core_points": len(self.points),
            "kept_points": len(self.kept),
            "noise_points": len(self.noise),
            "curve": self.curve.to_dict(),
            "reported_angle_deg": self.angle_deg,
        }


@dataclass(frozen=True, eq=False)
class Measurement:
    subject_id: str
    posture: str
    frame_count: int
    params: MeasureParams
    midline_mm: float
    volume: object
    left: SideResult
    right: SideResult

    def to_dict(self):
        g = self.volume.geometry
        return {
            "tool": {"name": "laminacurve", "version": __version__},
            "subject_id": self.subject_id,
            "posture": self.posture,
            "frame_count": self.frame_count,
            "parameters": asdict(self.params),
            "volume": {"origin_mm": list(g.origin), "spacing_mm": list(g.spacing), "dims": list(g.dims)},
            "midline_mm": self.midline_mm,
            "angle_unit": "degree",
            "sign_convention": "positive = lordosis/extension, negative = flexion",
            "left_angle_deg": self.left.angle_deg,
            "right_angle_deg": self.right.angle_deg,
            "sides": {"left": self.left.to_dict(), "right": self.right.to_dict()},
        }


def measure_side(key_frame, points, dbscan):
    side = key_frame.side.value
    try:
        kept, noise = dbscan_filter(points, dbscan)
        curve = measure_angles(fit_polynomial(kept))
    except PipelineError as exc:
        if exc.side is None:
            raise PipelineError(str(exc), side=side) from exc
        raise
    return SideResult(key_frame, points, kept, noise, curve)


def measure(ds, params=MeasureParams()):
    vol = reconstruct(ds, params.voxel_mm, params.fill_mm)
    midline = find_midline(vol)
    left_kf, right_kf = select_key_frames(vol, params.margin_mm, midline=midline)
    left_pts, right_pts = extract_core_points(ds, left_kf, right_kf, params.band_mm)
    dbscan = DbscanParams(params.eps_mm, params.min_pts)
    return Measurement(
        ds.subject_id,
        ds.posture.value,
        len(ds.frames),
        params,
        midline,
        vol,
        measure_side(left_kf, left_pts, dbscan),
        measure_side(right_kf, right_pts, dbscan),
    )
