"""Synthetic tracked sweeps with a known lamina curve.

The phantom spine is three bright Gaussian tubes running along z: a spinous
process on the midline and two laminae at ``±lamina_offset``. All three follow
the same depth profile y(z). Frames sit at ``z = k * frame_spacing`` with the
probe riding the skin (its depth follows the curve). Each pixel is rendered
from its own world position under the frame's pose, so tilted or jittered
frames stay geometrically consistent with the recorded poses.

Depth profiles:

* ``arc``: circular arc whose end tangents differ by ``angle_deg``; positive
  angles bow anteriorly in the middle (lordosis), negative ones posteriorly.
* ``quintic``: ``y = sum(c_k * u**k)`` mm with ``u`` the z span mapped to
  [-1, 1].
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from laminacurve.corepoints import DEFAULT_BAND_MM
from laminacurve.curvefit import LaminaCurve, measure_angles
from laminacurve.keyframe import DEFAULT_MARGIN_MM
from laminacurve.scan import Posture, Pose, ScanDataset, TrackedFrame, quat_from_axis_angle, save_dataset

# half-width of a Gaussian cut at a quarter of its peak, in sigmas
_QUARTER_PEAK_RADIUS = math.sqrt(2 * math.log(4))


@dataclass(frozen=True)
class PhantomSpec:
    curve: str = "arc"
    angle_deg: float = 25.0
    quintic_coeffs: tuple[float, ...] = ()
    lamina_offset: float = 15.0
    blob_sigma: float = 1.5
    frame_count: int = 400
    frame_spacing: float = 0.25
    pose_noise: tuple[float, float] = (0.0, 0.0)
    intensity_peak: int = 220
    seed: int = 0
    frame_size: tuple[int, int] = (128, 96)
    pixel_spacing: tuple[float, float] = (0.5, 0.5)
    lamina_depth: float = 24.0
    spinous_rise: float = 8.0
    subject_id: str = "PHANTOM"
    posture: str | None = None

    def __post_init__(self):
        if self.curve not in ("arc", "quintic"):
            raise ValueError(f"unknown curve model {self.curve!r}")
        if self.curve == "quintic" and not 1 <= len(self.quintic_coeffs) <= 6:
            raise ValueError("quintic model needs 1 to 6 coefficients")
        if self.curve == "arc" and not -180 < self.angle_deg < 180:
            raise ValueError("arc angle must lie in (-180, 180) degrees")
        if self.frame_count < 18:
            raise ValueError(f"frame_count {self.frame_count} is below the fit minimum of 18")
        if not self.blob_sigma > 0:
            raise ValueError("blob_sigma must be positive")
        if not self.frame_spacing > 0:
            raise ValueError("frame_spacing must be positive")
        if not 1 <= self.intensity_peak <= 255:
            raise ValueError("intensity_peak must be an 8-bit value")
        t_sd, r_sd = self.pose_noise
        if t_sd < 0 or r_sd < 0:
            raise ValueError("pose noise must be non-negative")
        # The lamina band must clear the spinous tube and the midline margin.
        blob_r = _QUARTER_PEAK_RADIUS * self.blob_sigma
        if self.lamina_offset - DEFAULT_BAND_MM <= blob_r or self.lamina_offset <= DEFAULT_MARGIN_MM + blob_r:
            raise ValueError(
                f"lamina_offset {self.lamina_offset} mm too small for the default "
                f"{DEFAULT_MARGIN_MM} mm margin and {DEFAULT_BAND_MM} mm band"
            )
        w, h = self.frame_size
        sx, sy = self.pixel_spacing
        if (w // 2) * sx < self.lamina_offset + 3 * self.blob_sigma:
            raise ValueError("frame is too narrow to contain the laminae")
        if not 3 * self.blob_sigma <= self.lamina_depth - self.spinous_rise:
            raise ValueError("spinous tube would touch the probe face")
        if self.lamina_depth + 3 * self.blob_sigma > (h - 1) * sy:
            raise ValueError("frame is too shallow to contain the laminae")

    @property
    def length(self):
        return (self.frame_count - 1) * self.frame_spacing

    @property
    def resolved_posture(self):
        if self.posture is not None:
            return Posture(self.posture)
        return Posture.FLEXION if truth_angle(self) < 0 else Posture.NEUTRAL


def depth_profile(spec, z):
    """Lamina depth offset y(z) in mm (0 at the arc ends)."""
    z = np.asarray(z, dtype=float)
    half = spec.length / 2
    u = z - half
    if spec.curve == "quintic":
        return np.polynomial.polynomial.polyval(u / half, np.asarray(spec.quintic_coeffs, float))
    if spec.angle_deg == 0:
        return np.zeros_like(z)
    phi = math.radians(abs(spec.angle_deg))
    radius = half / math.sin(phi / 2)
    bow = np.sqrt(np.maximum(radius ** 2 - u ** 2, 0.0)) - radius * math.cos(phi / 2)
    return math.copysign(1.0, spec.angle_deg) * bow


def truth_curve(spec):
    """Exact depth profile as a curve object, with angles measured."""
    half = spec.length / 2
    if spec.curve == "quintic":
        coeffs = np.zeros(6)
        coeffs[: len(spec.quintic_coeffs)] = spec.quintic_coeffs
        return measure_angles(LaminaCurve(coeffs, (0.0, spec.length), half, half))
    raise ValueError("truth_curve is only defined for the quintic model")


def truth_angle(spec):
    if spec.curve == "arc":
        return float(spec.angle_deg)
    return float(truth_curve(spec).reported_angle_deg)


def _render(spec, pose, rows, cols):
    sx, sy = spec.pixel_spacing
    probe = np.stack([cols * sx, rows * sy, np.zeros_like(rows, dtype=float)], axis=-1)
    world = pose.apply(probe.reshape(-1, 3))
    x, y, z = world.T
    base = spec.lamina_depth + depth_profile(spec, z)
    tubes = (
        (0.0, base - spec.spinous_rise),
        (-spec.lamina_offset, base),
        (spec.lamina_offset, base),
    )
    two_var = 2 * spec.blob_sigma ** 2
    total = np.zeros(len(world))
    for tx, ty in tubes:
        total += np.exp(-((x - tx) ** 2 + (y - ty) ** 2) / two_var)
    return (spec.intensity_peak * total).reshape(rows.shape)


def generate(spec):
    """Synthesize the phantom sweep as an in-memory :class:`ScanDataset`."""
    w, h = spec.frame_size
    sx, _ = spec.pixel_spacing
    rows, cols = np.mgrid[0:h, 0:w].astype(float)
    x0 = -(w // 2) * sx
    t_sd, r_sd = spec.pose_noise
    streams = np.random.SeedSequence(spec.seed).spawn(spec.frame_count)
    frames = []
    for k in range(spec.frame_count):
        z = k * spec.frame_spacing
        y_probe = float(depth_profile(spec, z))
        position = np.array([x0, y_probe, z])
        orientation = (1.0, 0.0, 0.0, 0.0)
        if t_sd > 0 or r_sd > 0:
            rng = np.random.default_rng(streams[k])
            position = position + rng.normal(0.0, t_sd, 3)
            axis = rng.normal(size=3)
            angle = math.radians(rng.normal(0.0, r_sd))
            if np.linalg.norm(axis) > 0 and angle != 0:
                orientation = quat_from_axis_angle(axis, angle)
        pose = Pose(tuple(float(v) for v in position), orientation)
        field_ = _render(spec, pose, rows, cols)
        intensity = np.clip(np.rint(field_), 0, 255).astype(np.uint8)
        mask = (field_ >= spec.intensity_peak / 4).astype(np.uint8)
        frames.append(TrackedFrame(k, intensity, mask, pose, tuple(spec.pixel_spacing)))
    return ScanDataset(frames, spec.subject_id, spec.resolved_posture, tuple(spec.frame_size))


def truth_record(spec):
    model = {"type": spec.curve}
    if spec.curve == "arc":
        model["angle_deg"] = spec.angle_deg
    else:
        model["coeffs_mm"] = list(spec.quintic_coeffs)
    return {
        "curve_model": model,
        "truth_angle_deg": truth_angle(spec),
        "sign_convention": "positive = lordosis/extension, negative = flexion",
        "spec": asdict(spec),
    }


def write_phantom(spec, directory):
    """Write the phantom in the scan manifest layout plus ``truth.json``."""
    directory = Path(directory)
    ds = generate(spec)
    manifest = save_dataset(ds, directory)
    (directory / "truth.json").write_text(json.dumps(truth_record(spec), indent=2) + "\n", encoding="utf-8")
    return manifest
