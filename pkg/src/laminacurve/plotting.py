"""SVG figures for measurement and agreement reports."""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

golden_mean = (math.sqrt(5) - 1.0) / 2.0
fig_width = 6.4

params = {
    "font.family": "sans-serif",
    "font.sans-serif": ["DejaVu Sans"],
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "lines.linewidth": 1.2,
    "lines.markersize": 3,
    "figure.figsize": [fig_width, fig_width * golden_mean],
    # stable element ids so repeated runs give identical SVG text
    "svg.hashsalt": "laminacurve",
    "svg.fonttype": "none",
}

STATUS_COLORS = {"healthy": "#2b8cbe", "loss_of_lordosis": "#e6550d", "mimicked_reversal": "#31a354"}


def _save(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def plot_side(side_result, path, title=None):
    """Key-frame underlay with core points, fitted curve and tangent lines."""
    kf = side_result.key_frame
    curve = side_result.curve
    sl = kf.slice
    with plt.rc_context(params):
        fig, ax = plt.subplots()
        ax.imshow(sl.intensity.T, cmap="gray", origin="upper", extent=sl.extent, aspect="equal",
                  interpolation="nearest")
        kz = np.array([p.z_mm for p in side_result.kept])
        ky = np.array([p.y_mm for p in side_result.kept])
        ax.plot(kz, ky, "o", color="red", markersize=1.5, label="core points")
        if side_result.noise:
            nz = [p.z_mm for p in side_result.noise]
            ny = [p.y_mm for p in side_result.noise]
            ax.plot(nz, ny, "x", color="#ffbf00", label="DBSCAN noise")
        zs = np.linspace(*curve.z_domain, 200)
        ax.plot(zs, curve(zs), "-", color="#00c0ff", label="quintic fit")
        half = 0.12 * (curve.z_domain[1] - curve.z_domain[0])
        for z0, theta in zip(curve.eval_points, curve.tangent_angles_deg):
            y0 = float(curve(z0))
            slope = math.tan(math.radians(theta))
            tz = np.array([z0 - half, z0 + half])
            ax.plot(tz, y0 + slope * (tz - z0), "--", color="yellow", linewidth=0.9)
            ax.plot([z0], [y0], "s", color="yellow", markersize=3)
        ax.text(
            0.02, 0.04, f"{kf.side.value} angle = {curve.reported_angle_deg:.1f}\N{DEGREE SIGN}",
            transform=ax.transAxes, color="red", fontsize=10,
            bbox={"facecolor": "white", "edgecolor": "red", "alpha": 0.85},
        )
        ax.set_xlabel("longitudinal z (mm, caudal \N{RIGHTWARDS ARROW} cranial)")
        ax.set_ylabel("depth y (mm)")
        if not ax.yaxis_inverted():
            ax.invert_yaxis()
        ax.set_title(title or f"{kf.side.value} key frame, x = {kf.lateral_mm:.1f} mm")
        ax.legend(loc="upper right")
        fig.tight_layout()
        return _save(fig, path)


def plot_agreement(rows, report, path):
    """Left versus right angles per row, colour-coded by status."""
    with plt.rc_context(params):
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(fig_width * 1.5, fig_width * golden_mean))
        x = np.arange(len(rows))
        left = [r.left_deg for r in rows]
        right = [r.right_deg for r in rows]
        ax1.bar(x - 0.2, left, width=0.4, label="left", color="#fdae6b")
        ax1.bar(x + 0.2, right, width=0.4, label="right", color="#6baed6")
        ax1.set_xticks(x)
        ax1.set_xticklabels([r.label for r in rows], rotation=90)
        ax1.axhline(0, color="black", linewidth=0.6)
        ax1.set_ylabel("lamina curve angle (\N{DEGREE SIGN})")
        ax1.legend()
        for status, color in STATUS_COLORS.items():
            sel = [r for r in rows if r.status == status]
            if sel:
                ax2.plot([r.left_deg for r in sel], [r.right_deg for r in sel], "o", color=color,
                         label=status.replace("_", " "))
        lo = min(left + right) - 3
        hi = max(left + right) + 3
        ax2.plot([lo, hi], [lo, hi], "-", color="gray", linewidth=0.8)
        ax2.set_xlim(lo, hi)
        ax2.set_ylim(lo, hi)
        ax2.set_aspect("equal")
        ax2.set_xlabel("left (\N{DEGREE SIGN})")
        ax2.set_ylabel("right (\N{DEGREE SIGN})")
        ax2.set_title(f"MAD {report.mad_deg:.3f} \N{PLUS-MINUS SIGN} {report.sd_deg:.3f}\N{DEGREE SIGN}, "
                      f"R = {report.pearson_r:.3f}")
        ax2.legend(loc="upper left")
        fig.tight_layout()
        return _save(fig, path)
