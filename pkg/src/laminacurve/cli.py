"""Command-line front end.

Exit status: 0 success, 2 input error, 3 pipeline error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from laminacurve import __version__
from laminacurve.errors import DatasetError, PipelineError

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_PIPELINE = 3

log = logging.getLogger("laminacurve")


def _dump(obj, path=None):
    text = json.dumps(obj, indent=2, ensure_ascii=False) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def cmd_measure(args):
    from laminacurve.corepoints import write_core_points
    from laminacurve.pipeline import MeasureParams, measure
    from laminacurve.plotting import plot_side
    from laminacurve.reconstruction import write_volume
    from laminacurve.scan import load_dataset, validate_dataset

    ds = load_dataset(args.scan_dir)
    for warning in validate_dataset(ds):
        log.warning("%s", warning)
    params = MeasureParams(
        voxel_mm=args.voxel_mm, margin_mm=args.margin_mm, band_mm=args.band_mm,
        eps_mm=args.eps_mm, min_pts=args.min_pts, fill_mm=args.fill_mm,
    )
    result = measure(ds, params)

    out = Path(args.out) if args.out else Path(args.scan_dir) / "report"
    out.mkdir(parents=True, exist_ok=True)
    _dump(result.to_dict(), out / "measurement.json")
    write_core_points(out / "core_points.csv", result.left.points + result.right.points)
    for side in (result.left, result.right):
        plot_side(side, out / f"{side.key_frame.side.value}_keyframe.svg",
                  title=f"{ds.subject_id}: {side.key_frame.side.value} key frame")
    if args.export_volume:
        write_volume(result.volume, out / "volume")
    print(f"left  {result.left.angle_deg:+.2f} deg")
    print(f"right {result.right.angle_deg:+.2f} deg")
    print(f"report written to {out}")
    return EXIT_OK


def cmd_phantom(args):
    from laminacurve.phantom import PhantomSpec, truth_angle, write_phantom

    curve = "quintic" if args.quintic else "arc"
    try:
        spec = PhantomSpec(
            curve=curve,
            angle_deg=args.arc if args.arc is not None else 25.0,
            quintic_coeffs=tuple(args.quintic or ()),
            lamina_offset=args.offset_mm,
            blob_sigma=args.sigma_mm,
            frame_count=args.frames,
            frame_spacing=args.spacing_mm,
            pose_noise=(args.noise_mm, args.noise_deg),
            seed=args.seed,
            subject_id=args.subject,
        )
    except ValueError as exc:
        raise DatasetError(f"invalid phantom spec: {exc}") from None
    manifest = write_phantom(spec, args.out_dir)
    print(f"phantom written to {manifest.parent}")
    print(f"ground-truth angle {truth_angle(spec):+.3f} deg")
    return EXIT_OK


def cmd_agreement(args):
    from laminacurve.metrics import agreement, bundled_table_path, read_table

    path = args.table or bundled_table_path()
    try:
        rows = read_table(path)
        report = agreement(rows, exclude=args.exclude or ())
    except (OSError, KeyError, ValueError) as exc:
        raise DatasetError(str(exc)) from None
    _dump(report.to_dict(), args.out)
    if args.plot:
        from laminacurve.plotting import plot_agreement

        kept = [r for r in rows if r.label not in report.excluded]
        plot_agreement(kept, report, args.plot)
    return EXIT_OK


def cmd_dice(args):
    from laminacurve.metrics import dice
    from laminacurve.scan import read_mask

    try:
        value = dice(read_mask(args.mask_a), read_mask(args.mask_b))
    except ValueError as exc:
        raise DatasetError(str(exc)) from None
    print(f"{value:.6f}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="laminacurve", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("measure", help="measure left/right lamina curve angles of a scan")
    p.add_argument("scan_dir", help="directory holding manifest.json (or the manifest itself)")
    p.add_argument("--out", help="report directory (default: SCAN_DIR/report)")
    p.add_argument("--voxel-mm", type=float, default=0.5)
    p.add_argument("--margin-mm", type=float, default=5.0, help="midline exclusion for key frames")
    p.add_argument("--band-mm", type=float, default=4.0, help="lamina band half-width")
    p.add_argument("--eps-mm", type=float, default=4.0, help="DBSCAN neighbourhood radius")
    p.add_argument("--min-pts", type=int, default=5, help="DBSCAN core-point threshold")
    p.add_argument("--fill-mm", type=float, default=1.0, help="hole-filling radius")
    p.add_argument("--export-volume", action="store_true", help="also dump the compounded volume")
    p.set_defaults(func=cmd_measure)

    p = sub.add_parser("phantom", help="generate a synthetic scan with a known angle")
    p.add_argument("out_dir")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--arc", type=float, help="circular-arc model with this signed angle (deg)")
    g.add_argument("--quintic", type=float, nargs="+", metavar="C", help="depth coefficients c0..c5 (mm)")
    p.add_argument("--frames", type=int, default=400)
    p.add_argument("--spacing-mm", type=float, default=0.25, help="frame spacing along z")
    p.add_argument("--offset-mm", type=float, default=15.0, help="lamina distance from midline")
    p.add_argument("--sigma-mm", type=float, default=1.5, help="blob radius")
    p.add_argument("--noise-mm", type=float, default=0.0, help="pose translation noise sd")
    p.add_argument("--noise-deg", type=float, default=0.0, help="pose rotation noise sd")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--subject", default="PHANTOM")
    p.set_defaults(func=cmd_phantom)

    p = sub.add_parser("agreement", help="MAD, SD and Pearson R between left and right angles")
    p.add_argument("table", nargs="?", help="CSV with label,status,left_deg,right_deg (default: bundled table)")
    p.add_argument("--exclude", action="append", metavar="LABEL", help="drop a row (repeatable)")
    p.add_argument("--out", help="write JSON here instead of stdout")
    p.add_argument("--plot", help="also write a left/right comparison SVG")
    p.set_defaults(func=cmd_agreement)

    p = sub.add_parser("dice", help="Dice similarity of two binary mask rasters")
    p.add_argument("mask_a")
    p.add_argument("mask_b")
    p.set_defaults(func=cmd_dice)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except DatasetError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except PipelineError as exc:
        print(f"pipeline error: {exc}", file=sys.stderr)
        return EXIT_PIPELINE
    except ValueError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
