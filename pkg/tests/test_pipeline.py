import json

import numpy as np
import pytest

from laminacurve.errors import PipelineError
from laminacurve.phantom import PhantomSpec, generate
from laminacurve.pipeline import MeasureParams, measure
from laminacurve.scan import ScanDataset, TrackedFrame


@pytest.fixture(scope="module")
def arc25():
    return generate(PhantomSpec(angle_deg=25.0, frame_count=200, frame_spacing=0.5))


def test_measure_arc(arc25):
    m = measure(arc25)
    assert m.left.angle_deg == pytest.approx(25.0, abs=2.0)
    assert m.right.angle_deg == pytest.approx(25.0, abs=2.0)
    assert m.midline_mm == pytest.approx(0.0, abs=1e-6)
    assert m.left.key_frame.lateral_mm == pytest.approx(-15.0)
    assert m.right.key_frame.lateral_mm == pytest.approx(15.0)
    assert len(m.left.points) == 200 and m.left.noise == []


def test_report_dict_is_json_and_lists_defaults(arc25):
    d = measure(arc25).to_dict()
    text = json.dumps(d)
    assert json.loads(text)["parameters"] == {
        "voxel_mm": 0.5, "margin_mm": 5.0, "band_mm": 4.0, "eps_mm": 4.0, "min_pts": 5, "fill_mm": 1.0,
    }
    assert d["sides"]["left"]["key_frame"]["side"] == "left"
    assert d["sides"]["right"]["curve"]["reported_angle_deg"] == d["right_angle_deg"]


def inject_outliers(ds, frames, depth_shift_px=30):
    out = []
    for f in ds.frames:
        if f.index in frames:
            w = f.size[0]
            inten = f.intensity.copy()
            mask = f.mask.copy()
            # move the left lamina 15 mm deeper, as a gross mis-segmentation would
            half = slice(0, w // 2 - 5)
            inten[:, half] = np.roll(inten[:, half], depth_shift_px, axis=0)
            mask[:, half] = np.roll(mask[:, half], depth_shift_px, axis=0)
            f = TrackedFrame(f.index, inten, mask, f.pose, f.pixel_spacing)
        out.append(f)
    return ScanDataset(out, ds.subject_id, ds.posture, ds.frame_size)


def test_outlier_frames_removed_by_dbscan(arc25):
    bad = {20, 60, 100, 140, 180}
    m = measure(inject_outliers(arc25, bad))
    assert {p.source_frame for p in m.left.noise} == bad
    assert m.right.noise == []
    assert m.left.angle_deg == pytest.approx(25.0, abs=2.0)


def test_without_filtering_outliers_would_bias_fit(arc25):
    # min_pts = 1 turns every point into a core point: nothing is removed
    m = measure(inject_outliers(arc25, {20, 60, 100, 140, 180}), MeasureParams(min_pts=1))
    assert m.left.noise == []
    assert m.left.curve.residual > 100 * measure(arc25).left.curve.residual


def test_side_attribution_on_failure(arc25):
    # a huge midline margin leaves no candidate slices at all
    with pytest.raises(PipelineError, match="left side"):
        measure(arc25, MeasureParams(margin_mm=100.0))
