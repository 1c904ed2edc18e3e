"""Left/right agreement statistics and Dice overlap."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

CLINICAL_THRESHOLD_DEG = 5.0
STATUSES = ("healthy", "loss_of_lordosis", "mimicked_reversal")


@dataclass(frozen=True)
class AnglePair:
    label: str
    status: str
    left_deg: float
    right_deg: float


@dataclass(frozen=True)
class AgreementReport:
    n: int
    mad_deg: float
    sd_deg: float
    pearson_r: float
    abs_diffs: tuple[float, ...]
    labels: tuple[str, ...]
    n_over_threshold: int
    threshold_deg: float = CLINICAL_THRESHOLD_DEG
    excluded: tuple[str, ...] = ()

    def to_dict(self):
        return {
            "n": self.n,
            "mad_deg": self.mad_deg,
            "sd_deg": self.sd_deg,
            "pearson_r": self.pearson_r,
            "threshold_deg": self.threshold_deg,
            "n_over_threshold": self.n_over_threshold,
            "excluded": list(self.excluded),
            "rows": [{"label": lab, "abs_diff_deg": d} for lab, d in zip(self.labels, self.abs_diffs)],
        }


def read_table(path):
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for rec in csv.DictReader(fh):
            rows.append(AnglePair(rec["label"].strip(), rec["status"].strip(),
                                  float(rec["left_deg"]), float(rec["right_deg"])))
    _check_table(rows)
    return rows


def write_table(path, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["label", "status", "left_deg", "right_deg"])
        for r in rows:
            w.writerow([r.label, r.status, r.left_deg, r.right_deg])


def bundled_table_path():
    return Path(str(resources.files("laminacurve") / "data" / "table1.csv"))


def load_reference_table():
    """The bundled 22-subject reference table of left/right angle pairs."""
    return read_table(bundled_table_path())


def _check_table(rows):
    labels = [r.label for r in rows]
    if len(set(labels)) != len(labels):
        raise ValueError("angle table labels must be unique")
    for r in rows:
        if r.status not in STATUSES:
            raise ValueError(f"{r.label}: unknown status {r.status!r}")
        if not (math.isfinite(r.left_deg) and math.isfinite(r.right_deg)):
            raise ValueError(f"{r.label}: non-finite angle")


def agreement(rows, exclude=()):
    """MAD, sample SD of |L - R| and Pearson r between the two columns."""
    exclude = tuple(exclude)
    missing = set(exclude) - {r.label for r in rows}
    if missing:
        raise ValueError(f"cannot exclude unknown labels: {sorted(missing)}")
    rows = [r for r in rows if r.label not in exclude]
    _check_table(rows)
    if len(rows) < 2:
        raise ValueError(f"agreement needs at least 2 rows, got {len(rows)}")
    left = np.array([r.left_deg for r in rows])
    right = np.array([r.right_deg for r in rows])
    if np.ptp(left) == 0 or np.ptp(right) == 0:
        raise ValueError("correlation undefined: a column has zero variance")
    diffs = np.abs(left - right)
    lc = left - left.mean()
    rc = right - right.mean()
    r = float(np.dot(lc, rc) / math.sqrt(np.dot(lc, lc) * np.dot(rc, rc)))
    return AgreementReport(
        n=len(rows),
        mad_deg=float(diffs.mean()),
        sd_deg=float(diffs.std(ddof=1)),
        pearson_r=max(-1.0, min(1.0, r)),
        abs_diffs=tuple(float(d) for d in diffs),
        labels=tuple(r.label for r in rows),
        n_over_threshold=int((diffs > CLINICAL_THRESHOLD_DEG).sum()),
        excluded=exclude,
    )


def dice(a, b):
    """Dice similarity 2|A & B| / (|A| + |B|); 1.0 when both are empty."""
    a = np.asarray(a).astype(bool)
    b = np.asarray(b).astype(bool)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    total = int(a.sum()) + int(b.sum())
    if total == 0:
        return 1.0
    return 2.0 * int(np.logical_and(a, b).sum()) / total
