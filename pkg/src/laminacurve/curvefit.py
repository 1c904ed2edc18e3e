"""Lamina curve fitting and signed lordosis angles.

The curve is depth as a polynomial of the longitudinal coordinate, y(z), fitted
by least squares in a normalised abscissa ``u = (z - center) / half_width``
that maps the point span onto [-1, 1]. Inflection points are the sign changes
of y'' (a cubic for a quintic fit), found in closed form. Tangent angles at
neighbouring evaluation points are differenced into signed curve angles.

Sign convention: y grows from posterior to anterior and z from caudal to
cranial. A lordotic curve (concave toward the posterior, y'' < 0) gives
positive angles; a kyphotic/flexed one gives negative angles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from numpy.polynomial import polynomial as P

from laminacurve.errors import PipelineError

DEGREE = 5
SIGN_CHECK_DELTA = 1e-6


@dataclass(frozen=True, eq=False)
class LaminaCurve:
    """Fitted curve ``y(z) = sum(coeffs[k] * u**k)`` with ``u`` normalised z.

    Angles are filled in by :func:`measure_angles`; until then the angle
    fields are empty.
    """

    coeffs: np.ndarray
    z_domain: tuple[float, float]
    center: float
    half_width: float
    n_points: int = 0
    residual: float = 0.0
    inflections: tuple[float, ...] = ()
    eval_points: tuple[float, ...] = ()
    tangent_angles_deg: tuple[float, ...] = ()
    pair_angles_deg: tuple[float, ...] = ()
    reported_angle_deg: float | None = None
    used_fallback: bool = field(default=False)

    def normalize(self, z):
        return (np.asarray(z, dtype=float) - self.center) / self.half_width

    def denormalize(self, u):
        return self.center + np.asarray(u, dtype=float) * self.half_width

    def __call__(self, z):
        return P.polyval(self.normalize(z), self.coeffs)

    def slope(self, z):
        """dy/dz in mm/mm."""
        return P.polyval(self.normalize(z), P.polyder(self.coeffs)) / self.half_width

    def second_derivative_coeffs(self):
        """Coefficients of d2y/du2 in the normalised abscissa."""
        return P.polyder(self.coeffs, 2)

    def to_dict(self):
        return {
            "coeffs_normalized": [float(c) for c in self.coeffs],
            "normalization": {"center_mm": self.center, "half_width_mm": self.half_width,
                              "u": "(z_mm - center_mm) / half_width_mm"},
            "z_domain_mm": list(self.z_domain),
            "n_points": self.n_points,
            "residual_sum_sq": self.residual,
            "inflections_mm": list(self.inflections),
            "evaluation_points_mm": list(self.eval_points),
            "tangent_angles_deg": list(self.tangent_angles_deg),
            "pair_angles_deg": list(self.pair_angles_deg),
            "reported_angle_deg": self.reported_angle_deg,
            "endpoint_fallback": self.used_fallback,
        }


def fit_arrays(z, y, degree=DEGREE):
    z = np.asarray(z, dtype=float)
    y = np.asarray(y, dtype=float)
    n = len(z)
    min_points = 3 * (degree + 1)
    if n < min_points:
        raise PipelineError(f"{n} points are too few for a degree-{degree} fit (need {min_points})")
    zmin, zmax = float(z.min()), float(z.max())
    if zmax == zmin:
        raise PipelineError("rank-deficient fit: all points share one z")
    center = 0.5 * (zmin + zmax)
    half = 0.5 * (zmax - zmin)
    u = (z - center) / half
    vander = np.vander(u, degree + 1, increasing=True)
    coeffs, _, rank, _ = np.linalg.lstsq(vander, y, rcond=None)
    if rank < degree + 1:
        raise PipelineError(f"rank-deficient fit (rank {rank} < {degree + 1})")
    resid = float(np.sum((vander @ coeffs - y) ** 2))
    return LaminaCurve(coeffs, (zmin, zmax), center, half, n, resid)


def fit_polynomial(points, degree=DEGREE):
    """Least-squares degree-5 fit of core points (y as a function of z)."""
    z = [p.z_mm for p in points]
    y = [p.y_mm for p in points]
    return fit_arrays(z, y, degree)


def _quadratic_roots(a, b, c):
    disc = b * b - 4 * a * c
    if disc < 0:
        return []
    sq = math.sqrt(disc)
    q = -0.5 * (b + math.copysign(sq, b))
    if q == 0:
        return [0.0, 0.0]
    return [q / a, c / q]


def solve_cubic(a, b, c, d, rel_tol=1e-12):
    """Real roots of ``a x^3 + b x^2 + c x + d`` in closed form.

    Uses the depressed cubic: trigonometric form for three real roots,
    Cardano's formula for one. Leading coefficients negligible relative to
    the largest one drop the degree. Roots are polished by two Newton steps.
    """
    scale = max(abs(a), abs(b), abs(c), abs(d))
    if scale == 0:
        return []
    # flush negligible terms so cubes below cannot underflow
    a, b, c, d = (v / scale if abs(v / scale) > 1e-100 else 0.0 for v in (a, b, c, d))
    if abs(a) <= rel_tol:
        if abs(b) <= rel_tol:
            if abs(c) <= rel_tol:
                return []
            return [-d / c]
        return sorted(_quadratic_roots(b, c, d))

    shift = b / (3 * a)
    p = (3 * a * c - b * b) / (3 * a * a)
    q = (2 * b ** 3 - 9 * a * b * c + 27 * a * a * d) / (27 * a ** 3)
    disc = (q / 2) ** 2 + (p / 3) ** 3
    if p == 0:
        ts = [float(np.cbrt(-q))]
    elif disc > 0:
        sq = math.sqrt(disc)
        ts = [np.cbrt(-q / 2 + sq) + np.cbrt(-q / 2 - sq)]
    elif disc == 0:
        ts = [3 * q / p, -3 * q / (2 * p)]
    else:
        r = 2 * math.sqrt(-p / 3)
        arg = max(-1.0, min(1.0, (3 * q / (2 * p)) * math.sqrt(-3 / p)))
        phi = math.acos(arg) / 3
        ts = [r * math.cos(phi - 2 * math.pi * k / 3) for k in range(3)]

    roots = []
    for t in ts:
        x = float(t) - shift
        for _ in range(2):
            f = ((a * x + b) * x + c) * x + d
            df = (3 * a * x + 2 * b) * x + c
            if df == 0:
                break
            step = f / df
            if not math.isfinite(step):
                break
            x_new = x - step
            if abs(((a * x_new + b) * x_new + c) * x_new + d) > abs(f):
                break
            x = x_new
        roots.append(x)
    return sorted(roots)


def find_inflections(curve):
    """z (mm) where y'' changes sign strictly inside the fitted domain."""
    d2 = np.zeros(4)
    raw = curve.second_derivative_coeffs()
    d2[: len(raw)] = raw
    roots = solve_cubic(d2[3], d2[2], d2[1], d2[0])
    found = []
    for u in roots:
        if not -1.0 < u < 1.0:
            continue
        lo = P.polyval(u - SIGN_CHECK_DELTA, d2)
        hi = P.polyval(u + SIGN_CHECK_DELTA, d2)
        if lo * hi < 0:
            found.append(float(curve.denormalize(u)))
    return sorted(found)


def measure_angles(curve, inflections=None):
    """Populate tangent and pair angles; returns a new :class:`LaminaCurve`.

    Evaluation points are the inflections when there are at least two;
    otherwise the domain endpoints are added. Points are ordered caudal to
    cranial and ``pair[k] = theta[k] - theta[k + 1]``, which is positive for a
    lordotic curve. The reported angle is the pair of largest magnitude.
    """
    zmin, zmax = curve.z_domain
    if zmax - zmin < 1e-6:
        raise PipelineError("degenerate curve domain")
    if inflections is None:
        inflections = find_inflections(curve)
    inflections = sorted(inflections)
    fallback = len(inflections) < 2
    points = sorted(set(inflections) | {zmin, zmax}) if fallback else inflections
    thetas = [math.degrees(math.atan(float(curve.slope(z)))) for z in points]
    pairs = [thetas[k] - thetas[k + 1] for k in range(len(thetas) - 1)]
    reported = max(pairs, key=abs)
    return replace(
        curve,
        inflections=tuple(inflections),
        eval_points=tuple(points),
        tangent_angles_deg=tuple(thetas),
        pair_angles_deg=tuple(pairs),
        reported_angle_deg=reported,
        used_fallback=fallback,
    )
