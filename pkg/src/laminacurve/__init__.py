"""Cervical lordosis measurement from tracked, segmented 3D ultrasound sweeps.

The pipeline runs volume compounding, key sagittal frame selection, lamina
core-point extraction, outlier filtering, a quintic curve fit and signed
inflection-tangent angles. Agreement statistics and Dice overlap are in
:mod:`laminacurve.metrics`.
"""

from laminacurve.errors import DatasetError, PipelineError

__version__ = "0.1.0"

__all__ = ["DatasetError", "PipelineError", "__version__"]
