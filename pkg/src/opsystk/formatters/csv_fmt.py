"""CSV output for sampled numerical-range boundaries."""

from __future__ import annotations

import csv
import io
from collections.abc import Iterable

from opsystk.formatters.json_fmt import _float
from opsystk.systems.matricial import BoundaryPoint

BOUNDARY_HEADER = ("angle", "support", "re", "im")


def format_boundary_csv(points: Iterable[BoundaryPoint]) -> str:
    """One row per direction, floats with 17 significant digits."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(BOUNDARY_HEADER)
    for p in points:
        writer.writerow([_float(v) for v in (p.angle, p.support, p.point.real, p.point.imag)])
    return buf.getvalue()
