"""Output formatters for the operator-system toolkit."""

from opsystk.formatters.csv_fmt import format_boundary_csv
from opsystk.formatters.json_fmt import format_error_json, format_json
from opsystk.formatters.table import (
    format_boundary_table,
    format_mapping,
    format_suite_table,
    format_system_detail,
    format_verdict,
)

__all__ = [
    "format_boundary_csv",
    "format_error_json",
    "format_json",
    "format_boundary_table",
    "format_mapping",
    "format_suite_table",
    "format_system_detail",
    "format_verdict",
]
