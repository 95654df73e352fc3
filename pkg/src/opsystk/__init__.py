"""opsystk - finite-dimensional operator systems with checkable certificates."""

__version__ = "0.1.0"
# Version of the JSON document layout for systems, elements, maps and reports
FORMAT_VERSION = "1"
