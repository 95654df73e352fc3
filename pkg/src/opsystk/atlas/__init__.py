"""Canonical systems and named verification suites."""
