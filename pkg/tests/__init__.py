"""Test suite for opsystk."""
