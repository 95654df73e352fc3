"""Allow running as `python -m opsystk`."""

from opsystk.cli import app

if __name__ == "__main__":
    app()
