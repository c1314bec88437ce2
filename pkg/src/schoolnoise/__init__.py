"""Indoor school-noise telemetry pipeline."""

__version__ = "0.1.0"
