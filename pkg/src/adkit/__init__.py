"""Benchmark toolkit for anomaly detection trained and selected on normal data only."""

__version__ = "0.1.0"
