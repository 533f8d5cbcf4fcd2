"""Bayesian 6D pose estimation in RIS-aided indoor mmWave links, with CRLB benchmarks."""

__version__ = "0.1.0"
