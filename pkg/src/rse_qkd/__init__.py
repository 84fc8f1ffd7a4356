"""Secure-key rates, noise thresholds, and optimal reduced-state encodings
for high-dimensional QKD under depolarizing, modulo, and block-biased
channel models."""

from . import channels, cli, encodings, entropy_rates, ingest, montecarlo

__all__ = ["channels", "cli", "encodings", "entropy_rates", "ingest", "montecarlo"]

__version__ = "0.1.0"
