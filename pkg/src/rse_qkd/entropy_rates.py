"""Entropy of the k-ary symmetric channel and Devetak-Winter rate bounds.

The secure-key analysis for every channel model reduces to the same three
ingredients: the k-ary symmetric-channel entropy h_k, the dit-error threshold
Q^th solving h_k(Q^th) = (1/2) log2 k, and the per-sifted-symbol /
per-signal rate bounds built from them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

__all__ = [
    "KaryParams",
    "RateReport",
    "h_k",
    "solve_q_threshold",
    "rate_per_sifted_symbol",
    "rate_per_signal",
    "rate_report",
]

_DOMAIN_TOL = 1e-12
_BISECT_TOL = 1e-12
_BISECT_MAX_ITER = 200


@dataclass(frozen=True)
class KaryParams:
    """Alphabet size k embedded in a Hilbert space of dimension d."""

    k: int
    d: int

    def __post_init__(self):
        if self.k < 2:
            raise ValueError(f"alphabet size k must be >= 2, got {self.k}")
        if self.d < self.k:
            raise ValueError(f"dimension d={self.d} must be >= k={self.k}")


@dataclass(frozen=True)
class RateReport:
    """Rate bounds and the thresholds they were computed from.

    ``rate_per_sifted_symbol`` may be negative (threshold searches need the
    sign); ``rate_per_signal`` is clamped at 0.
    """

    rate_per_sifted_symbol: float
    rate_per_signal: float
    q_threshold: float
    kept_stats: "object"  # channels.KeptStats; kept untyped to avoid a cycle


def h_k(q: float, k: int) -> float:
    """Shannon entropy of the k-ary symmetric channel at error probability q.

    h_k(q) = -(1-q) log2(1-q) - q log2(q/(k-1)), with 0*log2(0) := 0.
    Equals h2(q) + q log2(k-1). Domain: 0 <= q <= (k-1)/k.
    """
    if k < 2:
        raise ValueError(f"alphabet size k must be >= 2, got {k}")
    q_max = (k - 1) / k
    if q < -_DOMAIN_TOL or q > q_max + _DOMAIN_TOL:
        raise ValueError(f"error probability q={q} outside [0, {q_max}]")
    q = min(max(q, 0.0), q_max)
    out = 0.0
    if q < 1.0:
        out -= (1.0 - q) * math.log2(1.0 - q)
    if q > 0.0:
        out -= q * math.log2(q / (k - 1))
    return out


@lru_cache(maxsize=None)
def solve_q_threshold(k: int) -> float:
    """Dit-error threshold: the unique Q in (0, (k-1)/k) with h_k(Q) = (1/2) log2 k.

    h_k is continuous and strictly increasing on the bracket, from 0 at Q=0 up
    to log2 k at Q=(k-1)/k, so plain bisection is unconditionally safe.
    Independent of the embedding dimension d.
    """
    if k < 2:
        raise ValueError(f"alphabet size k must be >= 2, got {k}")
    target = 0.5 * math.log2(k)
    lo = 1e-15
    hi = (k - 1) / k - 1e-15
    for _ in range(_BISECT_MAX_ITER):
        mid = 0.5 * (lo + hi)
        if h_k(mid, k) < target:
            lo = mid
        else:
            hi = mid
        if hi - lo < _BISECT_TOL:
            break
    return 0.5 * (lo + hi)


def rate_per_sifted_symbol(k: int, q_z: float, q_x: float) -> float:
    """Devetak-Winter lower bound per sifted symbol: log2 k - h_k(Q_Z) - h_k(Q_X).

    Negative values are returned as-is so threshold searches can use the sign.
    """
    return math.log2(k) - h_k(q_z, k) - h_k(q_x, k)


def rate_per_signal(alpha: float, k: int, q: float,
                    sift_fraction: float = 0.5) -> float:
    """Secret bits per transmitted signal, clamped at 0.

    For uniform basis selection the sifted fraction is 1/2; callers with a
    biased basis choice pass the matched fraction instead.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"kept probability alpha={alpha} outside [0, 1]")
    return max(0.0, sift_fraction * alpha * rate_per_sifted_symbol(k, q, q))


def rate_report(k: int, kept_stats) -> RateReport:
    """Bundle the symmetric-error rate bounds for given kept statistics."""
    per_sifted = rate_per_sifted_symbol(k, kept_stats.q, kept_stats.q)
    per_signal = max(0.0, 0.5 * kept_stats.alpha * per_sifted)
    return RateReport(
        rate_per_sifted_symbol=per_sifted,
        rate_per_signal=per_signal,
        q_threshold=solve_q_threshold(k),
        kept_stats=kept_stats,
    )
