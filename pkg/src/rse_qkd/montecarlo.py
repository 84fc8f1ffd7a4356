"""Round-level Monte Carlo of the reduced-state protocol.

Each round: both parties draw a basis, Alice draws a symbol uniformly over
the signal set, and the outcome is sampled from the channel's confusion
model row. Only basis-matched rounds enter the tallies. Rounds are split
into fixed-size shards, each with its own RNG stream derived from
(seed, shard index), so results are bit-identical regardless of how many
worker threads execute the shards.

RNG: numpy PCG64 seeded via SeedSequence([seed, shard_index]).
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .channels import ChannelSpec, KeptStats, build_confusion_model
from .encodings import IndexEncoding
from .entropy_rates import h_k

__all__ = ["SimConfig", "Tally", "simulate", "estimate_stats", "empirical_rate"]

RNG_ALGORITHM = "pcg64"
SHARD_SIZE = 1 << 16


class InsufficientDataError(ValueError):
    """Raised when a tally has no basis-matched rounds to estimate from."""


@dataclass(frozen=True)
class SimConfig:
    spec: ChannelSpec
    d: int
    k: int
    encoding: IndexEncoding
    n_rounds: int
    seed: int
    basis_bias: float = 0.5

    def __post_init__(self):
        if self.n_rounds < 1:
            raise ValueError(f"n_rounds must be >= 1, got {self.n_rounds}")
        if not 0.0 < self.basis_bias < 1.0:
            raise ValueError(f"basis_bias={self.basis_bias} outside (0, 1)")
        if self.seed < 0:
            raise ValueError(f"seed must be a nonnegative integer, got {self.seed}")
        if self.encoding.d != self.d or self.encoding.k != self.k:
            raise ValueError("encoding inconsistent with (d, k)")


@dataclass
class Tally:
    """Integer counters from one run; merging two tallies is plain addition.

    per-basis count matrices are k x (k+1): sent position x outcome position,
    last column is the inconclusive outcome.
    """

    n_rounds: int
    matched: int
    kept: int
    correct: int
    counts_z: np.ndarray
    counts_x: np.ndarray

    def __add__(self, other: "Tally") -> "Tally":
        return Tally(
            n_rounds=self.n_rounds + other.n_rounds,
            matched=self.matched + other.matched,
            kept=self.kept + other.kept,
            correct=self.correct + other.correct,
            counts_z=self.counts_z + other.counts_z,
            counts_x=self.counts_x + other.counts_x,
        )


def simulate(config: SimConfig) -> Tally:
    """Run the protocol for config.n_rounds rounds; deterministic given seed.

    The RSE_QKD_THREADS environment variable caps the worker count; the
    result does not depend on it.
    """
    model = build_confusion_model(config.spec, config.d, config.encoding)
    cum = np.cumsum(model.rows, axis=1)
    k = config.k

    shards = []
    remaining = config.n_rounds
    shard_idx = 0
    while remaining > 0:
        n = min(SHARD_SIZE, remaining)
        shards.append((shard_idx, n))
        remaining -= n
        shard_idx += 1

    def run_shard(item):
        idx, n = item
        return _simulate_shard(cum, k, config.basis_bias, n,
                               np.random.SeedSequence([config.seed, idx]))

    workers = _worker_count()
    if workers > 1 and len(shards) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_shard, shards))
    else:
        results = [run_shard(item) for item in shards]

    total = results[0]
    for tally in results[1:]:
        total = total + tally
    return total


def _simulate_shard(cum: np.ndarray, k: int, bias: float, n: int,
                    seed_seq: np.random.SeedSequence) -> Tally:
    rng = np.random.Generator(np.random.PCG64(seed_seq))
    # fixed draw order: bases, symbols, outcome variates
    alice_z = rng.random(n) < bias
    bob_z = rng.random(n) < bias
    symbols = rng.integers(0, k, size=n)
    u = rng.random(n)

    matched = alice_z == bob_z
    x = symbols[matched]
    c = cum[x]                                   # (m, k+1) cumulative rows
    y = (u[matched, None] >= c).sum(axis=1)
    np.clip(y, 0, k, out=y)

    kept = y < k
    correct = y == x
    in_z = alice_z[matched]

    flat = x * (k + 1) + y
    counts_z = np.bincount(flat[in_z], minlength=k * (k + 1)).reshape(k, k + 1)
    counts_x = np.bincount(flat[~in_z], minlength=k * (k + 1)).reshape(k, k + 1)

    return Tally(
        n_rounds=n,
        matched=int(matched.sum()),
        kept=int(kept.sum()),
        correct=int(correct.sum()),
        counts_z=counts_z.astype(np.int64),
        counts_x=counts_x.astype(np.int64),
    )


def estimate_stats(tally: Tally):
    """Empirical (alpha, Q) with binomial standard errors.

    Returns (KeptStats, (se_alpha, se_q)). A tally with kept = 0 is flagged
    via KeptStats.no_kept_events (Q := 0); matched = 0 raises.
    """
    if tally.matched == 0:
        raise InsufficientDataError("no basis-matched rounds in tally")
    alpha = tally.kept / tally.matched
    se_alpha = math.sqrt(alpha * (1.0 - alpha) / tally.matched)
    if tally.kept == 0:
        return KeptStats(alpha=0.0, q=0.0, no_kept_events=True), (se_alpha, 0.0)
    q = 1.0 - tally.correct / tally.kept
    se_q = math.sqrt(q * (1.0 - q) / tally.kept)
    return KeptStats(alpha=alpha, q=q), (se_alpha, se_q)


def empirical_rate(tally: Tally, k: int) -> float:
    """Secret bits per signal from empirical stats.

    Uses the observed matched fraction in place of the ideal 1/2, so a
    biased basis choice is reflected in the throughput term.
    """
    stats, _ = estimate_stats(tally)
    if stats.no_kept_events:
        return 0.0
    matched_fraction = tally.matched / tally.n_rounds
    per_sifted = math.log2(k) - 2.0 * h_k(stats.q, k)
    return max(0.0, matched_fraction * stats.alpha * per_sifted)


def _worker_count() -> int:
    raw = os.environ.get("RSE_QKD_THREADS", "")
    if raw.strip():
        try:
            return max(1, int(raw))
        except ValueError:
            return 1
    return min(4, os.cpu_count() or 1)
