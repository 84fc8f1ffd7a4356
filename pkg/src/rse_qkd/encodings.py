"""Constructors and optimizers for k-element signal sets.

A signal set is a k-subset of the index range [0, d). Two geometric
objectives matter: the internal-adjacency count W on the cycle/path graph
(nearest-neighbor channels) and the block overlap E_b (block-biased
channels). Each has a constructive optimum and an exhaustive brute-force
oracle for validation.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

__all__ = [
    "Topology",
    "IndexEncoding",
    "AdjacencyCounts",
    "truncation_encoding",
    "modulo_counts",
    "evenly_spaced_encoding",
    "min_w_on_cycle",
    "balanced_block_encoding",
    "block_overlap_of",
    "e_min",
    "brute_force_optimal",
]

BRUTE_FORCE_CAP = 10**6


class Topology(str, Enum):
    CYCLE = "cycle"
    PATH = "path"


@dataclass(frozen=True)
class IndexEncoding:
    """A k-element subset of {0, ..., d-1}, stored sorted."""

    d: int
    indices: tuple

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        object.__setattr__(self, "indices", idx)
        if len(idx) < 2:
            raise ValueError(f"signal set needs k >= 2 indices, got {len(idx)}")
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ValueError(f"indices must be strictly increasing: {idx}")
        if idx[0] < 0 or idx[-1] >= self.d:
            raise ValueError(f"indices {idx} out of range [0, {self.d})")

    @property
    def k(self) -> int:
        return len(self.indices)


@dataclass(frozen=True)
class AdjacencyCounts:
    """Directed internal (w) and boundary (b) adjacency counts of a signal set."""

    w: int
    b: int


def truncation_encoding(d: int, k: int) -> IndexEncoding:
    """The first k indices {0, ..., k-1}."""
    _check_dk(d, k)
    return IndexEncoding(d, tuple(range(k)))


def modulo_counts(encoding: IndexEncoding,
                  topology: Topology = Topology.CYCLE) -> AdjacencyCounts:
    """Count directed moves x -> x+-1 landing inside (w) or outside (b) the set.

    On the cycle w + b = 2k; on the path, moves off the ends do not exist,
    so w + b = sum of vertex degrees over the set.
    """
    d = encoding.d
    members = set(encoding.indices)
    w = b = 0
    for x in encoding.indices:
        for step in (1, -1):
            y = x + step
            if topology is Topology.CYCLE:
                y %= d
            elif y < 0 or y >= d:
                continue
            if y in members:
                w += 1
            else:
                b += 1
    return AdjacencyCounts(w=w, b=b)


def evenly_spaced_encoding(d: int, k: int) -> IndexEncoding:
    """Maximally spaced cycle subset: indices floor(j*d/k) for j = 0..k-1.

    Achieves W = 0 whenever k <= floor(d/2); above that it is validated
    against the brute-force oracle rather than assumed optimal.
    """
    _check_dk(d, k)
    return IndexEncoding(d, tuple(j * d // k for j in range(k)))


def min_w_on_cycle(d: int, k: int) -> int:
    """Minimum internal-adjacency count over all k-subsets of the cycle C_d."""
    _check_dk(d, k)
    return max(0, 2 * (2 * k - d))


def balanced_block_encoding(d: int, s: int, k: int) -> IndexEncoding:
    """Spread k indices over the d/s blocks of [0, d) as evenly as possible.

    With q = k // (d/s) and t = k % (d/s), the first t blocks contribute q+1
    lowest indices and the rest contribute q, realizing the minimal block
    overlap.
    """
    _check_dk(d, k)
    _check_block(d, s)
    q, t = divmod(k, d // s)
    indices = []
    for m in range(d // s):
        fill = q + 1 if m < t else q
        indices.extend(range(m * s, m * s + fill))
    return IndexEncoding(d, tuple(indices))


def block_overlap_of(encoding: IndexEncoding, s: int) -> Fraction:
    """Block overlap E_b = (1/k) * sum over blocks of occupancy squared."""
    _check_block(encoding.d, s)
    occupancy = [0] * (encoding.d // s)
    for x in encoding.indices:
        occupancy[x // s] += 1
    return Fraction(sum(l * l for l in occupancy), encoding.k)


def e_min(d: int, s: int, k: int) -> Fraction:
    """Minimum block overlap over all k-subsets: (n*q^2 + 2*q*t + t) / k.

    Here n = d/s is the number of blocks and q, t = divmod(k, n); for the
    square case d = s^2 this is the familiar (s*q^2 + 2*q*t + t) / k.
    """
    _check_dk(d, k)
    _check_block(d, s)
    n_blocks = d // s
    q, t = divmod(k, n_blocks)
    return Fraction(n_blocks * q * q + 2 * q * t + t, k)


def brute_force_optimal(d: int, k: int, objective: str,
                        topology: Topology = Topology.CYCLE,
                        s: int | None = None):
    """Exhaustively minimize an objective over all k-subsets of [0, d).

    objective is "min_w" (internal adjacencies on the given topology) or
    "min_eb" (block overlap for block size s). Returns the lexicographically
    smallest minimizer and the minimum value (int for w, Fraction for E_b).
    Refuses instances with C(d, k) above the enumeration cap.
    """
    _check_dk(d, k)
    n_subsets = math.comb(d, k)
    if n_subsets > BRUTE_FORCE_CAP:
        raise ValueError(
            f"instance too large: C({d},{k}) = {n_subsets} > {BRUTE_FORCE_CAP}")
    if objective == "min_eb":
        if s is None:
            raise ValueError("min_eb objective requires block size s")
        _check_block(d, s)

    best_subset = None
    best_value = None
    for subset in itertools.combinations(range(d), k):
        if objective == "min_w":
            value = _w_of(subset, d, topology)
        elif objective == "min_eb":
            # compare k*E_b, an integer, to avoid Fraction churn in the loop
            occupancy = [0] * (d // s)
            for x in subset:
                occupancy[x // s] += 1
            value = sum(l * l for l in occupancy)
        else:
            raise ValueError(f"unknown objective {objective!r}")
        # combinations() yields subsets lexicographically, so strict "<"
        # keeps the lexicographically smallest co-optimal witness
        if best_value is None or value < best_value:
            best_value = value
            best_subset = subset

    encoding = IndexEncoding(d, best_subset)
    if objective == "min_eb":
        return encoding, Fraction(best_value, k)
    return encoding, best_value


def _w_of(subset, d, topology):
    members = set(subset)
    w = 0
    for x in subset:
        for step in (1, -1):
            y = x + step
            if topology is Topology.CYCLE:
                y %= d
            elif y < 0 or y >= d:
                continue
            if y in members:
                w += 1
    return w


def _check_dk(d: int, k: int):
    if k < 2 or k > d:
        raise ValueError(f"need 2 <= k <= d, got k={k}, d={d}")


def _check_block(d: int, s: int):
    if s < 2 or d % s != 0:
        raise ValueError(f"block size s={s} must be >= 2 and divide d={d}")
