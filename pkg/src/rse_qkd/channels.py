"""Closed-form kept probability and dit error for the three channel models.

Each model yields (alpha, Q) for a signal set: the depolarizing channel from
(d, k, eps) alone, the modulo channel from the adjacency counts of the
encoding, and the block-biased channel from the block overlap E_b. The same
module builds the symbol-level confusion model that the Monte Carlo
simulator samples from, so the analytic and simulated paths share one source
of truth for the outcome distributions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .encodings import IndexEncoding, Topology, block_overlap_of, modulo_counts
from .entropy_rates import solve_q_threshold

__all__ = [
    "Depolarizing",
    "Modulo",
    "BlockBias",
    "ChannelSpec",
    "KeptStats",
    "ConfusionModel",
    "BlockThreshold",
    "DegenerateThresholdError",
    "depol_stats",
    "depol_threshold_eps",
    "depol_alpha_threshold",
    "modulo_stats",
    "modulo_threshold_eps",
    "block_populations",
    "block_stats",
    "block_threshold_eps2",
    "build_confusion_model",
    "analytic_stats",
    "cross_basis_overlap",
]

CROSS_BASIS_MAX_DIM = 64


class DegenerateThresholdError(ArithmeticError):
    """Raised when a threshold formula's denominator vanishes."""


@dataclass(frozen=True)
class Depolarizing:
    """Uniform depolarization to the maximally mixed state with probability eps."""

    eps: float

    def __post_init__(self):
        if not 0.0 <= self.eps <= 1.0:
            raise ValueError(f"depolarizing eps={self.eps} outside [0, 1]")


@dataclass(frozen=True)
class Modulo:
    """Nearest-neighbor hopping: each shift direction taken with probability eps."""

    eps: float
    topology: Topology = Topology.CYCLE

    def __post_init__(self):
        if not 0.0 <= self.eps <= 0.5:
            raise ValueError(f"modulo eps={self.eps} outside [0, 1/2]")


@dataclass(frozen=True)
class BlockBias:
    """In-block depolarization (eps1) followed by global depolarization (eps2)."""

    eps1: float
    eps2: float
    s: int

    def __post_init__(self):
        if not 0.0 <= self.eps1 <= 1.0:
            raise ValueError(f"block eps1={self.eps1} outside [0, 1]")
        if not 0.0 <= self.eps2 <= 1.0:
            raise ValueError(f"block eps2={self.eps2} outside [0, 1]")
        if self.s < 2:
            raise ValueError(f"block size s={self.s} must be >= 2")


ChannelSpec = Union[Depolarizing, Modulo, BlockBias]


@dataclass(frozen=True)
class KeptStats:
    """Kept-event probability alpha and conditional dit error q among kept events.

    ``no_kept_events`` marks the degenerate alpha = 0 case (then q := 0).
    """

    alpha: float
    q: float
    no_kept_events: bool = False


@dataclass(frozen=True)
class BlockThreshold:
    """Inter-block noise threshold, clamped to [0, 1] with a regime status.

    status is "ok" for an interior root, "no_positive_rate_regime" when the
    root falls below 0 (the rate is negative for every eps2), and
    "always_positive" when it falls above 1.
    """

    eps2: float
    status: str


@dataclass(frozen=True)
class ConfusionModel:
    """Per-sent-symbol outcome distributions: k rows over k kept outcomes + one discard.

    Row x gives P[outcome | sent x]; column j < k is the j-th encoding index
    and the last column is the inconclusive outcome.
    """

    rows: np.ndarray
    encoding: IndexEncoding
    basis_tag: str = "Z"

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=float)
        object.__setattr__(self, "rows", rows)
        k = self.encoding.k
        if rows.shape != (k, k + 1):
            raise ValueError(f"rows shape {rows.shape} != ({k}, {k + 1})")
        if (rows < 0).any():
            raise ValueError("confusion model has negative entries")
        if np.abs(rows.sum(axis=1) - 1.0).max() > 1e-12:
            raise ValueError("confusion model rows do not sum to 1")
        rows.flags.writeable = False

    def implied_stats(self) -> KeptStats:
        """(alpha, q) implied by the rows, averaged uniformly over sent symbols."""
        kept_rows = 1.0 - self.rows[:, -1]
        alpha = float(kept_rows.mean())
        if alpha <= 0.0:
            return KeptStats(alpha=0.0, q=0.0, no_kept_events=True)
        correct = float(np.diagonal(self.rows[:, :-1]).mean())
        return KeptStats(alpha=alpha, q=1.0 - correct / alpha)


# ---------------------------------------------------------------------------
# Depolarizing channel


def depol_stats(d: int, k: int, eps: float) -> KeptStats:
    """alpha = (1-eps) + k*eps/d and Q = (k-1)*eps / (d*(1-eps) + k*eps)."""
    _check_dk(d, k)
    Depolarizing(eps)
    alpha = (1.0 - eps) + k * eps / d
    q = (k - 1) * eps / (d * (1.0 - eps) + k * eps)
    return KeptStats(alpha=alpha, q=q)


def depol_threshold_eps(d: int, k: int) -> float:
    """Largest depolarization probability with nonnegative rate.

    eps_th = d*Q_th / ((k-1) + Q_th*(d-k)); increases in d at fixed k and
    tends to 1 as d grows.
    """
    _check_dk(d, k)
    q_th = solve_q_threshold(k)
    return d * q_th / ((k - 1) + q_th * (d - k))


def depol_alpha_threshold(d: int, k: int) -> float:
    """Kept-event fraction at the depolarizing threshold: (k-1)/((k-1)+Q_th*(d-k))."""
    _check_dk(d, k)
    q_th = solve_q_threshold(k)
    return (k - 1) / ((k - 1) + q_th * (d - k))


# ---------------------------------------------------------------------------
# Modulo channel


def modulo_stats(d: int, k: int, eps: float, encoding: IndexEncoding,
                 topology: Topology = Topology.CYCLE) -> KeptStats:
    """alpha = 1 - (eps/k)*B and Q = (eps/k)*W / alpha from the adjacency counts."""
    _check_dk(d, k)
    Modulo(eps, topology)
    _check_encoding(encoding, d, k)
    counts = modulo_counts(encoding, topology)
    alpha = 1.0 - (eps / k) * counts.b
    if alpha <= 0.0:
        # only reachable at eps = 1/2 with W = 0 on the cycle
        return KeptStats(alpha=0.0, q=0.0, no_kept_events=True)
    q = (eps / k) * counts.w / alpha
    return KeptStats(alpha=alpha, q=q)


def modulo_threshold_eps(encoding: IndexEncoding, k: int,
                         topology: Topology = Topology.CYCLE) -> float:
    """Physical noise threshold for a symmetric design S_Z = S_X = S.

    eps_th = Q_th / (2*Q_th + (W/k)*(1 - Q_th)); saturates at 1/2 when the
    encoding has no internal adjacencies (W = 0).
    """
    if encoding.k != k:
        raise ValueError(f"encoding has k={encoding.k}, expected {k}")
    w = modulo_counts(encoding, topology).w
    q_th = solve_q_threshold(k)
    return q_th / (2.0 * q_th + (w / k) * (1.0 - q_th))


# ---------------------------------------------------------------------------
# Block-biased channel


def block_populations(d: int, s: int, eps1: float, eps2: float):
    """Outcome probabilities (correct, in-block, cross-block) for one sent state.

    The correct state occurs once, the in-block value applies to the s-1
    same-block neighbors and the cross-block value to the d-s remaining
    states; the three classes sum to 1.
    """
    _check_block(d, s)
    BlockBias(eps1, eps2, s)
    p_cross = eps2 / d
    p_in = (1.0 - eps2) * eps1 / s + p_cross
    p_correct = (1.0 - eps2) * (1.0 - (s - 1) * eps1 / s) + p_cross
    return p_correct, p_in, p_cross


def block_stats(d: int, s: int, k: int, eps1: float, eps2: float,
                e_b: float) -> KeptStats:
    """(alpha, Q) for a signal set with block overlap e_b.

    alpha = (1-eps2)*(1 - (s-1)*eps1/s + (eps1/s)*(e_b - 1)) + eps2*k/d,
    Q = [((1-eps2)*eps1/s + eps2/d)*(e_b - 1) + (eps2/d)*(k - e_b)] / alpha.
    """
    _check_dk(d, k)
    _check_block(d, s)
    BlockBias(eps1, eps2, s)
    if not 1.0 <= e_b <= s:
        raise ValueError(f"block overlap {e_b} outside [1, {s}]")
    e_b = float(e_b)
    alpha = (1.0 - eps2) * (1.0 - (s - 1) * eps1 / s + (eps1 / s) * (e_b - 1.0)) \
        + eps2 * k / d
    if alpha <= 0.0:
        return KeptStats(alpha=0.0, q=0.0, no_kept_events=True)
    q = (((1.0 - eps2) * eps1 / s + eps2 / d) * (e_b - 1.0)
         + (eps2 / d) * (k - e_b)) / alpha
    return KeptStats(alpha=alpha, q=q)


def block_threshold_eps2(d: int, s: int, k: int, eps1: float,
                         e_min: float) -> BlockThreshold:
    """Inter-block noise threshold eps2_th at fixed eps1 and block overlap e_min.

    Solves Q(eps2) = Q_th for eps2 using
    K0 = 1 - (s-1)*eps1/s + (eps1/s)*(e_min - 1),
    C0 = eps1*(e_min - 1)/s,
    C1 = -eps1*(e_min - 1)/s + (k-1)/d,
    eps2_th = (Q_th*K0 - C0) / (C1 - Q_th*(-K0 + k/d)).
    Roots outside [0, 1] are clamped and flagged via the status field.
    """
    _check_dk(d, k)
    _check_block(d, s)
    e_min = float(e_min)
    q_th = solve_q_threshold(k)
    k0 = 1.0 - (s - 1) * eps1 / s + (eps1 / s) * (e_min - 1.0)
    c0 = eps1 * (e_min - 1.0) / s
    c1 = -eps1 * (e_min - 1.0) / s + (k - 1) / d
    denom = c1 - q_th * (-k0 + k / d)
    if abs(denom) < 1e-15:
        raise DegenerateThresholdError(
            f"threshold denominator vanished at d={d}, s={s}, k={k}, eps1={eps1}")
    root = (q_th * k0 - c0) / denom
    if root < 0.0:
        return BlockThreshold(eps2=0.0, status="no_positive_rate_regime")
    if root > 1.0:
        return BlockThreshold(eps2=1.0, status="always_positive")
    return BlockThreshold(eps2=root, status="ok")


# ---------------------------------------------------------------------------
# Symbol-level confusion model


def build_confusion_model(spec: ChannelSpec, d: int, encoding: IndexEncoding,
                          basis_tag: str = "Z") -> ConfusionModel:
    """Realize a channel as per-sent-symbol outcome rows over the signal set.

    The rows are constructed so that the implied (alpha, Q) reproduce the
    module's closed forms exactly; Monte Carlo sampling goes through these
    rows only, never through the analytic formulas.
    """
    if encoding.d != d:
        raise ValueError(f"encoding dimension {encoding.d} != channel dimension {d}")
    k = encoding.k
    rows = np.zeros((k, k + 1))
    idx = encoding.indices
    pos = {x: j for j, x in enumerate(idx)}

    if isinstance(spec, Depolarizing):
        eps = spec.eps
        rows[:, :k] = eps / d
        rows[np.arange(k), np.arange(k)] += 1.0 - eps
        rows[:, k] = eps * (d - k) / d
    elif isinstance(spec, Modulo):
        eps = spec.eps
        for j, x in enumerate(idx):
            stay = 1.0 - 2.0 * eps
            for step in (1, -1):
                y = x + step
                if spec.topology is Topology.CYCLE:
                    y %= d
                elif y < 0 or y >= d:
                    # the shift has nowhere to go at a path endpoint
                    stay += eps
                    continue
                if y in pos:
                    rows[j, pos[y]] += eps
                else:
                    rows[j, k] += eps
            rows[j, j] += stay
    elif isinstance(spec, BlockBias):
        s = spec.s
        p_correct, p_in, p_cross = block_populations(d, s, spec.eps1, spec.eps2)
        for j, x in enumerate(idx):
            for i, y in enumerate(idx):
                if y == x:
                    rows[j, i] = p_correct
                elif y // s == x // s:
                    rows[j, i] = p_in
                else:
                    rows[j, i] = p_cross
            rows[j, k] = 1.0 - rows[j, :k].sum()
        np.clip(rows[:, k], 0.0, None, out=rows[:, k])
    else:
        raise TypeError(f"unknown channel spec {spec!r}")

    return ConfusionModel(rows=rows, encoding=encoding, basis_tag=basis_tag)


def analytic_stats(spec: ChannelSpec, d: int, encoding: IndexEncoding) -> KeptStats:
    """Closed-form (alpha, Q) for any channel spec and encoding."""
    k = encoding.k
    if isinstance(spec, Depolarizing):
        return depol_stats(d, k, spec.eps)
    if isinstance(spec, Modulo):
        return modulo_stats(d, k, spec.eps, encoding, spec.topology)
    if isinstance(spec, BlockBias):
        e_b = float(block_overlap_of(encoding, spec.s))
        return block_stats(d, spec.s, k, spec.eps1, spec.eps2, e_b)
    raise TypeError(f"unknown channel spec {spec!r}")


# ---------------------------------------------------------------------------
# Cross-basis block overlap (dense oracle)


def cross_basis_overlap(d: int, s: int, k: int,
                        encoding_x: IndexEncoding) -> float:
    """Block overlap seen by Fourier-basis signals under a Z-anchored block map.

    Evaluates E = (s/k) * sum_t Tr(Phi_block(|psi_t><psi_t|) P_X) with a
    small dense complex-matrix computation, where psi_t are the discrete
    Fourier states of the given indices. Oracle scale only (d <= 64).
    """
    if d > CROSS_BASIS_MAX_DIM:
        raise ValueError(f"d={d} exceeds oracle limit {CROSS_BASIS_MAX_DIM}")
    _check_dk(d, k)
    _check_block(d, s)
    _check_encoding(encoding_x, d, k)

    j = np.arange(d)
    fourier = np.exp(2j * np.pi * np.outer(j, j) / d) / math.sqrt(d)
    states = fourier[:, list(encoding_x.indices)]           # columns psi_t
    proj_x = states @ states.conj().T                       # P_X

    total = 0.0
    for t in range(k):
        psi = states[:, t]
        rho = np.outer(psi, psi.conj())
        smeared = np.zeros((d, d), dtype=complex)
        for m in range(d // s):
            block = slice(m * s, (m + 1) * s)
            weight = np.trace(rho[block, block]).real
            smeared[block, block] = np.eye(s) * (weight / s)
        total += np.trace(smeared @ proj_x).real
    return (s / k) * total


def _check_dk(d: int, k: int):
    if k < 2 or k > d:
        raise ValueError(f"need 2 <= k <= d, got k={k}, d={d}")


def _check_block(d: int, s: int):
    if s < 2 or d % s != 0:
        raise ValueError(f"block size s={s} must be >= 2 and divide d={d}")


def _check_encoding(encoding: IndexEncoding, d: int, k: int):
    if encoding.d != d or encoding.k != k:
        raise ValueError(
            f"encoding (d={encoding.d}, k={encoding.k}) mismatches (d={d}, k={k})")
