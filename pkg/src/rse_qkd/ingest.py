"""Ingestion of measured confusion-count matrices and the k-sweep pipeline.

File format (UTF-8 CSV): a section per basis, each starting with a header
line ``d=<int>,basis=<Z|X>`` followed by d lines of d comma-separated
nonnegative integer counts (counts[i][j] = coincidences with sent index i,
detected index j). A stream may hold one or both bases.
"""

from __future__ import annotations

import math
import re
import warnings
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .channels import KeptStats, block_populations
from .encodings import (
    BRUTE_FORCE_CAP,
    IndexEncoding,
    balanced_block_encoding,
    brute_force_optimal,
)
from .entropy_rates import h_k

__all__ = [
    "CountMatrix",
    "FitResult",
    "KSweepRow",
    "IngestError",
    "CountParseError",
    "DimensionMismatchError",
    "InsufficientCountsError",
    "load_counts",
    "load_count_matrices",
    "write_counts",
    "synthetic_block_counts",
    "subset_stats",
    "fit_block_params",
    "sweep_k",
]

_HEADER_RE = re.compile(r"^d=(\d+),basis=([ZX])$")


class IngestError(ValueError):
    """Base class for count-matrix ingestion failures."""


class CountParseError(IngestError):
    """Malformed count file; carries the 1-based line number."""

    def __init__(self, message: str, line_no: int):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class DimensionMismatchError(IngestError):
    pass


class InsufficientCountsError(IngestError):
    pass


@dataclass(frozen=True)
class CountMatrix:
    """d x d coincidence counts for one basis."""

    d: int
    basis_tag: str
    counts: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        object.__setattr__(self, "counts", counts)
        if self.basis_tag not in ("Z", "X"):
            raise ValueError(f"basis_tag must be Z or X, got {self.basis_tag!r}")
        if counts.shape != (self.d, self.d):
            raise DimensionMismatchError(
                f"counts shape {counts.shape} != ({self.d}, {self.d})")
        if (counts < 0).any():
            i, j = np.argwhere(counts < 0)[0]
            raise IngestError(f"negative count at row {i}, column {j}")
        counts.flags.writeable = False


@dataclass(frozen=True)
class FitResult:
    """Fitted block-bias parameters and the squared-probability residual."""

    eps1: float
    eps2: float
    residual: float
    poor_fit: bool = False


@dataclass(frozen=True)
class KSweepRow:
    k: int
    alpha: float
    q: float
    rate: float


# ---------------------------------------------------------------------------
# Loading


def load_count_matrices(lines: Iterable[str]) -> list[CountMatrix]:
    """Parse every `d=...,basis=...` section from a text stream, in order."""
    matrices = []
    it = enumerate(lines, start=1)
    pending = next(it, None)
    while pending is not None:
        line_no, line = pending
        text = line.strip()
        if not text:
            pending = next(it, None)
            continue
        m = _HEADER_RE.match(text)
        if not m:
            raise CountParseError(f"expected header 'd=<int>,basis=<Z|X>', got {text!r}",
                                  line_no)
        d = int(m.group(1))
        basis = m.group(2)
        rows = []
        for i in range(d):
            item = next(it, None)
            if item is None:
                raise CountParseError(
                    f"unexpected end of stream: basis {basis} needs {d} data rows, "
                    f"got {i}", line_no)
            row_no, row_line = item
            fields = row_line.strip().split(",")
            if len(fields) != d:
                raise CountParseError(
                    f"row {i} of basis {basis} has {len(fields)} fields, expected {d}",
                    row_no)
            try:
                values = [int(f) for f in fields]
            except ValueError:
                raise CountParseError(
                    f"row {i} of basis {basis} has a non-integer field", row_no)
            if any(v < 0 for v in values):
                raise CountParseError(
                    f"row {i} of basis {basis} has a negative count", row_no)
            rows.append(values)
        matrices.append(CountMatrix(d=d, basis_tag=basis, counts=np.array(rows)))
        pending = next(it, None)
    return matrices


def load_counts(lines: Iterable[str]) -> tuple[CountMatrix, CountMatrix]:
    """Load a validated (Z, X) pair from one stream containing both sections."""
    matrices = load_count_matrices(lines)
    by_basis = {}
    for mat in matrices:
        if mat.basis_tag in by_basis:
            raise IngestError(f"duplicate basis {mat.basis_tag} section")
        by_basis[mat.basis_tag] = mat
    missing = {"Z", "X"} - set(by_basis)
    if missing:
        raise IngestError(f"missing basis section(s): {sorted(missing)}")
    z, x = by_basis["Z"], by_basis["X"]
    if z.d != x.d:
        raise DimensionMismatchError(f"basis dimensions differ: Z has d={z.d}, "
                                     f"X has d={x.d}")
    return z, x


def write_counts(matrix: CountMatrix) -> str:
    """Serialize one count matrix to the CSV section format."""
    lines = [f"d={matrix.d},basis={matrix.basis_tag}"]
    for row in matrix.counts:
        lines.append(",".join(str(int(v)) for v in row))
    return "\n".join(lines) + "\n"


def synthetic_block_counts(d: int, s: int, eps1: float, eps2: float,
                           rows_total: int = 10**8,
                           basis_tag: str = "Z") -> CountMatrix:
    """Expected-count d x d matrix for a block-biased channel (rounded)."""
    p_correct, p_in, p_cross = block_populations(d, s, eps1, eps2)
    blocks = np.arange(d) // s
    same_block = blocks[:, None] == blocks[None, :]
    probs = np.where(same_block, p_in, p_cross)
    np.fill_diagonal(probs, p_correct)
    counts = np.rint(probs * rows_total).astype(np.int64)
    return CountMatrix(d=d, basis_tag=basis_tag, counts=counts)


# ---------------------------------------------------------------------------
# Estimation


def subset_stats(counts: CountMatrix, encoding: IndexEncoding) -> KeptStats:
    """Empirical (alpha, Q) restricted to the sent indices of a signal set.

    alpha = kept coincidences / all coincidences over sent rows in S;
    Q = 1 - diagonal / kept. Fails if any sent row in S is all-zero.
    """
    if encoding.d != counts.d:
        raise DimensionMismatchError(
            f"encoding dimension {encoding.d} != counts dimension {counts.d}")
    sel = list(encoding.indices)
    rows = counts.counts[sel]
    row_totals = rows.sum(axis=1)
    if (row_totals == 0).any():
        dead = sel[int(np.argmax(row_totals == 0))]
        raise InsufficientCountsError(
            f"insufficient data: sent row {dead} has no counts")
    total = int(row_totals.sum())
    kept = int(rows[:, sel].sum())
    alpha = kept / total
    if kept == 0:
        return KeptStats(alpha=0.0, q=0.0, no_kept_events=True)
    diag = int(counts.counts[sel, sel].sum())
    return KeptStats(alpha=alpha, q=1.0 - diag / kept)


# ---------------------------------------------------------------------------
# Block-bias parameter fit


def fit_block_params(counts_z: CountMatrix, counts_x: CountMatrix,
                     d: int, s: int) -> FitResult:
    """Joint two-basis least-squares fit of (eps1, eps2).

    Rows are normalized independently (per-sent-symbol exposure), then the
    three-level population model (correct / in-block / cross-block) is fitted
    by a coarse 0.01 grid followed by local refinement down to step 1e-4.
    ``poor_fit`` is set when the residual exceeds 10x the shot-noise
    expectation at the fitted parameters.
    """
    for mat in (counts_z, counts_x):
        if mat.d != d:
            raise DimensionMismatchError(f"counts have d={mat.d}, expected {d}")
    if s < 2 or d % s != 0:
        raise ValueError(f"block size s={s} must be >= 2 and divide d={d}")

    # sufficient statistics per outcome class over both bases:
    # residual(e1, e2) = sum_class [S2 - 2 p S1 + n p^2]
    stats = np.zeros((3, 3))  # class x (n, S1, S2)
    row_exposures = []
    blocks = np.arange(d) // s
    same_block = blocks[:, None] == blocks[None, :]
    diag_mask = np.eye(d, dtype=bool)
    masks = (diag_mask, same_block & ~diag_mask, ~same_block)
    for mat in (counts_z, counts_x):
        totals = mat.counts.sum(axis=1)
        if (totals == 0).any():
            raise InsufficientCountsError(
                f"basis {mat.basis_tag} has an all-zero sent row")
        probs = mat.counts / totals[:, None]
        row_exposures.append(totals)
        for c, mask in enumerate(masks):
            vals = probs[mask]
            stats[c] += (vals.size, vals.sum(), (vals ** 2).sum())

    def residual_at(e1, e2):
        model = block_populations(d, s, e1, e2)
        return sum(s2 - 2.0 * p * s1 + n * p * p
                   for (n, s1, s2), p in zip(stats, model))

    best = min(((residual_at(e1, e2), e1, e2)
                for e1 in np.linspace(0.0, 1.0, 101)
                for e2 in np.linspace(0.0, 1.0, 101)),
               key=lambda t: t[0])
    for step in (1e-3, 1e-4):
        _, e1c, e2c = best
        grid1 = np.clip(e1c + step * np.arange(-10, 11), 0.0, 1.0)
        grid2 = np.clip(e2c + step * np.arange(-10, 11), 0.0, 1.0)
        best = min(((residual_at(e1, e2), e1, e2)
                    for e1 in grid1 for e2 in grid2),
                   key=lambda t: t[0])

    residual, eps1, eps2 = best
    residual = max(0.0, float(residual))
    expected = _shot_noise_residual(d, s, eps1, eps2, row_exposures, masks)
    return FitResult(eps1=float(eps1), eps2=float(eps2), residual=residual,
                     poor_fit=bool(residual > 10.0 * expected))


def _shot_noise_residual(d, s, eps1, eps2, row_exposures, masks):
    """Expected squared-residual from multinomial counting noise alone."""
    model = block_populations(d, s, eps1, eps2)
    per_class_count = (1, s - 1, d - s)
    expected = 0.0
    for totals in row_exposures:
        inv_n = (1.0 / totals).sum()
        for p, n_cells in zip(model, per_class_count):
            expected += n_cells * p * (1.0 - p) * inv_n
    return expected


# ---------------------------------------------------------------------------
# k sweep


def sweep_k(counts_z: CountMatrix, counts_x: CountMatrix, d: int, s: int,
            k_values: Iterable[int], rule: str = "balanced"):
    """Per-k empirical stats and rate; returns (rows, argmax index).

    rule selects the signal set: "balanced" uses the balanced block
    construction, "brute" exhaustively minimizes the block overlap (falling
    back to balanced, with a warning, above the enumeration cap). alpha and
    q are averaged over the two bases; the rate uses the per-basis dit
    errors in the two-basis bound.
    """
    if rule not in ("balanced", "brute"):
        raise ValueError(f"unknown subset rule {rule!r}")
    rows = []
    for k in sorted(k_values):
        encoding = _select_encoding(d, s, k, rule)
        st_z = subset_stats(counts_z, encoding)
        st_x = subset_stats(counts_x, encoding)
        alpha = 0.5 * (st_z.alpha + st_x.alpha)
        q = 0.5 * (st_z.q + st_x.q)
        per_sifted = math.log2(k) - h_k(st_z.q, k) - h_k(st_x.q, k)
        rate = max(0.0, 0.5 * alpha * per_sifted)
        rows.append(KSweepRow(k=k, alpha=alpha, q=q, rate=rate))
    argmax = max(range(len(rows)), key=lambda i: rows[i].rate)
    return rows, argmax


def _select_encoding(d: int, s: int, k: int, rule: str) -> IndexEncoding:
    if rule == "brute":
        if math.comb(d, k) <= BRUTE_FORCE_CAP:
            encoding, _ = brute_force_optimal(d, k, "min_eb", s=s)
            return encoding
        warnings.warn(f"C({d},{k}) exceeds the enumeration cap; "
                      "falling back to the balanced construction")
    return balanced_block_encoding(d, s, k)
