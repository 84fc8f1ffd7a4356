import itertools
from fractions import Fraction

import pytest

from rse_qkd.encodings import (
    IndexEncoding,
    Topology,
    balanced_block_encoding,
    block_overlap_of,
    brute_force_optimal,
    e_min,
    evenly_spaced_encoding,
    min_w_on_cycle,
    modulo_counts,
    truncation_encoding,
)


class TestIndexEncoding:
    def test_valid(self):
        enc = IndexEncoding(6, (0, 2, 4))
        assert enc.k == 3

    def test_rejects_unsorted_and_duplicates(self):
        with pytest.raises(ValueError):
            IndexEncoding(6, (2, 0, 4))
        with pytest.raises(ValueError):
            IndexEncoding(6, (0, 0, 4))

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            IndexEncoding(6, (0, 6))
        with pytest.raises(ValueError):
            IndexEncoding(6, (-1, 2))

    def test_rejects_k1(self):
        with pytest.raises(ValueError):
            IndexEncoding(6, (3,))


class TestTruncation:
    def test_values(self):
        assert truncation_encoding(25, 5).indices == (0, 1, 2, 3, 4)
        assert truncation_encoding(6, 2).indices == (0, 1)
        assert truncation_encoding(4, 4).indices == (0, 1, 2, 3)


class TestModuloCounts:
    def test_spaced_set_has_no_internal(self):
        counts = modulo_counts(IndexEncoding(6, (0, 2, 4)))
        assert (counts.w, counts.b) == (0, 6)

    def test_full_set(self):
        counts = modulo_counts(IndexEncoding(6, tuple(range(6))))
        assert (counts.w, counts.b) == (12, 0)

    def test_contiguous_run(self):
        counts = modulo_counts(IndexEncoding(6, (0, 1, 2, 3)))
        assert (counts.w, counts.b) == (6, 2)

    def test_path_omits_wraparound(self):
        cycle = modulo_counts(IndexEncoding(4, (0, 3)), Topology.CYCLE)
        path = modulo_counts(IndexEncoding(4, (0, 3)), Topology.PATH)
        assert cycle.w == 2  # 0 and 3 are neighbors through the wraparound edge
        assert path.w == 0
        assert path.b == 2  # endpoints have degree 1 on the path

    def test_cycle_identity_exhaustive(self):
        for d in range(4, 15):
            for k in range(2, d + 1):
                for subset in itertools.combinations(range(d), k):
                    counts = modulo_counts(IndexEncoding(d, subset))
                    assert counts.w + counts.b == 2 * k

    def test_path_degree_identity(self):
        for d in (5, 8):
            for k in range(2, d + 1):
                for subset in itertools.combinations(range(d), k):
                    counts = modulo_counts(IndexEncoding(d, subset),
                                           Topology.PATH)
                    degrees = sum(1 if x in (0, d - 1) else 2 for x in subset)
                    assert counts.w + counts.b == degrees


class TestEvenlySpaced:
    def test_examples(self):
        assert evenly_spaced_encoding(6, 3).indices == (0, 2, 4)
        assert evenly_spaced_encoding(25, 5).indices == (0, 5, 10, 15, 20)
        assert evenly_spaced_encoding(6, 4).indices == (0, 1, 3, 4)

    def test_no_internal_adjacency_below_half(self):
        for d in range(4, 30):
            for k in range(2, d // 2 + 1):
                enc = evenly_spaced_encoding(d, k)
                assert modulo_counts(enc).w == 0, (d, k)

    def test_achieves_minimum_exhaustively(self):
        for d in range(4, 15):
            for k in range(2, d + 1):
                enc = evenly_spaced_encoding(d, k)
                assert modulo_counts(enc).w == min_w_on_cycle(d, k), (d, k)


class TestMinW:
    def test_closed_form_points(self):
        assert min_w_on_cycle(25, 12) == 0
        assert min_w_on_cycle(6, 4) == 4
        assert min_w_on_cycle(6, 6) == 12

    def test_matches_brute_force(self):
        for d in range(4, 13):
            for k in range(2, d + 1):
                _, value = brute_force_optimal(d, k, "min_w")
                assert value == min_w_on_cycle(d, k), (d, k)


class TestBalancedBlocks:
    def test_one_per_block(self):
        enc = balanced_block_encoding(25, 5, 5)
        assert enc.indices == (0, 5, 10, 15, 20)
        assert block_overlap_of(enc, 5) == 1

    def test_full_alphabet(self):
        enc = balanced_block_encoding(25, 5, 25)
        assert enc.indices == tuple(range(25))
        assert block_overlap_of(enc, 5) == 5

    def test_remainder_distribution(self):
        enc = balanced_block_encoding(25, 5, 7)
        assert block_overlap_of(enc, 5) == Fraction(11, 7)

    def test_achieves_e_min(self):
        for d, s in ((4, 2), (6, 2), (6, 3), (8, 2), (8, 4), (9, 3), (12, 3)):
            for k in range(2, d + 1):
                enc = balanced_block_encoding(d, s, k)
                assert block_overlap_of(enc, s) == e_min(d, s, k), (d, s, k)


class TestEMin:
    def test_square_case_points(self):
        assert e_min(25, 5, 5) == 1
        assert e_min(25, 5, 7) == Fraction(11, 7)
        assert e_min(25, 5, 25) == 5

    def test_non_square_blocks(self):
        # d=6, s=2: three blocks of two; k=3 fits one per block
        assert e_min(6, 2, 3) == 1

    def test_matches_brute_force(self):
        for d in (4, 6, 8, 9, 12):
            for s in [s for s in range(2, d) if d % s == 0]:
                for k in range(2, d + 1):
                    _, value = brute_force_optimal(d, k, "min_eb", s=s)
                    assert value == e_min(d, s, k), (d, s, k)


class TestBruteForce:
    def test_min_w_witness(self):
        enc, value = brute_force_optimal(6, 3, "min_w")
        assert value == 0
        # lexicographically smallest zero-adjacency witness
        assert enc.indices == (0, 2, 4)

    def test_min_w_value(self):
        _, value = brute_force_optimal(6, 4, "min_w")
        assert value == 4

    def test_min_eb_value(self):
        _, value = brute_force_optimal(9, 4, "min_eb", s=3)
        assert value == Fraction(3, 2)

    def test_enumeration_cap(self):
        with pytest.raises(ValueError, match="too large"):
            brute_force_optimal(40, 20, "min_w")

    def test_unknown_objective(self):
        with pytest.raises(ValueError):
            brute_force_optimal(6, 3, "min_q")
