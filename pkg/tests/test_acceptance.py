"""End-to-end acceptance checks, one test per criterion.

Each test prints a single pass/fail line with its wall time; run with
``pytest tests/test_acceptance.py -s`` to see every line, or without ``-s``
to see lines for failures only. Runtime limits are asserted alongside the
numerical tolerances.
"""

import itertools
import json
import math
import time

import numpy as np
import pytest

from rse_qkd import channels, encodings, ingest, montecarlo
from rse_qkd.channels import BlockBias, Depolarizing, Modulo
from rse_qkd.cli import argmax_k, find_crossover, main
from rse_qkd.encodings import (
    IndexEncoding,
    balanced_block_encoding,
    brute_force_optimal,
    e_min,
    evenly_spaced_encoding,
    min_w_on_cycle,
    modulo_counts,
    truncation_encoding,
)
from rse_qkd.entropy_rates import rate_per_sifted_symbol, solve_q_threshold


class _Criterion:
    """Times a block and prints `[n] name: PASS|FAIL (t)` on exit."""

    def __init__(self, number, name, time_limit):
        self.number = number
        self.name = name
        self.time_limit = time_limit

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        elapsed = time.perf_counter() - self.start
        verdict = "PASS" if exc_type is None and elapsed < self.time_limit \
            else "FAIL"
        print(f"[{self.number}] {self.name}: {verdict} ({elapsed:.2f}s)")
        if exc_type is None:
            assert elapsed < self.time_limit, \
                f"criterion {self.number} exceeded {self.time_limit}s"
        return False


def _random_configs(rng, count):
    """Round-robin over the three channel families with valid random params."""
    configs = []
    block_dims = [(4, 2), (6, 2), (6, 3), (8, 2), (8, 4), (9, 3), (12, 3),
                  (16, 4), (25, 5)]
    while len(configs) < count:
        family = len(configs) % 3
        if family == 0:
            d = int(rng.integers(3, 28))
            k = int(rng.integers(2, d + 1))
            spec = Depolarizing(float(rng.uniform(0.0, 0.6)))
            enc = truncation_encoding(d, k)
        elif family == 1:
            d = int(rng.integers(4, 28))
            k = int(rng.integers(2, d + 1))
            spec = Modulo(float(rng.uniform(0.0, 0.45)))
            enc = evenly_spaced_encoding(d, k)
        else:
            d, s = block_dims[int(rng.integers(len(block_dims)))]
            k = int(rng.integers(2, d + 1))
            spec = BlockBias(float(rng.uniform(0.0, 0.6)),
                             float(rng.uniform(0.0, 0.6)), s)
            enc = balanced_block_encoding(d, s, k)
        configs.append((spec, d, enc))
    return configs


def test_1_dit_error_threshold_table():
    with _Criterion(1, "dit-error threshold table", 1.0):
        expected = {2: 0.1100, 3: 0.1595, 4: 0.1893, 5: 0.2099, 6: 0.2252}
        for k, q_th in expected.items():
            assert solve_q_threshold(k) == pytest.approx(q_th, abs=5e-5)


def test_2_depolarizing_crossover():
    with _Criterion(2, "depolarizing crossover window", 5.0):
        eps = find_crossover("depol", 25, rate="per_sifted")
        assert 0.080 <= eps <= 0.086, eps


def test_3_modulo_crossover_and_saturated_column():
    with _Criterion(3, "modulo crossover and saturated thresholds", 5.0):
        eps = find_crossover("modulo", 25, rate="per_signal")
        assert 0.030 <= eps <= 0.035, eps
        for k in range(2, 13):
            enc = evenly_spaced_encoding(25, k)
            assert modulo_counts(enc).w == 0
            assert channels.modulo_threshold_eps(enc, k) == 0.5


def test_4_block_bias_square_root_optimum():
    with _Criterion(4, "block-bias optimum at sqrt(d)", 2.0):
        for d in (4, 9, 16, 25):
            s = math.isqrt(d)
            best = argmax_k("block", d, eps1=0.3, eps2=0.07, s=s)
            assert best == s, (d, best)


def test_5_ingest_recovers_fitted_point():
    with _Criterion(5, "ingest fit and k-sweep maximum", 10.0):
        cz = ingest.synthetic_block_counts(25, 5, 0.31, 0.12, 10**8, "Z")
        cx = ingest.synthetic_block_counts(25, 5, 0.31, 0.12, 10**8, "X")
        fit = ingest.fit_block_params(cz, cx, 25, 5)
        assert fit.eps1 == pytest.approx(0.31, abs=1e-3)
        assert fit.eps2 == pytest.approx(0.12, abs=1e-3)
        rows, argmax = ingest.sweep_k(cz, cx, 25, 5, range(2, 26))
        assert rows[argmax].k == 5


def test_6_brute_force_oracle_equivalence():
    with _Criterion(6, "constructive encodings match brute force", 60.0):
        for d in range(4, 15):
            for k in range(2, d + 1):
                _, w_min = brute_force_optimal(d, k, "min_w")
                assert w_min == max(0, 2 * (2 * k - d)) == min_w_on_cycle(d, k)
                assert modulo_counts(evenly_spaced_encoding(d, k)).w == w_min
        for d in (4, 6, 8, 9, 12):
            for s in [s for s in range(2, d) if d % s == 0]:
                for k in range(2, d + 1):
                    _, eb_min = brute_force_optimal(d, k, "min_eb", s=s)
                    assert eb_min == e_min(d, s, k)


def test_7_monte_carlo_within_four_sigma():
    with _Criterion(7, "Monte Carlo vs closed forms at 4 s.e.", 120.0):
        rng = np.random.default_rng(20240814)
        saw_spaced_modulo = False
        for i, (spec, d, enc) in enumerate(_random_configs(rng, 20)):
            config = montecarlo.SimConfig(spec=spec, d=d, k=enc.k,
                                          encoding=enc, n_rounds=1_000_000,
                                          seed=1000 + i)
            tally = montecarlo.simulate(config)
            stats, (se_a, se_q) = montecarlo.estimate_stats(tally)
            exact = channels.analytic_stats(spec, d, enc)
            assert abs(stats.alpha - exact.alpha) <= max(4 * se_a, 1e-12)
            if not stats.no_kept_events:
                assert abs(stats.q - exact.q) <= max(4 * se_q, 1e-12)
            if isinstance(spec, Modulo) and modulo_counts(enc).w == 0:
                saw_spaced_modulo = True
                assert tally.correct == tally.kept
        assert saw_spaced_modulo


def test_8_rate_vanishes_at_physical_threshold():
    with _Criterion(8, "zero rate at computed thresholds", 30.0):
        points = 0
        for d in range(3, 23):
            for k in range(2, d + 1, 2):
                eps_th = channels.depol_threshold_eps(d, k)
                st = channels.depol_stats(d, k, eps_th)
                assert abs(rate_per_sifted_symbol(k, st.q, st.q)) <= 1e-9
                points += 1
        # contiguous sets keep W > 0, so the modulo threshold is interior
        for d in range(4, 16):
            for k in range(2, d):
                enc = truncation_encoding(d, k)
                eps_th = channels.modulo_threshold_eps(enc, k)
                st = channels.modulo_stats(d, k, eps_th, enc)
                assert abs(rate_per_sifted_symbol(k, st.q, st.q)) <= 1e-9
                points += 1
        for d, s in ((4, 2), (9, 3), (16, 4), (25, 5)):
            for k in range(2, d + 1):
                for eps1 in (0.1, 0.3):
                    em = float(e_min(d, s, k))
                    th = channels.block_threshold_eps2(d, s, k, eps1, em)
                    if th.status != "ok":
                        continue
                    st = channels.block_stats(d, s, k, eps1, th.eps2, em)
                    assert abs(rate_per_sifted_symbol(k, st.q, st.q)) <= 1e-9
                    points += 1
        assert points >= 200, points


def test_9_property_suites(tmp_path, monkeypatch):
    with _Criterion(9, "stochasticity, adjacency identity, determinism", 60.0):
        rng = np.random.default_rng(7)
        for spec, d, enc in _random_configs(rng, 30):
            model = channels.build_confusion_model(spec, d, enc)
            rows = np.asarray(model.rows)
            assert rows.shape == (enc.k, enc.k + 1)
            assert np.all(rows >= -1e-15)
            assert np.max(np.abs(rows.sum(axis=1) - 1.0)) <= 1e-12

        for d in range(4, 15):
            for k in range(2, d + 1):
                for subset in itertools.combinations(range(d), k):
                    counts = modulo_counts(IndexEncoding(d, subset))
                    assert counts.w + counts.b == 2 * k

        argv = ["simulate", "--channel", "depol", "--d", "16", "--k", "4",
                "--eps", "0.2", "--n", "300000", "--seed", "99"]
        outputs = []
        for threads in ("1", "3", "8"):
            out = tmp_path / f"sim_{threads}.json"
            monkeypatch.setenv("RSE_QKD_THREADS", threads)
            assert main(argv + ["--out", str(out)]) == 0
            outputs.append(out.read_bytes())
        assert outputs[0] == outputs[1] == outputs[2]
        json.loads(outputs[0])
