import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from entrogate.entropy import (
    Decision,
    GateConfig,
    PriorityScore,
    StreamScorer,
    compute_histogram,
    entropy_delta,
    gate,
    priority_score,
    shannon_entropy,
)
from entrogate.errors import ConfigError, DomainError
from oracles import naive_entropy, naive_histogram


class TestHistogram:
    def test_constant_image(self):
        hist = compute_histogram([0, 0, 0, 0])
        assert hist[0] == 1.0
        assert np.count_nonzero(hist) == 1

    def test_two_point(self):
        hist = compute_histogram([0, 255])
        assert hist[0] == 0.5 and hist[255] == 0.5
        assert hist.sum() == 1.0

    def test_uniform(self):
        hist = compute_histogram(np.arange(256, dtype=np.uint8))
        assert np.all(hist == 1 / 256)

    def test_empty_frame(self):
        with pytest.raises(DomainError, match="empty frame"):
            compute_histogram([])

    def test_out_of_range(self):
        with pytest.raises(DomainError):
            compute_histogram([0, 256])
        with pytest.raises(DomainError):
            compute_histogram([-1, 3])

    def test_accepts_bytes_and_2d(self):
        img = np.array([[1, 2], [2, 3]], dtype=np.uint8)
        assert np.array_equal(compute_histogram(img), compute_histogram(img.tobytes()))

    @given(st.lists(st.integers(0, 255), min_size=1, max_size=400))
    def test_matches_naive_counting(self, pixels):
        hist = compute_histogram(pixels)
        assert hist.shape == (256,)
        assert np.all(hist >= 0)
        assert abs(hist.sum() - 1.0) <= 1e-9
        assert np.allclose(hist, naive_histogram(pixels), rtol=0, atol=1e-15)


class TestEntropy:
    def test_constant_is_zero(self):
        assert shannon_entropy(compute_histogram([7] * 100)) == 0.0

    def test_uniform_is_eight(self):
        h = shannon_entropy(np.full(256, 1 / 256))
        assert abs(h - 8.0) <= 1e-12

    def test_fair_bit(self):
        hist = np.zeros(256)
        hist[10] = hist[200] = 0.5
        assert shannon_entropy(hist) == 1.0

    def test_wrong_bin_count(self):
        with pytest.raises(DomainError):
            shannon_entropy(np.ones(16) / 16)

    def test_random_histograms_match_naive_oracle(self):
        rng = np.random.default_rng(20240501)
        for _ in range(1000):
            w = rng.random(256) * (rng.random(256) < rng.random())
            if w.sum() == 0:
                w[rng.integers(256)] = 1.0
            hist = w / w.sum()
            assert abs(shannon_entropy(hist) - naive_entropy(hist)) <= 1e-9

    @given(st.lists(st.floats(0, 1), min_size=256, max_size=256), st.randoms(use_true_random=False))
    def test_bounds_and_permutation_invariance(self, weights, rnd):
        w = np.array(weights)
        if w.sum() == 0:
            w[0] = 1.0
        hist = w / w.sum()
        h = shannon_entropy(hist)
        assert 0.0 <= h <= 8.0
        perm = list(range(256))
        rnd.shuffle(perm)
        assert abs(shannon_entropy(hist[perm]) - h) <= 1e-12

    def test_extremes_only_at_degenerate_and_uniform(self):
        near_uniform = np.full(256, 1 / 256)
        near_uniform[0] += 1e-6
        near_uniform[1] -= 1e-6
        assert shannon_entropy(near_uniform) < 8.0
        almost_point = np.zeros(256)
        almost_point[0] = 1 - 1e-9
        almost_point[1] = 1e-9
        assert shannon_entropy(almost_point) > 0.0


class TestDeltaScoreGate:
    @pytest.mark.parametrize("cur, prev, expected", [(5.0, 5.0, 0.0), (3.0, 7.0, 4.0), (7.0, 3.0, 4.0)])
    def test_delta(self, cur, prev, expected):
        assert entropy_delta(cur, prev) == expected

    @given(st.floats(0, 8), st.floats(0, 8))
    def test_delta_symmetry(self, a, b):
        assert entropy_delta(a, b) == entropy_delta(b, a)

    def test_score_examples(self):
        assert priority_score(6.2, 3.0, GateConfig(1, 0, 0)).p == 6.2
        assert priority_score(6.2, 3.0, GateConfig(0, 1, 0)).p == 3.0
        s = priority_score(5.0, 2.5, GateConfig(0.6, 0.4, 3.0))
        assert s.p == pytest.approx(4.0, abs=1e-12)
        assert (s.h, s.delta_h) == (5.0, 2.5)

    def test_negative_delta_rejected(self):
        with pytest.raises(DomainError):
            priority_score(5.0, -0.1, GateConfig())

    @given(st.floats(0, 4), st.floats(0, 4), st.floats(0, 8), st.floats(0, 8))
    def test_score_linearity(self, alpha, beta, h, dh):
        if alpha + beta == 0:
            return
        one = priority_score(h, dh, GateConfig(alpha, beta, 0)).p
        two = priority_score(h, dh, GateConfig(2 * alpha, 2 * beta, 0)).p
        assert abs(two - 2 * one) <= 1e-12
        assert one >= 0

    @pytest.mark.parametrize(
        "p, theta, expected",
        [(2.0, 3.0, Decision.DROP), (3.0, 3.0, Decision.KEEP), (8.0, 0.0, Decision.KEEP)],
    )
    def test_gate_examples(self, p, theta, expected):
        assert gate(PriorityScore(p, p, 0.0), GateConfig(1.0, 0.0, theta)) is expected

    def test_gate_grid_consistency(self):
        grid = [i * 0.25 for i in range(0, 41)]
        for p in grid:
            for theta in grid:
                d = gate(PriorityScore(p, p, 0.0), GateConfig(1.0, 0.0, theta))
                assert (d is Decision.DROP) == (p < theta)

    @settings(max_examples=50)
    @given(st.lists(st.floats(0, 8), min_size=1, max_size=60))
    def test_gate_monotone_in_threshold(self, scores):
        kept = []
        for i in range(17):
            cfg = GateConfig(1.0, 0.0, i * 0.5)
            kept.append(sum(gate(PriorityScore(p, p, 0.0), cfg) is Decision.KEEP for p in scores))
        assert all(a >= b for a, b in zip(kept, kept[1:]))


class TestGateConfig:
    @pytest.mark.parametrize("kwargs", [{"alpha": -1}, {"beta": -0.1}, {"threshold": -1}, {"alpha": math.nan}])
    def test_bounds(self, kwargs):
        with pytest.raises(ConfigError):
            GateConfig(**kwargs)

    def test_degenerate_scorer(self):
        with pytest.raises(ConfigError, match="alpha \\+ beta"):
            GateConfig(alpha=0.0, beta=0.0)


def test_stream_scorer_first_frame_has_zero_delta():
    scorer = StreamScorer(GateConfig(0.6, 0.4, 3.0))
    first = scorer.score(np.arange(256, dtype=np.uint8))
    assert first.delta_h == 0.0 and first.p == pytest.approx(0.6 * 8.0)
    second = scorer.score(np.zeros(256, dtype=np.uint8))
    assert second.h == 0.0 and second.delta_h == 8.0
