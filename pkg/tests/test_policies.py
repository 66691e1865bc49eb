import numpy as np
import pytest

from sablock import (
    ConfigError,
    ScoringConfig,
    SearchConfig,
    compress,
    evict_adaptive,
    evict_cumulative,
    evict_fixed_block,
    evict_sentence,
    evict_sliding_window,
    evict_window_topk,
    head_mean,
    parse_policy,
    redundancy_rate,
    run_policy,
    window_scores,
)

from conftest import make_trace, random_trace


def trace_from_scores(scores, texts=None):
    arr = np.asarray(scores, dtype=np.float64)[None, None, :]
    return make_trace(arr, texts=texts, window=1)


class TestSlidingWindow:
    def test_positional_rule(self, rng):
        trace = random_trace(rng, max_t=10)
        while trace.compressible_len != 10:
            trace = random_trace(rng, max_t=10)
        assert evict_sliding_window(trace, 4, n_init=1).retained == [0, 7, 8, 9]

    def test_no_sink(self):
        trace = trace_from_scores(np.ones(10))
        assert evict_sliding_window(trace, 4, n_init=0).retained == [6, 7, 8, 9]

    def test_budget_covers_region(self):
        trace = trace_from_scores(np.ones(5))
        assert evict_sliding_window(trace, 9, n_init=2).retained == [0, 1, 2, 3, 4]

    def test_sink_larger_than_budget(self):
        trace = trace_from_scores(np.ones(5))
        with pytest.raises(ConfigError):
            evict_sliding_window(trace, 2, n_init=3)


class TestCumulative:
    def test_top_b(self):
        trace = trace_from_scores([3.0, 1.0, 2.0])
        assert evict_cumulative(trace, 2).retained == [0, 2]

    def test_tie_break(self):
        trace = trace_from_scores([1.0, 1.0, 1.0])
        assert evict_cumulative(trace, 2).retained == [0, 1]

    def test_budget_covers_region(self):
        trace = trace_from_scores([1.0, 2.0])
        assert evict_cumulative(trace, 5).retained == [0, 1]


class TestWindowTopK:
    def test_simple(self):
        trace = trace_from_scores([0.0, 5.0, 0.0, 4.0])
        assert evict_window_topk(trace, 1).retained == [1]

    def test_full_budget(self):
        trace = trace_from_scores([0.0, 5.0, 0.0, 4.0])
        assert evict_window_topk(trace, 4).retained == [0, 1, 2, 3]

    def test_equals_disabled_adaptive(self, rng):
        for _ in range(20):
            trace = random_trace(rng)
            budget = int(rng.integers(1, trace.compressible_len + 2))
            plan = compress(
                trace,
                scoring_cfg=ScoringConfig(alpha=0.0, eta=0.0),
                search_cfg=SearchConfig(budget=budget, tau=1.0),
            )
            assert evict_window_topk(trace, budget).retained == plan.retained


class TestFixedBlock:
    def test_block_sums(self):
        trace = trace_from_scores([5.0, 1.0, 1.0, 4.0, 1.0, 1.0])
        assert evict_fixed_block(trace, 2, g=2).retained == [0, 1]

    def test_unit_blocks_reduce_to_topk(self, rng):
        for _ in range(10):
            trace = random_trace(rng)
            budget = int(rng.integers(1, trace.compressible_len + 1))
            assert (
                evict_fixed_block(trace, budget, g=1).retained
                == evict_window_topk(trace, budget).retained
            )

    def test_single_giant_block_refined(self):
        trace = trace_from_scores([1.0, 9.0, 2.0, 8.0])
        assert evict_fixed_block(trace, 2, g=100).retained == [1, 3]

    def test_bad_block_size(self):
        with pytest.raises(ConfigError):
            evict_fixed_block(trace_from_scores([1.0]), 1, g=0)

    def test_redundancy_grows_with_block_size(self, rng):
        rates = {g: [] for g in (1, 3, 5, 7)}
        for _ in range(30):
            trace = random_trace(rng, max_t=80, delim_prob=0.12)
            budget = max(1, trace.compressible_len // 4)
            raw = window_scores(head_mean(trace))
            for g in rates:
                kept = evict_fixed_block(trace, budget, g=g).retained
                rates[g].append(redundancy_rate(raw, kept, budget))
        means = [float(np.mean(rates[g])) for g in (1, 3, 5, 7)]
        assert means[0] == 0.0
        assert all(a <= b + 1e-9 for a, b in zip(means, means[1:]))


class TestSentence:
    def test_rank_by_mean(self):
        texts = ["a", "b", "c.", "d", "e", "f", "w"]
        trace = trace_from_scores([2.0, 2.0, 2.0, 0.5, 0.5, 0.5], texts=texts)
        assert evict_sentence(trace, 3).retained == [0, 1, 2]

    def test_refined_when_budget_small(self):
        texts = ["a", "b", "c.", "d", "e", "f", "w"]
        trace = trace_from_scores([2.0, 9.0, 2.0, 0.5, 0.5, 0.5], texts=texts)
        assert evict_sentence(trace, 2).retained == [0, 1]

    def test_full_budget(self):
        texts = ["a", "b.", "c", "w"]
        trace = trace_from_scores([1.0, 1.0, 1.0], texts=texts)
        assert evict_sentence(trace, 7).retained == [0, 1, 2]


class TestCommonContract:
    POLICIES = ("streaming", "h2o", "snapkv", "chunkkv:3", "sentencekv", "sablock")

    def test_exact_budget_everywhere(self, rng):
        for _ in range(25):
            trace = random_trace(rng)
            t = trace.compressible_len
            budget = int(rng.integers(1, 2 * t + 2))
            for name in self.POLICIES:
                result = run_policy(name, trace, budget)
                assert len(result.retained) == min(budget, t), name
                assert len(set(result.retained)) == len(result.retained)
                assert all(0 <= i < t for i in result.retained), name
                again = run_policy(name, trace, budget)
                assert again.retained == result.retained

    def test_three_way_identity(self, rng):
        for _ in range(30):
            trace = random_trace(rng)
            budget = int(rng.integers(1, trace.compressible_len + 2))
            adaptive = evict_adaptive(
                trace, budget,
                scoring_cfg=ScoringConfig(alpha=0.0, eta=0.0),
                search_cfg=SearchConfig(budget=budget, tau=1.0),
            )
            topk = evict_window_topk(trace, budget)
            unit = evict_fixed_block(trace, budget, g=1)
            assert set(adaptive.retained) == set(topk.retained) == set(unit.retained)


class TestParsePolicy:
    def test_plain_names(self):
        for name in ("streaming", "h2o", "snapkv", "sentencekv", "sablock"):
            kind, params = parse_policy(name)
            assert kind == name
            assert params == {}

    def test_chunkkv_with_size(self):
        assert parse_policy("chunkkv:7") == ("chunkkv", {"g": 7})

    @pytest.mark.parametrize("name", ["chunkkv", "chunkkv:x", "snapkv:3", "bogus"])
    def test_rejects(self, name):
        with pytest.raises(ConfigError):
            parse_policy(name)

    def test_unknown_lists_valid_names(self):
        with pytest.raises(ConfigError, match="snapkv"):
            parse_policy("nope")
