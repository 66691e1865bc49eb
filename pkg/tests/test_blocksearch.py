import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sablock import (
    ConfigError,
    ScoringConfig,
    SearchConfig,
    Segment,
    compress,
    cover_segment,
    fidelity_ratio,
    implicit_budgets,
    head_mean,
    search_segment,
    segment_tokens,
    select_top_b,
    window_scores,
)

from conftest import make_trace, random_trace
from oracles import oracle_cover, oracle_search, oracle_top_b


def seg(start, end, index=0):
    return Segment(index=index, start=start, end=end)


class TestSelectTopB:
    def test_forced_ordering(self):
        assert select_top_b(np.array([3.0, 1.0, 2.0]), 2) == [0, 2]

    def test_tie_break_smaller_index(self):
        assert select_top_b(np.array([1.0, 1.0, 1.0]), 2) == [0, 1]

    def test_budget_exceeds_region(self):
        assert select_top_b(np.array([1.0, 2.0, 3.0, 4.0]), 10) == [0, 1, 2, 3]

    def test_zero_budget_rejected(self):
        with pytest.raises(ConfigError):
            select_top_b(np.array([1.0]), 0)

    def test_matches_oracle(self, rng):
        for _ in range(50):
            scores = np.round(rng.lognormal(0, 1, size=rng.integers(1, 40)), 1)
            budget = int(rng.integers(1, len(scores) + 3))
            assert set(select_top_b(scores, budget)) == oracle_top_b(list(scores), budget)


class TestImplicitBudgets:
    def test_spec_example(self):
        scores = np.array([9.0, 8.0, 1.0, 7.0, 2.0, 2.0])
        segments = [seg(0, 3, 0), seg(3, 6, 1)]
        top = select_top_b(scores, 3)
        assert implicit_budgets(top, segments) == [2, 1]

    def test_empty_intersection(self):
        segments = [seg(0, 2, 0), seg(2, 4, 1)]
        assert implicit_budgets([0, 1], segments) == [2, 0]

    def test_single_segment_gets_all(self):
        scores = np.arange(10.0)
        top = select_top_b(scores, 4)
        assert implicit_budgets(top, [seg(0, 10)]) == [4]

    def test_budgets_sum_to_top_b(self, rng):
        for _ in range(30):
            trace = random_trace(rng)
            segments = segment_tokens(trace)
            scores = window_scores(head_mean(trace))
            budget = int(rng.integers(1, trace.compressible_len + 2))
            top = select_top_b(scores, budget)
            assert sum(implicit_budgets(top, segments)) == len(top)


class TestCoverSegment:
    def test_whole_block_wins(self):
        scores = np.array([5.0, 1.0, 1.0, 4.0, 1.0, 1.0])
        assert cover_segment(scores, seg(0, 6), 2, 2) == [0, 1]

    def test_block_size_one_is_top_b(self):
        scores = np.array([5.0, 1.0, 1.0, 4.0, 1.0, 1.0])
        assert cover_segment(scores, seg(0, 6), 2, 1) == [0, 3]

    def test_refinement_rule(self):
        scores = np.array([10.0, 1.0, 5.0, 4.0])
        assert cover_segment(scores, seg(0, 4), 3, 2) == [0, 1, 2]

    def test_offset_segment(self):
        scores = np.array([0.0, 0.0, 5.0, 1.0, 1.0, 4.0])
        assert cover_segment(scores, seg(2, 6), 2, 2) == [2, 3]

    @pytest.mark.parametrize("budget,g", [(7, 2), (3, 4), (3, 0), (2, 3)])
    def test_precondition_violations(self, budget, g):
        scores = np.ones(6)
        with pytest.raises(ConfigError):
            cover_segment(scores, seg(0, 6), budget, g)

    def test_matches_oracle(self, rng):
        for _ in range(200):
            size = int(rng.integers(1, 25))
            scores = np.round(rng.lognormal(0, 1, size=size + 3), 1)
            budget = int(rng.integers(1, size + 1))
            g = int(rng.integers(1, min(size, budget) + 1))
            got = cover_segment(scores, seg(3, 3 + size), budget, g)
            want = oracle_cover(list(scores), 3, 3 + size, budget, g)
            assert set(got) == want
            assert len(got) == budget


class TestFidelityRatio:
    def test_derived_example(self):
        scores = np.array([5.0, 1.0, 1.0, 4.0])
        assert fidelity_ratio(scores, [0, 1], [0, 3]) == pytest.approx(6 / 9)

    def test_identical_sets_exactly_one(self):
        scores = np.array([0.3, 0.7, 0.1])
        assert fidelity_ratio(scores, [1, 2], [2, 1]) == 1.0

    def test_zero_denominator(self):
        assert fidelity_ratio(np.zeros(4), [], []) == 1.0
        assert fidelity_ratio(np.zeros(4), [0], [1]) == 1.0


class TestSearchSegment:
    def test_falls_back_to_token_level(self):
        scores = np.array([5.0, 1.0, 1.0, 4.0, 1.0, 1.0])
        base = select_top_b(scores, 2)
        cfg = SearchConfig(budget=2, tau=0.85, ladder=(1, 2))
        plan = search_segment(scores, seg(0, 6), 2, base, cfg)
        assert plan.block_size == 1
        assert plan.retained == (0, 3)

    def test_accepts_block_of_two(self):
        scores = np.array([5.0, 4.0, 1.0, 1.0])
        base = select_top_b(scores, 2)
        cfg = SearchConfig(budget=2, tau=0.85, ladder=(1, 2))
        plan = search_segment(scores, seg(0, 4), 2, base, cfg)
        assert plan.block_size == 2
        assert plan.fidelity == 1.0

    def test_tau_one_matches_token_baseline_score(self, rng):
        for _ in range(20):
            size = int(rng.integers(1, 20))
            scores = rng.lognormal(0, 1, size=size)
            budget = int(rng.integers(1, size + 1))
            base = select_top_b(scores, budget)
            cfg = SearchConfig(budget=budget, tau=1.0)
            plan = search_segment(scores, seg(0, size), budget, base, cfg)
            got = scores[list(plan.retained)].sum()
            want = scores[base].sum()
            assert got == pytest.approx(want, rel=1e-12)

    def test_zero_budget_empty_plan(self):
        plan = search_segment(np.ones(4), seg(0, 4), 0, [], SearchConfig(budget=1))
        assert plan.retained == ()
        assert plan.block_size == 1
        assert plan.fidelity == 1.0

    def test_termination_floor_exact(self, rng):
        for _ in range(100):
            trace = random_trace(rng)
            segments = segment_tokens(trace)
            scores = window_scores(head_mean(trace))
            budget = int(rng.integers(1, trace.compressible_len + 2))
            top = select_top_b(scores, budget)
            budgets = implicit_budgets(top, segments)
            for k, s in enumerate(segments):
                base = [t for t in top if s.start <= t < s.end]
                if budgets[k] == 0:
                    continue
                cover = cover_segment(scores, s, budgets[k], 1)
                assert cover == sorted(base)
                assert fidelity_ratio(scores, cover, base) == 1.0

    def test_matches_oracle_random(self, rng):
        ladders = [None, (1, 2, 3, 5, 7, 9, 11, 13), (1, 4, 8), (1, 2)]
        for i in range(300):
            size = int(rng.integers(1, 30))
            scores = np.round(rng.lognormal(0, 1, size=size), rng.integers(1, 3))
            budget = int(rng.integers(0, size + 1))
            tau = float(rng.uniform(0.3, 1.0))
            g_max = int(rng.integers(1, 15))
            ladder = ladders[i % len(ladders)]
            base = sorted(oracle_top_b(list(scores), budget)) if budget else []
            cfg = SearchConfig(
                budget=max(budget, 1),
                tau=tau,
                g_max=g_max,
                ladder=ladder or (1,),
                dense_range=ladder is None,
            )
            plan = search_segment(scores, seg(0, size), budget, base, cfg)
            want_g, want_set = oracle_search(
                list(scores), 0, size, budget, set(base), tau, g_max,
                ladder=list(ladder) if ladder else None,
            )
            assert plan.block_size == want_g
            assert set(plan.retained) == want_set

    def test_monotone_tau(self, rng):
        for _ in range(40):
            size = int(rng.integers(2, 25))
            scores = rng.lognormal(0, 1, size=size)
            budget = int(rng.integers(1, size + 1))
            base = select_top_b(scores, budget)
            chosen = []
            for tau in (0.5, 0.7, 0.9, 1.0):
                cfg = SearchConfig(budget=budget, tau=tau)
                chosen.append(
                    search_segment(scores, seg(0, size), budget, base, cfg).block_size
                )
            assert all(a >= b for a, b in zip(chosen, chosen[1:]))

    def test_ratio_within_unit_interval(self, rng):
        for _ in range(50):
            size = int(rng.integers(1, 25))
            scores = np.round(rng.lognormal(0, 1, size=size), 1)
            budget = int(rng.integers(1, size + 1))
            base = select_top_b(scores, budget)
            for g in range(1, min(size, budget) + 1):
                cover = cover_segment(scores, seg(0, size), budget, g)
                r = fidelity_ratio(scores, cover, base)
                assert 0.0 <= r <= 1.0 + 1e-12


class TestSearchConfig:
    @pytest.mark.parametrize("kwargs", [
        {"budget": 0},
        {"budget": 1, "tau": 0.0},
        {"budget": 1, "tau": 1.1},
        {"budget": 1, "g_max": 0},
        {"budget": 1, "ladder": (2, 3)},
        {"budget": 1, "ladder": (1, 3, 3)},
        {"budget": 1, "ladder": ()},
    ])
    def test_rejects(self, kwargs):
        with pytest.raises(ConfigError):
            SearchConfig(**kwargs)

    def test_defaults(self):
        cfg = SearchConfig(budget=96)
        assert cfg.tau == 0.85
        assert cfg.g_max == 13
        assert cfg.ladder == (1, 2, 3, 5, 7, 9, 11, 13)
        assert not cfg.dense_range


class TestCompress:
    def test_saturated_budget_keeps_everything(self, rng):
        trace = random_trace(rng, max_t=30)
        plan = compress(trace, search_cfg=SearchConfig(budget=10 ** 6))
        assert plan.retained == list(range(trace.compressible_len))

    def test_reduction_to_raw_top_b(self, rng):
        for _ in range(20):
            trace = random_trace(rng)
            budget = int(rng.integers(1, trace.compressible_len + 2))
            plan = compress(
                trace,
                scoring_cfg=ScoringConfig(alpha=0.0, eta=0.0),
                search_cfg=SearchConfig(budget=budget, tau=1.0),
            )
            raw = window_scores(head_mean(trace))
            assert plan.retained == select_top_b(raw, budget)

    def test_exact_budget(self, rng):
        for _ in range(60):
            trace = random_trace(rng)
            budget = int(rng.integers(1, 2 * trace.compressible_len + 2))
            plan = compress(trace, search_cfg=SearchConfig(budget=budget))
            t = trace.compressible_len
            assert len(plan.retained) == min(budget, t)
            assert len(set(plan.retained)) == len(plan.retained)
            assert all(0 <= i < t for i in plan.retained)
            assert sum(s.budget for s in plan.segments) == min(budget, t)

    def test_two_segment_example_vs_oracle(self):
        # two segments, implicit budgets (2, 1), every candidate evaluated
        arr = np.array([[[9.0, 8.0, 1.0, 7.0, 2.0, 2.0]]])
        texts = ["a", "b", "c.", "d", "e", "f", "w"]
        trace = make_trace(arr, texts=texts, window=1)
        plan = compress(
            trace,
            scoring_cfg=ScoringConfig(alpha=0.0, eta=0.0),
            search_cfg=SearchConfig(budget=3, tau=0.85),
        )
        scores = list(window_scores(head_mean(trace)))
        top = oracle_top_b(scores, 3)
        expected = set()
        for lo, hi in ((0, 3), (3, 6)):
            base = {i for i in top if lo <= i < hi}
            _, kept = oracle_search(
                scores, lo, hi, len(base), base, 0.85, 13,
                ladder=[1, 2, 3, 5, 7, 9, 11, 13],
            )
            expected |= kept
        assert set(plan.retained) == expected

    def test_window_tokens_recorded(self, rng):
        trace = random_trace(rng)
        plan = compress(trace, search_cfg=SearchConfig(budget=4))
        t = trace.compressible_len
        assert plan.window_tokens == list(range(t, len(trace.tokens)))

    def test_deterministic(self, rng):
        trace = random_trace(rng)
        a = compress(trace, search_cfg=SearchConfig(budget=7))
        b = compress(trace, search_cfg=SearchConfig(budget=7))
        assert a == b

    @given(st.integers(0, 2**32 - 1), st.integers(1, 80))
    @settings(max_examples=50, deadline=None)
    def test_exact_budget_property(self, seed, budget):
        trace = random_trace(np.random.default_rng(seed), max_t=40)
        plan = compress(trace, search_cfg=SearchConfig(budget=budget))
        assert len(plan.retained) == min(budget, trace.compressible_len)
