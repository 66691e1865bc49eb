"""Baseline eviction policies behind a common interface.

Every policy maps (trace, budget) to a retained index set of exactly
min(budget, T) compressible-region tokens; observation-window tokens are
always kept separately.  The baselines are re-expressions on the shared
window-attention trace model: cumulative-attention scoring here uses the
same observation-window accumulation as the window top-k policy, because
a single-snapshot trace has no decode-time history.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable

import numpy as np

from .blocksearch import SearchConfig, compress, select_top_b
from .errors import ConfigError
from .scoring import ScoringConfig, head_mean, window_scores
from .segment import DEFAULT_DELIMITERS, DEFAULT_MAX_SEGMENT_LEN, segment_tokens

if TYPE_CHECKING:
    from .trace import AttentionTrace

__all__ = [
    "PolicyResult",
    "POLICY_NAMES",
    "evict_sliding_window",
    "evict_cumulative",
    "evict_window_topk",
    "evict_fixed_block",
    "evict_sentence",
    "evict_adaptive",
    "parse_policy",
    "run_policy",
]

POLICY_NAMES = ("streaming", "h2o", "snapkv", "chunkkv:<g>", "sentencekv", "sablock")


@dataclass
class PolicyResult:
    """Outcome of one eviction policy on one trace."""

    policy: str
    retained: list[int]
    meta: dict | None = None


def _effective_budget(trace: AttentionTrace, budget: int) -> int:
    if budget < 1:
        raise ConfigError(f"budget must be >= 1, got {budget}")
    return min(budget, trace.compressible_len)


def evict_sliding_window(
    trace: AttentionTrace, budget: int, n_init: int = 4
) -> PolicyResult:
    """Keep the first n_init and the most recent compressible tokens."""
    if n_init < 0:
        raise ConfigError(f"n_init must be >= 0, got {n_init}")
    if n_init > budget:
        raise ConfigError(f"n_init={n_init} exceeds budget={budget}")
    t = trace.compressible_len
    b = _effective_budget(trace, budget)
    if b >= t:
        retained = list(range(t))
    else:
        head = min(n_init, b)
        retained = list(range(head)) + list(range(t - (b - head), t))
    return PolicyResult(policy="streaming", retained=retained, meta={"n_init": n_init})


def evict_cumulative(trace: AttentionTrace, budget: int) -> PolicyResult:
    """Top tokens by summed head-mean attention over all available queries."""
    b = _effective_budget(trace, budget)
    scores = window_scores(head_mean(trace))
    return PolicyResult(policy="h2o", retained=select_top_b(scores, b))


def evict_window_topk(trace: AttentionTrace, budget: int) -> PolicyResult:
    """Top tokens by observation-window score, no blocks, no weighting."""
    b = _effective_budget(trace, budget)
    scores = window_scores(head_mean(trace))
    return PolicyResult(policy="snapkv", retained=select_top_b(scores, b))


def _greedy_spans(
    scores: np.ndarray,
    spans: list[tuple[int, int]],
    budget: int,
    rank_key: Callable[[np.ndarray], float],
) -> list[int]:
    """Take whole spans in descending rank order while they fit the budget.

    The first span that does not fit contributes its top-scoring tokens to
    land on the budget exactly, and the scan stops there (mirroring the
    adaptive search's refinement rule so all policies spend the budget the
    same way).  Ties rank the leftmost span first.
    """
    ranks = np.array([rank_key(scores[lo:hi]) for lo, hi in spans])
    order = np.argsort(-ranks, kind="stable")
    taken: list[int] = []
    filled = 0
    for m in order:
        lo, hi = spans[m]
        size = hi - lo
        if filled + size <= budget:
            taken.extend(range(lo, hi))
            filled += size
        else:
            remaining = budget - filled
            top_local = np.argsort(-scores[lo:hi], kind="stable")[:remaining]
            taken.extend(lo + int(i) for i in top_local)
            break
    return sorted(taken)


def evict_fixed_block(trace: AttentionTrace, budget: int, g: int) -> PolicyResult:
    """Greedy whole-block retention over a fixed-size partition of the region."""
    if g < 1:
        raise ConfigError(f"block size must be >= 1, got {g}")
    t = trace.compressible_len
    b = _effective_budget(trace, budget)
    scores = window_scores(head_mean(trace))
    spans = [(lo, min(lo + g, t)) for lo in range(0, t, g)]
    retained = _greedy_spans(scores, spans, b, rank_key=np.sum)
    return PolicyResult(policy=f"chunkkv:{g}", retained=retained, meta={"g": g})


def evict_sentence(
    trace: AttentionTrace,
    budget: int,
    delimiters: frozenset[str] | set[str] | str = DEFAULT_DELIMITERS,
    max_len: int = DEFAULT_MAX_SEGMENT_LEN,
) -> PolicyResult:
    """Greedy whole-segment retention, segments ranked by mean score."""
    b = _effective_budget(trace, budget)
    scores = window_scores(head_mean(trace))
    segments = segment_tokens(trace, delimiters, max_len)
    spans = [(seg.start, seg.end) for seg in segments]
    retained = _greedy_spans(scores, spans, b, rank_key=np.mean)
    return PolicyResult(policy="sentencekv", retained=retained)


def evict_adaptive(
    trace: AttentionTrace,
    budget: int,
    scoring_cfg: ScoringConfig = ScoringConfig(),
    search_cfg: SearchConfig | None = None,
    delimiters: frozenset[str] | set[str] | str = DEFAULT_DELIMITERS,
    max_len: int = DEFAULT_MAX_SEGMENT_LEN,
) -> PolicyResult:
    """Segment-guided scoring plus adaptive block-size search."""
    cfg = search_cfg if search_cfg is not None else SearchConfig(budget=budget)
    if cfg.budget != budget:
        cfg = SearchConfig(
            budget=budget,
            tau=cfg.tau,
            g_max=cfg.g_max,
            ladder=cfg.ladder,
            dense_range=cfg.dense_range,
        )
    plan = compress(trace, scoring_cfg, cfg, delimiters, max_len)
    sizes = [s.block_size for s in plan.segments if s.budget > 0]
    meta = {
        "plan": plan,
        "mean_block_size": float(np.mean(sizes)) if sizes else float("nan"),
    }
    return PolicyResult(policy="sablock", retained=list(plan.retained), meta=meta)


def parse_policy(name: str) -> tuple[str, dict]:
    """Split a CLI policy name like ``chunkkv:7`` into (kind, params)."""
    base, _, arg = name.partition(":")
    base = base.strip().lower()
    if base in ("streaming", "h2o", "snapkv", "sentencekv", "sablock"):
        if arg:
            raise ConfigError(f"policy '{base}' takes no parameter")
        return base, {}
    if base == "chunkkv":
        if not arg:
            raise ConfigError("policy 'chunkkv' needs a block size, e.g. chunkkv:7")
        try:
            g = int(arg)
        except ValueError:
            raise ConfigError(f"invalid chunkkv block size {arg!r}") from None
        return base, {"g": g}
    raise ConfigError(
        f"unknown policy {name!r}; valid names: {', '.join(POLICY_NAMES)}"
    )


def run_policy(
    name: str,
    trace: AttentionTrace,
    budget: int,
    scoring_cfg: ScoringConfig = ScoringConfig(),
    search_cfg: SearchConfig | None = None,
    delimiters: frozenset[str] | set[str] | str = DEFAULT_DELIMITERS,
    max_len: int = DEFAULT_MAX_SEGMENT_LEN,
    n_init: int | None = None,
) -> PolicyResult:
    """Dispatch a policy by CLI name."""
    kind, params = parse_policy(name)
    if kind == "streaming":
        init = n_init if n_init is not None else min(4, budget)
        return evict_sliding_window(trace, budget, n_init=init)
    if kind == "h2o":
        return evict_cumulative(trace, budget)
    if kind == "snapkv":
        return evict_window_topk(trace, budget)
    if kind == "chunkkv":
        return evict_fixed_block(trace, budget, params["g"])
    if kind == "sentencekv":
        return evict_sentence(trace, budget, delimiters, max_len)
    return evict_adaptive(trace, budget, scoring_cfg, search_cfg, delimiters, max_len)
