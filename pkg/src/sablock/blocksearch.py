"""Budget-driven adaptive block-size search.

Given segment-adjusted token scores, the global budget B is first spent
on the Top-B tokens across the whole compressible region; each segment's
implicit budget is the number of its tokens that made the cut.  Within a
segment, candidate block sizes are tried from largest to smallest: the
segment is partitioned into consecutive blocks, whole blocks are taken in
descending score order while they fit the implicit budget, the first
non-fitting block is refined token-by-token, and the resulting retained
mass is compared against the token-level optimum.  The largest block size
whose retained-mass ratio clears the fidelity threshold wins; block size
1 reproduces the token-level optimum exactly, so the search always
terminates.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from .errors import ConfigError
from .scoring import ScoringConfig, score_trace
from .segment import (
    DEFAULT_DELIMITERS,
    DEFAULT_MAX_SEGMENT_LEN,
    Segment,
    segment_tokens,
)

if TYPE_CHECKING:
    from .trace import AttentionTrace

__all__ = [
    "DEFAULT_LADDER",
    "SearchConfig",
    "SegmentPlan",
    "CompressionPlan",
    "select_top_b",
    "implicit_budgets",
    "cover_segment",
    "fidelity_ratio",
    "search_segment",
    "compress",
]

DEFAULT_LADDER = (1, 2, 3, 5, 7, 9, 11, 13)


@dataclass(frozen=True)
class SearchConfig:
    """Budget and block-size search knobs.

    ``ladder`` is the candidate block-size set; with ``dense_range`` every
    integer up to the feasible maximum is considered instead.  ``tau`` in
    (0, 1] is the minimum acceptable ratio of retained score mass to the
    token-level optimum; tau <= 1 guarantees the search terminates because
    block size 1 always achieves ratio 1.
    """

    budget: int
    tau: float = 0.85
    g_max: int = 13
    ladder: tuple[int, ...] = DEFAULT_LADDER
    dense_range: bool = False

    def __post_init__(self) -> None:
        if self.budget < 1:
            raise ConfigError(f"budget must be >= 1, got {self.budget}")
        if not (0.0 < self.tau <= 1.0):
            raise ConfigError(f"tau must be in (0, 1], got {self.tau}")
        if self.g_max < 1:
            raise ConfigError(f"g_max must be >= 1, got {self.g_max}")
        ladder = tuple(self.ladder)
        if not ladder or ladder[0] != 1:
            raise ConfigError("ladder must start at block size 1")
        if any(b <= a for a, b in zip(ladder, ladder[1:])):
            raise ConfigError(f"ladder must be strictly ascending, got {ladder}")
        object.__setattr__(self, "ladder", ladder)


@dataclass(frozen=True)
class SegmentPlan:
    """Per-segment outcome: implicit budget, chosen block size, fidelity."""

    index: int
    start: int
    end: int
    budget: int
    block_size: int
    fidelity: float
    retained: tuple[int, ...]


@dataclass
class CompressionPlan:
    """Full eviction decision for one trace."""

    segments: list[SegmentPlan]
    retained: list[int]
    window_tokens: list[int]
    budget: int
    config: dict = field(default_factory=dict)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CompressionPlan):
            return NotImplemented
        return (
            self.segments == other.segments
            and self.retained == other.retained
            and self.window_tokens == other.window_tokens
            and self.budget == other.budget
            and self.config == other.config
        )


def _stable_top(scores: np.ndarray, count: int) -> np.ndarray:
    """Indices of the `count` largest scores, ties toward smaller index."""
    order = np.argsort(-scores, kind="stable")
    return order[:count]


def select_top_b(adjusted: np.ndarray, budget: int) -> list[int]:
    """Top-B token indices over the whole region, sorted ascending."""
    if budget < 1:
        raise ConfigError(f"budget must be >= 1, got {budget}")
    count = min(budget, len(adjusted))
    return sorted(int(i) for i in _stable_top(adjusted, count))


def implicit_budgets(top_b: list[int], segments: list[Segment]) -> list[int]:
    """Number of Top-B tokens landing in each segment."""
    starts = np.array([seg.start for seg in segments])
    owners = np.searchsorted(starts, np.asarray(top_b, dtype=np.int64), side="right") - 1
    counts = np.bincount(owners, minlength=len(segments))
    return [int(c) for c in counts]


def _block_starts(length: int, g: int) -> np.ndarray:
    return np.arange(0, length, g)


def cover_segment(
    adjusted: np.ndarray, seg: Segment, seg_budget: int, g: int
) -> list[int]:
    """Retained indices for one segment at block size g, sorted ascending.

    The segment is split into consecutive g-sized blocks anchored at its
    start (the last block may be shorter).  Whole blocks are taken in
    descending score-sum order (ties toward the leftmost block) while they
    fit the budget; the first block that does not fit contributes its
    top-scoring tokens to land on the budget exactly.
    """
    size = len(seg)
    if seg_budget > size:
        raise ConfigError(
            f"segment budget {seg_budget} exceeds segment size {size}"
        )
    if g < 1 or g > min(size, seg_budget):
        raise ConfigError(
            f"block size {g} outside [1, min(|S|={size}, b={seg_budget})]"
        )
    sub = adjusted[seg.start : seg.end]
    starts = _block_starts(size, g)
    sums = np.add.reduceat(sub, starts)
    order = np.argsort(-sums, kind="stable")

    taken: list[int] = []
    filled = 0
    for m in order:
        lo = int(starts[m])
        hi = min(lo + g, size)
        block_len = hi - lo
        if filled + block_len <= seg_budget:
            taken.extend(range(seg.start + lo, seg.start + hi))
            filled += block_len
        else:
            remaining = seg_budget - filled
            block_vals = sub[lo:hi]
            top_local = _stable_top(block_vals, remaining)
            taken.extend(seg.start + lo + int(i) for i in top_local)
            break
    return sorted(taken)


def fidelity_ratio(
    adjusted: np.ndarray, cover: list[int], base: list[int]
) -> float:
    """Retained score mass relative to the token-level optimum.

    Both index sets are summed in ascending-index order so identical sets
    produce bit-identical sums (ratio exactly 1.0).  An empty/zero-mass
    baseline means there is nothing to preserve: ratio 1.
    """
    denom = float(adjusted[np.asarray(sorted(base), dtype=np.int64)].sum()) if base else 0.0
    if denom == 0.0:
        return 1.0
    numer = float(adjusted[np.asarray(sorted(cover), dtype=np.int64)].sum()) if cover else 0.0
    return numer / denom


def _candidate_sizes(cfg: SearchConfig, limit: int) -> list[int]:
    if cfg.dense_range:
        return list(range(1, limit + 1))
    return [g for g in cfg.ladder if g <= limit]


def search_segment(
    adjusted: np.ndarray,
    seg: Segment,
    seg_budget: int,
    base: list[int],
    cfg: SearchConfig,
) -> SegmentPlan:
    """Largest feasible block size whose cover clears the fidelity threshold.

    Candidates are scanned in descending order and the first acceptable one
    is returned, which equals the maximum acceptable candidate because the
    cover at smaller sizes can only get closer to the token-level optimum;
    block size 1 reproduces it exactly, so a plan always exists.
    """
    if seg_budget == 0:
        return SegmentPlan(
            index=seg.index,
            start=seg.start,
            end=seg.end,
            budget=0,
            block_size=1,
            fidelity=1.0,
            retained=(),
        )
    limit = min(len(seg), seg_budget, cfg.g_max)
    for g in reversed(_candidate_sizes(cfg, limit)):
        cover = cover_segment(adjusted, seg, seg_budget, g)
        ratio = fidelity_ratio(adjusted, cover, base)
        if ratio >= cfg.tau:
            return SegmentPlan(
                index=seg.index,
                start=seg.start,
                end=seg.end,
                budget=seg_budget,
                block_size=g,
                fidelity=ratio,
                retained=tuple(cover),
            )
    raise AssertionError("unreachable: block size 1 always meets the threshold")


def compress(
    trace: AttentionTrace,
    scoring_cfg: ScoringConfig = ScoringConfig(),
    search_cfg: SearchConfig = SearchConfig(budget=96),
    delimiters: frozenset[str] | set[str] | str = DEFAULT_DELIMITERS,
    max_len: int = DEFAULT_MAX_SEGMENT_LEN,
) -> CompressionPlan:
    """End-to-end eviction plan: segment, score, Top-B, per-segment search.

    The retained set is the disjoint union of per-segment covers and has
    exactly min(budget, T) entries; observation-window tokens are recorded
    separately and always kept.
    """
    segments = segment_tokens(trace, delimiters, max_len)
    scores = score_trace(trace, segments, scoring_cfg)
    top_b = select_top_b(scores.adjusted, search_cfg.budget)
    budgets = implicit_budgets(top_b, segments)

    bases: list[list[int]] = [[] for _ in segments]
    starts = np.array([seg.start for seg in segments])
    for t in top_b:
        k = int(np.searchsorted(starts, t, side="right")) - 1
        bases[k].append(t)

    plans = [
        search_segment(scores.adjusted, seg, budgets[k], bases[k], search_cfg)
        for k, seg in enumerate(segments)
    ]
    retained = sorted(i for plan in plans for i in plan.retained)
    config = {
        "budget": search_cfg.budget,
        "tau": search_cfg.tau,
        "g_max": search_cfg.g_max,
        "ladder": list(search_cfg.ladder),
        "dense_range": search_cfg.dense_range,
        "alpha": scoring_cfg.alpha,
        "eta": scoring_cfg.eta,
        "epsilon": scoring_cfg.epsilon,
        "delimiters": "".join(sorted(frozenset(delimiters))),
        "max_seg_len": max_len,
    }
    return CompressionPlan(
        segments=plans,
        retained=retained,
        window_tokens=trace.window_token_indices,
        budget=search_cfg.budget,
        config=config,
    )
