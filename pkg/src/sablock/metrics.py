"""Diagnostic metrics: fragmentation, redundancy, fidelity, needle recall,
block-size distributions, and the analytic KV-cache byte estimate."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable, Sequence

import numpy as np

from .blocksearch import _stable_top
from .errors import MetricError
from .segment import Segment

if TYPE_CHECKING:
    from .blocksearch import CompressionPlan

__all__ = [
    "MetricReport",
    "BlockSizeHistogram",
    "cross_sentence_rate",
    "redundancy_rate",
    "retention_fidelity",
    "needle_recall",
    "blocksize_histogram",
    "kv_bytes_estimate",
    "spearman",
]


@dataclass
class MetricReport:
    """Named scalar metrics plus an optional block-size histogram."""

    metrics: dict[str, float] = field(default_factory=dict)
    histogram: dict[int, int] | None = None
    config: dict = field(default_factory=dict)


@dataclass(frozen=True)
class BlockSizeHistogram:
    """Counts of chosen block sizes and their mean over planned segments."""

    counts: dict[int, int]
    mean: float


def cross_sentence_rate(segments: list[Segment], g: int, region_len: int) -> float:
    """Fraction of fixed-size g-blocks that span more than one segment."""
    if g < 1:
        raise MetricError(f"block size must be >= 1, got {g}")
    if region_len < 1:
        raise MetricError(f"region length must be >= 1, got {region_len}")
    boundaries = [seg.start for seg in segments[1:]]
    total = 0
    crossing = 0
    for lo in range(0, region_len, g):
        hi = min(lo + g, region_len)
        total += 1
        if any(lo < b < hi for b in boundaries):
            crossing += 1
    return crossing / total


def _top_mass(scores: np.ndarray, budget: int) -> float:
    count = min(budget, len(scores))
    top = np.sort(_stable_top(scores, count))
    return float(scores[top].sum())


def retention_fidelity(
    scores: np.ndarray, retained: Iterable[int], budget: int
) -> float:
    """Retained score mass relative to the top-scoring set of the same size.

    1.0 when there is no score mass to preserve.
    """
    denom = _top_mass(scores, budget)
    if denom == 0.0:
        return 1.0
    idx = np.asarray(sorted(retained), dtype=np.int64)
    numer = float(scores[idx].sum()) if len(idx) else 0.0
    return min(max(numer / denom, 0.0), 1.0)


def redundancy_rate(
    scores: np.ndarray, retained: Iterable[int], budget: int
) -> float:
    """Score mass sacrificed versus token-level top-budget selection."""
    return 1.0 - retention_fidelity(scores, retained, budget)


def needle_recall(retained: Iterable[int], span: tuple[int, int]) -> float:
    """Fraction of the needle span's token indices that were retained."""
    start, length = span
    if length < 1:
        raise MetricError(f"needle length must be >= 1, got {length}")
    needle = set(range(start, start + length))
    return len(needle & set(retained)) / length


def blocksize_histogram(plans: Sequence[CompressionPlan]) -> BlockSizeHistogram:
    """Distribution of chosen block sizes over all budgeted segments."""
    if not plans:
        raise MetricError("blocksize_histogram needs at least one plan")
    sizes = [
        seg.block_size for plan in plans for seg in plan.segments if seg.budget > 0
    ]
    counts = dict(sorted(Counter(sizes).items()))
    mean = float(np.mean(sizes)) if sizes else float("nan")
    return BlockSizeHistogram(counts=counts, mean=mean)


def kv_bytes_estimate(
    batch: int,
    layers: int,
    seq_len: int,
    heads: int,
    head_dim: int,
    bytes_per_value: int,
) -> int:
    """Analytic KV-cache size: 2 x batch x layers x seq x heads x dim x bytes."""
    args = (batch, layers, seq_len, heads, head_dim, bytes_per_value)
    for name, value in zip(
        ("batch", "layers", "seq_len", "heads", "head_dim", "bytes_per_value"), args
    ):
        if value < 1:
            raise MetricError(f"{name} must be a positive integer, got {value}")
    return 2 * batch * layers * seq_len * heads * head_dim * bytes_per_value


def _average_ranks(values: Sequence[float]) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    order = np.argsort(arr, kind="stable")
    ranks = np.empty(len(arr))
    i = 0
    while i < len(arr):
        j = i
        while j + 1 < len(arr) and arr[order[j + 1]] == arr[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def spearman(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Spearman rank correlation with average ranks for ties."""
    if len(xs) != len(ys) or len(xs) < 2:
        raise MetricError("spearman needs two equal-length series of >= 2 points")
    rx, ry = _average_ranks(xs), _average_ranks(ys)
    rx -= rx.mean()
    ry -= ry.mean()
    denom = float(np.sqrt((rx**2).sum() * (ry**2).sum()))
    if denom == 0.0:
        return 0.0
    return float((rx * ry).sum() / denom)
