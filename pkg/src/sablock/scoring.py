"""Segment-guided token scoring.

Pipeline: average attention over heads, sum over window queries to get a
raw per-token score, compute per-segment importance (mean score) and
diversity (mean entropy of each token's normalized attention column over
the window), combine them into a segment weight, and scale every token's
score by its segment's weight.  The scaling never reorders tokens within
a segment.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .segment import Segment

__all__ = [
    "ScoringConfig",
    "ScoreSet",
    "head_mean",
    "window_scores",
    "segment_stats",
    "segment_weights",
    "adjusted_scores",
    "score_trace",
]


@dataclass(frozen=True)
class ScoringConfig:
    """Hyperparameters for segment-guided scoring.

    alpha scales how strongly segment weights influence token scores, eta
    scales the diversity contribution inside the segment weight, epsilon
    smooths the entropy logarithm.
    """

    alpha: float = 0.9
    eta: float = 1.0
    epsilon: float = 1e-6

    def __post_init__(self) -> None:
        if self.alpha < 0.0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        if self.eta < 0.0:
            raise ValueError(f"eta must be >= 0, got {self.eta}")
        if self.epsilon <= 0.0:
            raise ValueError(f"epsilon must be > 0, got {self.epsilon}")


@dataclass
class ScoreSet:
    """All per-token and per-segment scoring outputs for one trace."""

    head_mean: np.ndarray      # (window, T)
    raw: np.ndarray            # (T,)
    adjusted: np.ndarray       # (T,)
    seg_importance: np.ndarray  # (K,)
    seg_diversity: np.ndarray   # (K,)
    seg_weight: np.ndarray      # (K,)


def head_mean(trace) -> np.ndarray:
    """Mean attention across heads: (window, T) matrix."""
    return trace.attention.mean(axis=0)


def window_scores(mean_attention: np.ndarray) -> np.ndarray:
    """Raw token score: sum of head-mean attention over all window queries."""
    return mean_attention.sum(axis=0)


def _column_entropies(mean_attention: np.ndarray, epsilon: float) -> np.ndarray:
    """Entropy of each token's attention distribution over window queries.

    Columns are normalized to sum to 1 before the entropy; an all-zero
    column is left as zeros and contributes zero entropy.  The epsilon
    inside the log can push a one-hot column's entropy a hair below zero,
    so values are clamped at 0 to keep diversity nonnegative.
    """
    col_sums = mean_attention.sum(axis=0)
    safe = np.where(col_sums > 0.0, col_sums, 1.0)
    normalized = mean_attention / safe
    entropy = -(normalized * np.log(normalized + epsilon)).sum(axis=0)
    entropy[col_sums <= 0.0] = 0.0
    return np.maximum(entropy, 0.0)


def segment_stats(
    mean_attention: np.ndarray,
    raw: np.ndarray,
    segments: list[Segment],
    epsilon: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Per-segment importance (mean raw score) and diversity (mean entropy)."""
    entropies = _column_entropies(mean_attention, epsilon)
    importance = np.empty(len(segments))
    diversity = np.empty(len(segments))
    for k, seg in enumerate(segments):
        importance[k] = raw[seg.start : seg.end].mean()
        diversity[k] = entropies[seg.start : seg.end].mean()
    return importance, diversity


def segment_weights(
    importance: np.ndarray, diversity: np.ndarray, eta: float
) -> np.ndarray:
    """Segment weight: importance scaled up by 1 + eta * diversity."""
    return importance * (1.0 + eta * diversity)


def adjusted_scores(
    raw: np.ndarray,
    weights: np.ndarray,
    segments: list[Segment],
    alpha: float,
) -> np.ndarray:
    """Scale each token's raw score by 1 + alpha * (its segment's weight).

    The factor is constant and positive within a segment, so within-segment
    ordering of scores is preserved.
    """
    factors = np.empty_like(raw)
    for k, seg in enumerate(segments):
        factors[seg.start : seg.end] = 1.0 + alpha * weights[k]
    return raw * factors


def score_trace(
    trace, segments: list[Segment], config: ScoringConfig = ScoringConfig()
) -> ScoreSet:
    """Run the full scoring pipeline on one trace."""
    mean_attention = head_mean(trace)
    raw = window_scores(mean_attention)
    importance, diversity = segment_stats(
        mean_attention, raw, segments, config.epsilon
    )
    weights = segment_weights(importance, diversity, config.eta)
    adjusted = adjusted_scores(raw, weights, segments, config.alpha)
    return ScoreSet(
        head_mean=mean_attention,
        raw=raw,
        adjusted=adjusted,
        seg_importance=importance,
        seg_diversity=diversity,
        seg_weight=weights,
    )
