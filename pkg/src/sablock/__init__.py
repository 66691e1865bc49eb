"""KV-cache eviction with semantic segmentation and adaptive block sizes.

The library operates on window-attention trace files: segment the
compressible region at punctuation, score tokens through segment-guided
weighting, and pick each segment's block size by a budget-driven fidelity
search.  Baseline policies, diagnostic metrics, and a CLI harness round
out the toolkit.
"""

__version__ = "0.1.0"

from .blocksearch import (
    DEFAULT_LADDER,
    CompressionPlan,
    SearchConfig,
    SegmentPlan,
    compress,
    cover_segment,
    fidelity_ratio,
    implicit_budgets,
    search_segment,
    select_top_b,
)
from .errors import (
    ConfigError,
    MetricError,
    ParseError,
    SablockError,
    SpecError,
    ValidationError,
)
from .metrics import (
    BlockSizeHistogram,
    MetricReport,
    blocksize_histogram,
    cross_sentence_rate,
    kv_bytes_estimate,
    needle_recall,
    redundancy_rate,
    retention_fidelity,
    spearman,
)
from .policies import (
    POLICY_NAMES,
    PolicyResult,
    evict_adaptive,
    evict_cumulative,
    evict_fixed_block,
    evict_sentence,
    evict_sliding_window,
    evict_window_topk,
    parse_policy,
    run_policy,
)
from .scoring import (
    ScoreSet,
    ScoringConfig,
    adjusted_scores,
    head_mean,
    score_trace,
    segment_stats,
    segment_weights,
    window_scores,
)
from .segment import (
    DEFAULT_DELIMITERS,
    DEFAULT_MAX_SEGMENT_LEN,
    Segment,
    segment_of,
    segment_tokens,
)
from .trace import (
    AttentionTrace,
    SyntheticSpec,
    Token,
    generate_synthetic,
    parse_trace,
    read_plan,
    serialize_trace,
    validate_trace,
    write_plan,
)

__all__ = [
    "__version__",
    "AttentionTrace",
    "BlockSizeHistogram",
    "CompressionPlan",
    "ConfigError",
    "DEFAULT_DELIMITERS",
    "DEFAULT_LADDER",
    "DEFAULT_MAX_SEGMENT_LEN",
    "MetricError",
    "MetricReport",
    "POLICY_NAMES",
    "ParseError",
    "PolicyResult",
    "SablockError",
    "ScoreSet",
    "ScoringConfig",
    "SearchConfig",
    "Segment",
    "SegmentPlan",
    "SpecError",
    "SyntheticSpec",
    "Token",
    "ValidationError",
    "adjusted_scores",
    "blocksize_histogram",
    "compress",
    "cover_segment",
    "cross_sentence_rate",
    "evict_adaptive",
    "evict_cumulative",
    "evict_fixed_block",
    "evict_sentence",
    "evict_sliding_window",
    "evict_window_topk",
    "fidelity_ratio",
    "generate_synthetic",
    "head_mean",
    "implicit_budgets",
    "kv_bytes_estimate",
    "needle_recall",
    "parse_policy",
    "parse_trace",
    "read_plan",
    "redundancy_rate",
    "retention_fidelity",
    "run_policy",
    "score_trace",
    "search_segment",
    "segment_of",
    "segment_stats",
    "segment_tokens",
    "segment_weights",
    "select_top_b",
    "serialize_trace",
    "spearman",
    "validate_trace",
    "window_scores",
    "write_plan",
]
