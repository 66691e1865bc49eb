"""Attention-trace data model, file formats, and the synthetic generator.

A trace is one layer's window-attention snapshot: a dense nonnegative
tensor ``attention[h][q][t]`` holding the weight from observation-window
query ``q`` to compressible key ``t``, plus the token texts.  The last
``window`` tokens form the observation window; everything before them is
the compressible region of length ``T = len(tokens) - window``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .blocksearch import CompressionPlan, SegmentPlan
from .errors import ParseError, SpecError, ValidationError

__all__ = [
    "Token",
    "AttentionTrace",
    "SyntheticSpec",
    "parse_trace",
    "serialize_trace",
    "generate_synthetic",
    "validate_trace",
    "write_plan",
    "read_plan",
]

TRACE_VERSION = 1
PLAN_VERSION = 1

_ALPHABET = "abcdefghijklmnopqrstuvwxyz"


@dataclass(frozen=True)
class Token:
    """One prompt token: its text and, optionally, its byte offset."""

    text: str
    byte_offset: int | None = None


@dataclass(eq=False)
class AttentionTrace:
    """Window-attention snapshot for one layer's head group.

    ``attention`` has shape ``(num_heads, window, T)`` and is float64 in
    memory regardless of on-disk precision.  ``meta`` is an optional
    free-form dict preserved through serialization (generator provenance,
    needle span, run manifests).
    """

    num_heads: int
    window: int
    tokens: list[Token]
    attention: np.ndarray
    meta: dict | None = None

    @property
    def compressible_len(self) -> int:
        """T: number of tokens eligible for eviction."""
        return len(self.tokens) - self.window

    @property
    def window_token_indices(self) -> list[int]:
        """Absolute indices of the observation-window tokens."""
        return list(range(self.compressible_len, len(self.tokens)))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, AttentionTrace):
            return NotImplemented
        return (
            self.num_heads == other.num_heads
            and self.window == other.window
            and self.tokens == other.tokens
            and np.array_equal(self.attention, other.attention)
            and self.meta == other.meta
        )


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for a deterministic synthetic trace.

    ``punctuation_period`` is the mean number of tokens between
    delimiter-terminated tokens; ``skew`` concentrates per-row attention
    mass on few heavy-hitter columns (0 = uniform rows).  A needle span,
    when set, is written as a self-contained sentence (delimiter-bounded)
    whose columns receive at least ``needle_boost`` times the median
    non-needle column mass.
    """

    total_tokens: int
    num_heads: int = 4
    window: int = 8
    needle_start: int | None = None
    needle_len: int | None = None
    needle_boost: float = 50.0
    punctuation_period: float = 8.0
    skew: float = 1.0
    seed: int = 0

    def validate(self) -> None:
        if self.total_tokens < self.window + 1:
            raise SpecError(
                f"total_tokens={self.total_tokens} leaves no compressible region "
                f"(window={self.window})"
            )
        if self.num_heads < 1:
            raise SpecError(f"num_heads must be >= 1, got {self.num_heads}")
        if self.window < 1:
            raise SpecError(f"window must be >= 1, got {self.window}")
        if self.punctuation_period < 1.0:
            raise SpecError(
                f"punctuation_period must be >= 1, got {self.punctuation_period}"
            )
        if self.skew < 0.0:
            raise SpecError(f"skew must be >= 0, got {self.skew}")
        if self.needle_boost <= 0.0:
            raise SpecError(f"needle_boost must be > 0, got {self.needle_boost}")
        if (self.needle_start is None) != (self.needle_len is None):
            raise SpecError("needle_start and needle_len must be set together")
        if self.needle_start is not None:
            t = self.total_tokens - self.window
            if self.needle_len < 1:
                raise SpecError(f"needle_len must be >= 1, got {self.needle_len}")
            if self.needle_start < 0 or self.needle_start + self.needle_len > t:
                raise SpecError(
                    f"needle span [{self.needle_start}, "
                    f"{self.needle_start + self.needle_len}) outside compressible "
                    f"region [0, {t})"
                )


def validate_trace(trace: AttentionTrace) -> None:
    """Check every AttentionTrace invariant, naming the first violation."""
    if trace.num_heads < 1:
        raise ValidationError(f"num_heads must be >= 1, got {trace.num_heads}")
    if trace.window < 1:
        raise ValidationError(f"window must be >= 1, got {trace.window}")
    t = len(trace.tokens) - trace.window
    if t < 1:
        raise ValidationError(
            f"window={trace.window} with {len(trace.tokens)} tokens leaves "
            f"T={t}; need T >= 1"
        )
    for i, tok in enumerate(trace.tokens):
        if not isinstance(tok.text, str):
            raise ValidationError(f"tokens[{i}].text is not a string")
    arr = trace.attention
    expected = (trace.num_heads, trace.window, t)
    if arr.shape != expected:
        raise ValidationError(
            f"attention has shape {tuple(arr.shape)}, expected {expected}"
        )
    bad = ~(np.isfinite(arr) & (arr >= 0.0))
    if bad.any():
        h, q, k = (int(v) for v in np.argwhere(bad)[0])
        raise ValidationError(
            f"attention[{h}][{q}][{k}] = {arr[h, q, k]!r} is not a finite "
            f"nonnegative value"
        )


def _require(data: dict, key: str, kind: type) -> object:
    if key not in data:
        raise ParseError(f"trace file is missing required field '{key}'")
    value = data[key]
    if kind is int and isinstance(value, bool):
        raise ParseError(f"field '{key}' must be {kind.__name__}")
    if not isinstance(value, kind):
        raise ParseError(f"field '{key}' must be {kind.__name__}")
    return value


def parse_trace(data: bytes | str) -> AttentionTrace:
    """Parse and validate the JSON trace format.

    Raises ParseError for malformed JSON or missing/mistyped top-level
    fields, ValidationError (naming the first offending path) for any
    value that breaks a trace invariant.
    """
    try:
        raw = json.loads(data)
    except json.JSONDecodeError as e:
        raise ParseError(f"malformed JSON: {e}") from e
    if not isinstance(raw, dict):
        raise ParseError("trace file must be a JSON object")
    version = _require(raw, "version", int)
    if version != TRACE_VERSION:
        raise ParseError(f"unsupported trace version {version}")
    num_heads = _require(raw, "num_heads", int)
    window = _require(raw, "window", int)
    token_entries = _require(raw, "tokens", list)
    attention = _require(raw, "attention", list)

    if num_heads < 1:
        raise ValidationError(f"num_heads must be >= 1, got {num_heads}")
    if window < 1:
        raise ValidationError(f"window must be >= 1, got {window}")
    t = len(token_entries) - window
    if t < 1:
        raise ValidationError(
            f"window={window} with {len(token_entries)} tokens leaves T={t}; "
            f"need T >= 1"
        )

    tokens: list[Token] = []
    for i, entry in enumerate(token_entries):
        if not isinstance(entry, dict) or not isinstance(entry.get("text"), str):
            raise ValidationError(f"tokens[{i}] must be an object with a string 'text'")
        offset = entry.get("byte_offset")
        if offset is not None and not isinstance(offset, int):
            raise ValidationError(f"tokens[{i}].byte_offset must be an integer")
        tokens.append(Token(text=entry["text"], byte_offset=offset))

    if len(attention) != num_heads:
        raise ValidationError(
            f"attention has {len(attention)} head slices, expected "
            f"num_heads={num_heads}"
        )
    for h, head in enumerate(attention):
        if not isinstance(head, list) or len(head) != window:
            raise ValidationError(
                f"attention[{h}] has {len(head) if isinstance(head, list) else 'no'}"
                f" rows, expected window={window}"
            )
        for q, row in enumerate(head):
            if not isinstance(row, list) or len(row) != t:
                raise ValidationError(
                    f"attention[{h}][{q}] has "
                    f"{len(row) if isinstance(row, list) else 'no'} entries, "
                    f"expected T={t}"
                )
            for k, value in enumerate(row):
                if isinstance(value, bool) or not isinstance(value, (int, float)):
                    raise ValidationError(
                        f"attention[{h}][{q}][{k}] is not a number"
                    )
                if not math.isfinite(value) or value < 0.0:
                    raise ValidationError(
                        f"attention[{h}][{q}][{k}] = {value!r} is not a finite "
                        f"nonnegative value"
                    )

    arr = np.asarray(attention, dtype=np.float64)
    meta = raw.get("meta")
    if meta is not None and not isinstance(meta, dict):
        raise ValidationError("meta must be an object when present")
    return AttentionTrace(
        num_heads=num_heads, window=window, tokens=tokens, attention=arr, meta=meta
    )


def serialize_trace(trace: AttentionTrace) -> bytes:
    """Serialize to the JSON trace format; inverse of parse_trace."""
    token_entries = []
    for tok in trace.tokens:
        entry: dict = {"text": tok.text}
        if tok.byte_offset is not None:
            entry["byte_offset"] = tok.byte_offset
        token_entries.append(entry)
    doc: dict = {
        "version": TRACE_VERSION,
        "num_heads": trace.num_heads,
        "window": trace.window,
        "tokens": token_entries,
        "attention": trace.attention.tolist(),
    }
    if trace.meta is not None:
        doc["meta"] = trace.meta
    return json.dumps(doc, separators=(",", ":")).encode("utf-8")


def _random_words(rng: np.random.Generator, count: int) -> list[str]:
    lengths = rng.integers(3, 9, size=count)
    letters = rng.integers(0, len(_ALPHABET), size=int(lengths.sum()))
    words = []
    pos = 0
    for n in lengths:
        words.append("".join(_ALPHABET[i] for i in letters[pos : pos + n]))
        pos += int(n)
    return words


def generate_synthetic(spec: SyntheticSpec) -> AttentionTrace:
    """Build a deterministic trace from a SyntheticSpec.

    Attention rows are heavy-tailed (lognormal with sigma=skew) and
    renormalized per query row.  Needle columns receive a uniform share of
    every row chosen so each needle column's total mass is at least
    ``needle_boost`` times the median non-needle column mass (with a 25%
    margin).  The needle is written as its own sentence: the token before
    the span and the span's last token end with '.', and no delimiter
    falls strictly inside the span.
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    t = spec.total_tokens - spec.window
    h, w = spec.num_heads, spec.window

    words = _random_words(rng, spec.total_tokens)
    is_delim = rng.random(t) < (1.0 / spec.punctuation_period)

    needle = spec.needle_start is not None
    if needle:
        s, length = spec.needle_start, spec.needle_len
        # The needle is one self-contained sentence: delimiter-bounded,
        # no interior sentence breaks.
        is_delim[s : s + length] = False
        is_delim[s + length - 1] = True
        if s > 0:
            is_delim[s - 1] = True

    texts = [
        words[i] + "." if i < t and is_delim[i] else words[i]
        for i in range(spec.total_tokens)
    ]
    tokens = [Token(text=txt) for txt in texts]

    raw = rng.lognormal(mean=0.0, sigma=spec.skew, size=(h, w, t))
    if needle:
        s, length = spec.needle_start, spec.needle_len
        base = raw.copy()
        base[:, :, s : s + length] = 0.0
        row_sums = base.sum(axis=2, keepdims=True)
        if length == t:
            attention = np.full((h, w, t), 1.0 / length)
        else:
            base /= row_sums
            col_mass = base.sum(axis=(0, 1))
            non_needle = np.concatenate([col_mass[:s], col_mass[s + length :]])
            median_mass = float(np.median(non_needle))
            boosted = 1.25 * spec.needle_boost * median_mass * length
            m = boosted / (h * w + boosted)
            attention = (1.0 - m) * base
            attention[:, :, s : s + length] = m / length
    else:
        attention = raw / raw.sum(axis=2, keepdims=True)

    meta: dict = {}
    if needle:
        meta["needle"] = {"start": spec.needle_start, "len": spec.needle_len}
    return AttentionTrace(
        num_heads=h,
        window=w,
        tokens=tokens,
        attention=attention,
        meta=meta or None,
    )


def write_plan(plan: CompressionPlan, trace: AttentionTrace) -> bytes:
    """Emit the result JSON for a compression plan.

    Retained indices are written sorted ascending.  Raises ValidationError
    if the plan is empty or refers to indices outside the trace.
    """
    t = trace.compressible_len
    if not plan.retained:
        raise ValidationError("plan retains no tokens (budget must be >= 1)")
    retained = sorted(plan.retained)
    if retained[0] < 0 or retained[-1] >= t:
        bad = retained[0] if retained[0] < 0 else retained[-1]
        raise ValidationError(
            f"retained index {bad} outside compressible region [0, {t})"
        )
    for idx in plan.window_tokens:
        if idx < t or idx >= len(trace.tokens):
            raise ValidationError(
                f"window token index {idx} outside window region "
                f"[{t}, {len(trace.tokens)})"
            )
    for seg in plan.segments:
        if seg.start < 0 or seg.end > t or seg.start >= seg.end:
            raise ValidationError(
                f"segment {seg.index} span [{seg.start}, {seg.end}) is invalid "
                f"for T={t}"
            )
    doc = {
        "version": PLAN_VERSION,
        "budget": plan.budget,
        "retained": retained,
        "window_tokens": list(plan.window_tokens),
        "segments": [
            {
                "start": seg.start,
                "end": seg.end,
                "budget": seg.budget,
                "block_size": seg.block_size,
                "fidelity": seg.fidelity,
            }
            for seg in plan.segments
        ],
        "config": plan.config,
    }
    return json.dumps(doc, separators=(",", ":")).encode("utf-8")


def read_plan(data: bytes | str) -> CompressionPlan:
    """Read a plan file back into a CompressionPlan; inverse of write_plan.

    Per-segment retained sets are reconstructed from the global retained
    list (segments tile the region, so membership is unambiguous).
    """
    try:
        raw = json.loads(data)
    except json.JSONDecodeError as e:
        raise ParseError(f"malformed JSON: {e}") from e
    if not isinstance(raw, dict):
        raise ParseError("plan file must be a JSON object")
    version = _require(raw, "version", int)
    if version != PLAN_VERSION:
        raise ParseError(f"unsupported plan version {version}")
    retained = sorted(int(i) for i in _require(raw, "retained", list))
    window_tokens = [int(i) for i in _require(raw, "window_tokens", list)]
    budget = _require(raw, "budget", int)
    config = raw.get("config", {})
    segments = []
    for k, entry in enumerate(_require(raw, "segments", list)):
        start, end = int(entry["start"]), int(entry["end"])
        seg_retained = tuple(i for i in retained if start <= i < end)
        segments.append(
            SegmentPlan(
                index=k,
                start=start,
                end=end,
                budget=int(entry["budget"]),
                block_size=int(entry["block_size"]),
                fidelity=float(entry["fidelity"]),
                retained=seg_retained,
            )
        )
    return CompressionPlan(
        segments=segments,
        retained=retained,
        window_tokens=window_tokens,
        budget=budget,
        config=config,
    )
