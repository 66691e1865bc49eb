"""Punctuation-based segmentation of the compressible region.

A boundary is placed immediately after every token whose text ends with a
delimiter character, so a delimiter token always closes its own span.
Spans longer than ``max_len`` are split left-to-right.  The resulting
segments are ordered, contiguous, and exactly tile ``[0, T)``.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass
from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from .trace import AttentionTrace

__all__ = ["Segment", "DEFAULT_DELIMITERS", "DEFAULT_MAX_SEGMENT_LEN", "segment_tokens", "segment_of"]

DEFAULT_DELIMITERS = frozenset({".", "!", "?", ";", ":", ",", "\n"})
DEFAULT_MAX_SEGMENT_LEN = 256


@dataclass(frozen=True)
class Segment:
    """Contiguous span [start, end) of the compressible region."""

    index: int
    start: int
    end: int

    def __len__(self) -> int:
        return self.end - self.start

    def __contains__(self, t: int) -> bool:
        return self.start <= t < self.end


def segment_tokens(
    trace: AttentionTrace,
    delimiters: frozenset[str] | set[str] | str = DEFAULT_DELIMITERS,
    max_len: int = DEFAULT_MAX_SEGMENT_LEN,
) -> list[Segment]:
    """Split the compressible region into delimiter-bounded segments.

    Always succeeds on a valid trace: with no delimiters the whole region
    becomes one span, then any span longer than max_len is chopped into
    max_len-sized pieces left to right.
    """
    if max_len < 1:
        raise ValueError(f"max_len must be >= 1, got {max_len}")
    delims = frozenset(delimiters)
    t = trace.compressible_len
    cuts = [
        i + 1
        for i in range(t)
        if trace.tokens[i].text and trace.tokens[i].text[-1] in delims
    ]
    if not cuts or cuts[-1] != t:
        cuts.append(t)

    segments: list[Segment] = []
    start = 0
    for cut in cuts:
        while cut - start > max_len:
            segments.append(Segment(index=len(segments), start=start, end=start + max_len))
            start += max_len
        segments.append(Segment(index=len(segments), start=start, end=cut))
        start = cut
    return segments


def segment_of(segments: list[Segment], t: int) -> int:
    """Index of the unique segment containing token t; O(log n)."""
    if not segments or t < segments[0].start or t >= segments[-1].end:
        raise IndexError(f"token index {t} outside segmented region")
    return bisect_right(segments, t, key=lambda seg: seg.start) - 1
