"""Shared trace builders for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from sablock import AttentionTrace, Token


def make_trace(
    attention,
    texts: list[str] | None = None,
    window: int | None = None,
) -> AttentionTrace:
    """Build a trace straight from an attention array.

    ``attention`` may be (H, W, T) or (W, T); token texts default to plain
    words (single segment).
    """
    arr = np.asarray(attention, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[None, :, :]
    h, w, t = arr.shape
    if window is None:
        window = w
    if texts is None:
        texts = [f"tok{i}" for i in range(t + window)]
    assert len(texts) == t + window
    return AttentionTrace(
        num_heads=h,
        window=window,
        tokens=[Token(text=s) for s in texts],
        attention=arr,
    )


def random_trace(
    rng: np.random.Generator,
    max_t: int = 60,
    max_heads: int = 3,
    max_window: int = 5,
    delim_prob: float = 0.15,
    tie_prob: float = 0.3,
    zero_col_prob: float = 0.1,
) -> AttentionTrace:
    """Random trace with ties, zero columns, and random punctuation."""
    t = int(rng.integers(1, max_t + 1))
    h = int(rng.integers(1, max_heads + 1))
    w = int(rng.integers(1, max_window + 1))
    attention = rng.lognormal(0.0, 1.0, size=(h, w, t))
    if rng.random() < tie_prob:
        # quantize to force score ties
        attention = np.round(attention, 1)
    if rng.random() < zero_col_prob and t > 1:
        cols = rng.integers(0, t, size=max(1, t // 8))
        attention[:, :, cols] = 0.0
    texts = []
    for i in range(t + w):
        word = f"w{i}"
        if i < t and rng.random() < delim_prob:
            word += "."
        texts.append(word)
    return make_trace(attention, texts=texts, window=w)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20250810)
