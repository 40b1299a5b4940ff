"""Shared generators for randomized suites."""

import numpy as np
import pytest

from dde import ConversationTrace, SpeechSegment, build_trace


def random_trace(
    rng: np.random.Generator,
    max_duration_ms: int = 60000,
    align_ms: int = 20,
    p_empty_channel: float = 0.1,
    with_units: bool = False,
    base_alphabet: int = 50,
) -> ConversationTrace:
    """Uniform random segment layouts, boundaries on the align_ms lattice."""
    duration = align_ms * int(rng.integers(1, max_duration_ms // align_ms + 1))
    events = []
    for ch in (0, 1):
        if rng.random() < p_empty_channel:
            continue
        t = align_ms * int(rng.integers(0, 40))
        while t < duration:
            # mix of short bursts and long stretches
            if rng.random() < 0.4:
                seg_len = align_ms * int(rng.integers(1, 30))
            else:
                seg_len = align_ms * int(rng.integers(10, 200))
            end = min(t + seg_len, duration)
            if end > t:
                units = None
                if with_units and align_ms % 20 == 0:
                    n = (end - t) // 20
                    units = tuple(int(u) for u in rng.integers(0, base_alphabet, n))
                events.append((ch, SpeechSegment(t, end, units=units)))
            gap = align_ms * int(rng.integers(1, 60))
            t = end + gap
    return build_trace(events, duration)


def random_unaligned_trace(rng: np.random.Generator, max_duration_ms: int = 30000):
    """Arbitrary-millisecond boundaries (valid, just not frame-aligned)."""
    return random_trace(rng, max_duration_ms=max_duration_ms, align_ms=1)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
