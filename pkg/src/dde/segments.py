"""Two-speaker conversation traces: time-aligned speech segments on a 20ms frame grid.

All timestamps are integer milliseconds, intervals are half-open [start, end).
A trace holds exactly two channels (speaker A = 0, speaker B = 1); segments in
a channel are sorted, non-overlapping and separated by at least 1ms.
"""

from __future__ import annotations

import json
from bisect import bisect_right
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

FRAME_MS = 20      # atomic activity/audio frame
TICK_MS = 160      # decision interval (8 frames)
TICK_FRAMES = TICK_MS // FRAME_MS

SPEAKER_NAMES = ("A", "B")


def speaker_index(speaker) -> int:
    """Map 'A'/'B'/0/1 to a channel index."""
    if speaker in (0, 1):
        return speaker
    if isinstance(speaker, str):
        s = speaker.strip().upper()
        if s in SPEAKER_NAMES:
            return SPEAKER_NAMES.index(s)
    raise ValidationError(f"unknown speaker {speaker!r}, expected A/B or 0/1")


@dataclass(frozen=True)
class EventCounts:
    """Per-segment counts of annotated speech events."""

    fillers: int = 0
    repetitions: int = 0
    laughs: int = 0
    breaths: int = 0

    def to_dict(self):
        return {
            "fillers": self.fillers,
            "repetitions": self.repetitions,
            "laughs": self.laughs,
            "breaths": self.breaths,
        }

    @classmethod
    def from_dict(cls, data) -> "EventCounts":
        return cls(
            fillers=int(data.get("fillers", 0)),
            repetitions=int(data.get("repetitions", 0)),
            laughs=int(data.get("laughs", 0)),
            breaths=int(data.get("breaths", 0)),
        )

    def __add__(self, other: "EventCounts") -> "EventCounts":
        return EventCounts(
            self.fillers + other.fillers,
            self.repetitions + other.repetitions,
            self.laughs + other.laughs,
            self.breaths + other.breaths,
        )


@dataclass(frozen=True)
class SpeechSegment:
    """One continuous stretch of speech from a single speaker."""

    start_ms: int                          # inclusive
    end_ms: int                            # exclusive
    units: tuple[int, ...] | None = None   # raw unit ids, one per 20ms frame
    words: int | None = None               # annotated word count
    events: EventCounts | None = None      # annotated filler/repetition/laugh/breath counts

    def __post_init__(self):
        if self.start_ms < 0:
            raise ValidationError(f"segment start {self.start_ms} < 0")
        if self.end_ms <= self.start_ms:
            raise ValidationError(
                f"segment end {self.end_ms} must exceed start {self.start_ms}"
            )
        if self.units is not None:
            object.__setattr__(self, "units", tuple(int(u) for u in self.units))
            if self.start_ms % FRAME_MS or self.end_ms % FRAME_MS:
                raise ValidationError(
                    "unit-annotated segments must be 20ms-aligned: "
                    f"[{self.start_ms},{self.end_ms})"
                )
            n_frames = (self.end_ms - self.start_ms) // FRAME_MS
            if len(self.units) != n_frames:
                raise ValidationError(
                    f"{len(self.units)} units for a {n_frames}-frame segment"
                )
            if any(u < 0 for u in self.units):
                raise ValidationError("unit ids must be non-negative")
        if self.words is not None and self.words < 0:
            raise ValidationError("word count must be non-negative")

    @property
    def duration_ms(self) -> int:
        return self.end_ms - self.start_ms

    def contains(self, t_ms: int) -> bool:
        return self.start_ms <= t_ms < self.end_ms

    def to_dict(self):
        d = {"start_ms": self.start_ms, "end_ms": self.end_ms}
        if self.units is not None:
            d["units"] = list(self.units)
        if self.words is not None:
            d["words"] = self.words
        if self.events is not None:
            d["events"] = self.events.to_dict()
        return d

    @classmethod
    def from_dict(cls, data) -> "SpeechSegment":
        units = data.get("units")
        events = data.get("events")
        return cls(
            start_ms=int(data["start_ms"]),
            end_ms=int(data["end_ms"]),
            units=tuple(units) if units is not None else None,
            words=int(data["words"]) if data.get("words") is not None else None,
            events=EventCounts.from_dict(events) if events is not None else None,
        )


@dataclass(frozen=True)
class ConversationTrace:
    """Two channels of disjoint speech segments over [0, duration_ms)."""

    channels: tuple[tuple[SpeechSegment, ...], tuple[SpeechSegment, ...]]
    duration_ms: int

    def __post_init__(self):
        if len(self.channels) != 2:
            raise ValidationError(f"expected 2 channels, got {len(self.channels)}")
        object.__setattr__(
            self, "channels", tuple(tuple(ch) for ch in self.channels)
        )
        if self.duration_ms < 0:
            raise ValidationError("duration must be non-negative")
        for ci, ch in enumerate(self.channels):
            prev_end = None
            for seg in ch:
                if prev_end is not None and seg.start_ms <= prev_end:
                    raise ValidationError(
                        f"channel {ci}: segment at {seg.start_ms} overlaps or "
                        f"touches previous segment ending at {prev_end}"
                    )
                if seg.end_ms > self.duration_ms:
                    raise ValidationError(
                        f"channel {ci}: segment ends at {seg.end_ms} past "
                        f"duration {self.duration_ms}"
                    )
                prev_end = seg.end_ms

    def channel(self, speaker) -> tuple[SpeechSegment, ...]:
        return self.channels[speaker_index(speaker)]

    def active_at(self, speaker, t_ms: int) -> bool:
        """True iff the speaker's channel has a segment containing instant t_ms."""
        segs = self.channels[speaker_index(speaker)]
        starts = [s.start_ms for s in segs]
        i = bisect_right(starts, t_ms) - 1
        return i >= 0 and segs[i].end_ms > t_ms

    def total_speech_ms(self, speaker) -> int:
        return sum(s.duration_ms for s in self.channels[speaker_index(speaker)])

    def to_dict(self):
        return {
            "duration_ms": self.duration_ms,
            "channels": [[s.to_dict() for s in ch] for ch in self.channels],
        }

    def to_json(self, indent=None) -> str:
        return json.dumps(self.to_dict(), indent=indent, sort_keys=True)

    @classmethod
    def from_dict(cls, data) -> "ConversationTrace":
        chans = data.get("channels")
        if chans is None or len(chans) != 2:
            raise ValidationError("trace JSON needs a 2-element 'channels' list")
        return cls(
            channels=tuple(
                tuple(SpeechSegment.from_dict(s) for s in ch) for ch in chans
            ),
            duration_ms=int(data["duration_ms"]),
        )

    @classmethod
    def from_json(cls, text: str) -> "ConversationTrace":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"malformed trace JSON: {exc}") from exc
        return cls.from_dict(data)


EMPTY_TRACE = ConversationTrace(channels=((), ()), duration_ms=0)


def _combine(a: SpeechSegment, b: SpeechSegment) -> SpeechSegment:
    """Union of two same-channel segments with b.start <= a.end (sorted input).

    Annotations survive only when they stay exact: touching segments concatenate
    units and sum counts; a segment swallowed whole keeps the outer annotations;
    partial overlaps drop them.
    """
    start = a.start_ms
    end = max(a.end_ms, b.end_ms)
    units = None
    words = None
    events = None
    if b.start_ms == a.end_ms:  # clean touch
        if a.units is not None and b.units is not None:
            units = a.units + b.units
        if a.words is not None and b.words is not None:
            words = a.words + b.words
        if a.events is not None and b.events is not None:
            events = a.events + b.events
    elif b.end_ms <= a.end_ms:  # b fully inside a
        units, words, events = a.units, a.words, a.events
    return SpeechSegment(start, end, units=units, words=words, events=events)


def build_trace(events, duration_ms: int) -> ConversationTrace:
    """Assemble a validated trace from (speaker, segment) pairs.

    Segments are sorted per channel; same-channel segments that overlap or touch
    are merged into their union. Cross-channel overlap is legal.
    """
    if duration_ms < 0:
        raise ValidationError("duration must be non-negative")
    per_channel: tuple[list[SpeechSegment], list[SpeechSegment]] = ([], [])
    for speaker, seg in events:
        if not isinstance(seg, SpeechSegment):
            seg = SpeechSegment.from_dict(seg)
        if seg.end_ms > duration_ms:
            raise ValidationError(
                f"segment [{seg.start_ms},{seg.end_ms}) past duration {duration_ms}"
            )
        per_channel[speaker_index(speaker)].append(seg)
    merged_channels = []
    for ch in per_channel:
        ch.sort(key=lambda s: (s.start_ms, s.end_ms))
        merged: list[SpeechSegment] = []
        for seg in ch:
            if merged and seg.start_ms <= merged[-1].end_ms:
                merged[-1] = _combine(merged[-1], seg)
            else:
                merged.append(seg)
        merged_channels.append(tuple(merged))
    return ConversationTrace(channels=tuple(merged_channels), duration_ms=duration_ms)


@dataclass(frozen=True)
class FrameGrid:
    """Boolean per-channel activity at 20ms resolution."""

    frames: np.ndarray  # bool, shape (2, n_frames)
    frame_ms: int = FRAME_MS
    tick_frames: int = TICK_FRAMES

    def __post_init__(self):
        self.frames.setflags(write=False)

    @property
    def n_frames(self) -> int:
        return self.frames.shape[1]


def frame_grid(trace: ConversationTrace) -> FrameGrid:
    """Quantize a trace onto the 20ms grid.

    A frame counts as active when a speech segment covers at least half of it
    (>= 10ms intersection).
    """
    n_frames = trace.duration_ms // FRAME_MS
    frames = np.zeros((2, n_frames), dtype=bool)
    for ci, ch in enumerate(trace.channels):
        for seg in ch:
            f_lo = seg.start_ms // FRAME_MS
            f_hi = min((seg.end_ms + FRAME_MS - 1) // FRAME_MS, n_frames)
            if f_lo >= f_hi:
                continue
            f = np.arange(f_lo, f_hi)
            lo = np.maximum(seg.start_ms, f * FRAME_MS)
            hi = np.minimum(seg.end_ms, f * FRAME_MS + FRAME_MS)
            frames[ci, f_lo:f_hi] |= (hi - lo) >= FRAME_MS // 2
    return FrameGrid(frames=frames)


def _clip_segment(seg: SpeechSegment, lo: int, hi: int, shift: int):
    """Clip seg to [lo, hi) and shift left by `shift`; None if empty."""
    ns, ne = max(seg.start_ms, lo), min(seg.end_ms, hi)
    if ns >= ne:
        return None
    if ns == seg.start_ms and ne == seg.end_ms:
        units = seg.units if (ns - shift) % FRAME_MS == 0 else None
        return SpeechSegment(
            ns - shift, ne - shift, units=units, words=seg.words, events=seg.events
        )
    units = None
    if (
        seg.units is not None
        and (ns - seg.start_ms) % FRAME_MS == 0
        and (ne - seg.start_ms) % FRAME_MS == 0
        and (ns - shift) % FRAME_MS == 0
    ):
        units = seg.units[
            (ns - seg.start_ms) // FRAME_MS : (ne - seg.start_ms) // FRAME_MS
        ]
    # word/event counts no longer describe the clipped span; drop them
    return SpeechSegment(ns - shift, ne - shift, units=units)


def window(trace: ConversationTrace, end_ms: int, width_ms: int = 20000) -> ConversationTrace:
    """Sliding context window: the last `width_ms` of history before `end_ms`.

    Returns the trace restricted to [max(0, end_ms - width_ms), end_ms), with
    timestamps re-based so the window starts at 0. Segments straddling either
    edge are truncated.
    """
    if not 0 < end_ms <= trace.duration_ms:
        raise ValidationError(
            f"window end {end_ms} outside (0, {trace.duration_ms}]"
        )
    if width_ms <= 0:
        raise ValidationError("window width must be positive")
    left = max(0, end_ms - width_ms)
    channels = []
    for ch in trace.channels:
        clipped = [_clip_segment(s, left, end_ms, left) for s in ch]
        channels.append(tuple(s for s in clipped if s is not None))
    return ConversationTrace(channels=tuple(channels), duration_ms=end_ms - left)


def read_trace(path) -> ConversationTrace:
    with open(path, "r", encoding="utf-8") as fp:
        return ConversationTrace.from_json(fp.read())


def write_trace(trace: ConversationTrace, path, indent=2) -> None:
    with open(path, "w", encoding="utf-8") as fp:
        fp.write(trace.to_json(indent=indent))
        fp.write("\n")


def read_traces_jsonl(path) -> list[ConversationTrace]:
    """One conversation per line."""
    traces = []
    with open(path, "r", encoding="utf-8") as fp:
        for line in fp:
            line = line.strip()
            if line:
                traces.append(ConversationTrace.from_json(line))
    return traces
