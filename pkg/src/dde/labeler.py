"""Next-action labels and training samples at every 160ms tick.

Each complete tick [160i, 160(i+1)) of a trace yields one action label per
speaker, decided from that speaker's activity inside the tick:

  1. a speech onset inside the tick            -> SPK (initiate speaking)
  2. else a speech offset inside the tick with
     the other speaker active at that instant  -> STP (stop speaking)
  3. else speech covering the tick-end instant -> CON (keep speaking)
  4. else                                      -> SIL (remain silent)

Onsets count when they lie in [160i, 160(i+1)); offsets when they lie in
(160i, 160(i+1)], so a segment ending exactly on a tick boundary belongs to
the tick it closes. When several rules match (e.g. a sub-160ms utterance),
the earlier rule wins: initiations are the rarest, most valuable events.
"""

from __future__ import annotations

import json
from bisect import bisect_left, bisect_right
from dataclasses import dataclass
from enum import IntEnum

from .errors import ValidationError
from .segments import TICK_MS, ConversationTrace, speaker_index, window
from .units import BpeVocab, bpe_encode, dedup

PAD_ID = 0
BOS_ID = 1
EOS_ID = 2
UNIT_ID_OFFSET = 7  # unit u occupies vocabulary slot u + 7


class Action(IntEnum):
    """Dialogue-manager actions; enum values are the target-vocabulary ids."""

    SIL = 3
    CON = 4
    SPK = 5
    STP = 6

    @classmethod
    def from_name(cls, name: str) -> "Action":
        try:
            return cls[name.strip().upper()]
        except KeyError:
            raise ValidationError(f"unknown action {name!r}") from None


@dataclass(frozen=True)
class TrainingSample:
    """One (context, next action) pair for a speaker at a tick boundary."""

    context: ConversationTrace      # trailing window ending at 160*(tick_index+1)
    agent: int                      # channel whose action is labeled
    tick_index: int
    action: Action
    target_tokens: tuple[int, ...] | None = None

    def to_dict(self, context_mode="ref", trace_path=None, window_ms=None):
        d = {
            "agent": "AB"[self.agent],
            "tick_index": self.tick_index,
            "action": self.action.name,
        }
        if self.target_tokens is not None:
            d["target_tokens"] = list(self.target_tokens)
        if context_mode == "inline":
            d["context"] = self.context.to_dict()
        elif context_mode == "ref":
            d["context_ref"] = {
                "trace": str(trace_path) if trace_path is not None else None,
                "end_ms": TICK_MS * (self.tick_index + 1),
                "window_ms": window_ms,
            }
        return d


class _Channel:
    """Pre-extracted boundary arrays for O(log n) tick queries."""

    def __init__(self, segments):
        self.starts = [s.start_ms for s in segments]
        self.ends = [s.end_ms for s in segments]
        self.segments = segments

    def onset_index_in(self, t0: int, t1: int):
        """Index of the first segment starting in [t0, t1), or None."""
        i = bisect_left(self.starts, t0)
        if i < len(self.starts) and self.starts[i] < t1:
            return i
        return None

    def offset_in(self, t0: int, t1: int):
        """The unique offset instant in (t0, t1], or None."""
        i = bisect_right(self.ends, t0)
        if i < len(self.ends) and self.ends[i] <= t1:
            return self.ends[i]
        return None

    def active_at(self, t: int) -> bool:
        i = bisect_right(self.starts, t) - 1
        return i >= 0 and self.ends[i] > t

    def active_inside(self, t: int) -> bool:
        """Speech strictly surrounds instant t (start < t < end)."""
        i = bisect_left(self.starts, t) - 1
        return i >= 0 and self.ends[i] > t


def _label(own: _Channel, other: _Channel, tick_index: int) -> Action:
    t0 = tick_index * TICK_MS
    t1 = t0 + TICK_MS
    if own.onset_index_in(t0, t1) is not None:
        return Action.SPK
    offset = own.offset_in(t0, t1)
    if offset is not None and other.active_at(offset):
        return Action.STP
    # strict interior: an utterance starting exactly at t1 belongs to the next
    # tick's SPK, not to this one as a continuation
    if own.active_inside(t1):
        return Action.CON
    return Action.SIL


def _check_tick(trace: ConversationTrace, tick_index: int) -> None:
    if tick_index < 0 or TICK_MS * (tick_index + 1) > trace.duration_ms:
        raise ValidationError(
            f"tick {tick_index} not fully inside a {trace.duration_ms}ms trace"
        )


def label_tick(trace: ConversationTrace, agent, tick_index: int) -> Action:
    """Next-action label for one speaker at one complete tick."""
    _check_tick(trace, tick_index)
    ai = speaker_index(agent)
    return _label(
        _Channel(trace.channels[ai]), _Channel(trace.channels[1 - ai]), tick_index
    )


def label_sequence(trace: ConversationTrace, agent) -> list[Action]:
    """Labels for every complete tick of the trace (no contexts built)."""
    ai = speaker_index(agent)
    own = _Channel(trace.channels[ai])
    other = _Channel(trace.channels[1 - ai])
    return [_label(own, other, i) for i in range(trace.duration_ms // TICK_MS)]


def encode_target(action: Action, bpe_unit_ids=None) -> tuple[int, ...]:
    """Target token sequence for an action.

    SPK wraps the (BPE-encoded) unit ids between the SPK token and EOS, with
    every unit id shifted past the 7 reserved special/action slots. The other
    actions encode as their single token.
    """
    action = Action(action)
    if action is Action.SPK:
        if bpe_unit_ids is None:
            raise ValidationError("SPK targets need a unit sequence")
        return (int(Action.SPK), *(int(u) + UNIT_ID_OFFSET for u in bpe_unit_ids), EOS_ID)
    if bpe_unit_ids is not None:
        raise ValidationError(f"{action.name} targets take no units")
    return (int(action),)


def build_samples(
    trace: ConversationTrace,
    agent,
    window_ms: int = 20000,
    vocab: BpeVocab | None = None,
) -> list[TrainingSample]:
    """One training sample per complete tick for the given speaker.

    SPK samples carry the deduplicated (and, when a vocab is given,
    BPE-encoded) units of the segment that starts inside the tick; segments
    without unit annotations leave target_tokens unset. Other actions encode
    as their single action token.
    """
    ai = speaker_index(agent)
    own = _Channel(trace.channels[ai])
    other = _Channel(trace.channels[1 - ai])
    samples = []
    for i in range(trace.duration_ms // TICK_MS):
        action = _label(own, other, i)
        ctx = window(trace, TICK_MS * (i + 1), window_ms)
        target = None
        if action is Action.SPK:
            seg = own.segments[own.onset_index_in(i * TICK_MS, (i + 1) * TICK_MS)]
            if seg.units is not None:
                ids = dedup(seg.units)
                if vocab is not None:
                    ids = bpe_encode(vocab, ids)
                target = encode_target(Action.SPK, ids)
        else:
            target = (int(action),)
        samples.append(
            TrainingSample(
                context=ctx, agent=ai, tick_index=i, action=action,
                target_tokens=target,
            )
        )
    return samples


def action_histogram(samples) -> dict[str, int]:
    hist = {a.name: 0 for a in Action}
    for s in samples:
        hist[s.action.name] += 1
    return hist


def write_samples_jsonl(
    samples, path, context_mode="ref", trace_path=None, window_ms=20000
) -> None:
    with open(path, "w", encoding="utf-8") as fp:
        for s in samples:
            fp.write(
                json.dumps(
                    s.to_dict(
                        context_mode=context_mode,
                        trace_path=trace_path,
                        window_ms=window_ms,
                    ),
                    sort_keys=True,
                )
            )
            fp.write("\n")


def read_actions_jsonl(path) -> dict[tuple[str, int], Action]:
    """(agent, tick_index) -> action, as needed for prediction scoring."""
    out = {}
    with open(path, "r", encoding="utf-8") as fp:
        for line in fp:
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                key = (rec["agent"], int(rec["tick_index"]))
                out[key] = Action.from_name(rec["action"])
            except (json.JSONDecodeError, KeyError) as exc:
                raise ValidationError(f"malformed samples line: {exc}") from exc
    return out
