"""Conversation-structure metrics for two-speaker traces.

Terminology used throughout:
  IPU    - one continuous speech segment from a speaker.
  Turn   - consecutive same-speaker IPUs whose separating silences are under
           400ms, after backchannel IPUs are set aside.
  Pause  - a silence longer than 200ms between IPUs of the same turn.
  Overlap     - a maximal interval where both speakers are active.
  Backchannel - an IPU under 1000ms lying wholly inside the other speaker's
                turn span (computed before backchannel exclusion).
  Gap    - positive silence between a turn's end and the next turn from the
           other speaker; a turn starting before the previous one ends makes
           overlap instead of a gap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import MissingInputError, ValidationError
from .labeler import Action
from .segments import FRAME_MS, ConversationTrace, frame_grid, speaker_index

TURN_JOIN_MS = 400       # silences under this merge IPUs into one turn
PAUSE_MIN_MS = 200       # within-turn silences over this count as pauses
BACKCHANNEL_MAX_MS = 1000

PITCH_FMIN_HZ = 60.0
PITCH_FMAX_HZ = 400.0
PITCH_WINDOW_MS = 30     # autocorrelation analysis window per 20ms frame
VOICING_THRESHOLD = 0.6
_SAMPLE_RATE = 16000
_PCM_SCALE = 32768.0


def _group_turns(intervals, max_join_ms=TURN_JOIN_MS):
    """Merge consecutive intervals separated by silence < max_join_ms."""
    turns = []
    for start, end in intervals:
        if turns and start - turns[-1][1] < max_join_ms:
            turns[-1] = (turns[-1][0], end)
        else:
            turns.append((start, end))
    return turns


@dataclass(frozen=True)
class TurnStructure:
    """Per-speaker IPU/turn/pause decomposition of one channel."""

    ipus: tuple[tuple[int, int], ...]
    turns: tuple[tuple[int, int], ...]
    pauses: tuple[tuple[int, int], ...]
    backchannel_ipus: tuple[tuple[int, int], ...]


def turn_structure(trace: ConversationTrace, speaker) -> TurnStructure:
    """Decompose a speaker's channel into turns, pauses and backchannels.

    Backchannel IPUs are detected against the other speaker's raw turn spans
    (IPUs grouped before any exclusion) and removed before this speaker's own
    turns are formed, so brief acknowledgments do not fragment gap statistics.
    """
    si = speaker_index(speaker)
    own = [(s.start_ms, s.end_ms) for s in trace.channels[si]]
    other = [(s.start_ms, s.end_ms) for s in trace.channels[1 - si]]
    other_spans = _group_turns(other)
    backchannels = tuple(
        (s, e)
        for s, e in own
        if e - s < BACKCHANNEL_MAX_MS
        and any(ts <= s and e <= te for ts, te in other_spans)
    )
    bc_set = set(backchannels)
    main = [iv for iv in own if iv not in bc_set]
    turns = _group_turns(main)
    pauses = []
    for prev, cur in zip(main, main[1:]):
        gap = cur[0] - prev[1]
        if PAUSE_MIN_MS < gap < TURN_JOIN_MS:
            pauses.append((prev[1], cur[0]))
    return TurnStructure(
        ipus=tuple(own),
        turns=tuple(turns),
        pauses=tuple(pauses),
        backchannel_ipus=backchannels,
    )


def _overlap_intervals(trace: ConversationTrace):
    """Maximal intervals of simultaneous speech, via a two-pointer sweep."""
    a = [(s.start_ms, s.end_ms) for s in trace.channels[0]]
    b = [(s.start_ms, s.end_ms) for s in trace.channels[1]]
    out = []
    i = j = 0
    while i < len(a) and j < len(b):
        lo = max(a[i][0], b[j][0])
        hi = min(a[i][1], b[j][1])
        if lo < hi:
            out.append((lo, hi))
        if a[i][1] <= b[j][1]:
            i += 1
        else:
            j += 1
    return out


def cross_channel_events(trace: ConversationTrace) -> dict:
    """Overlaps, backchannels and gaps between the two speakers.

    Gaps pair each turn with the latest-ending earlier turn: positive silence
    after a different speaker's turn is a gap (from, to, duration); anything
    else (same speaker resuming, or a turn swallowed by a longer one) is not.
    """
    structures = (turn_structure(trace, 0), turn_structure(trace, 1))
    backchannels = sorted(
        [(sp, iv) for sp in (0, 1) for iv in structures[sp].backchannel_ipus],
        key=lambda x: x[1],
    )
    timeline = sorted(
        [(start, end, sp) for sp in (0, 1) for start, end in structures[sp].turns]
    )
    gaps = []
    latest_end = None
    latest_speaker = None
    for start, end, sp in timeline:
        if latest_end is not None and sp != latest_speaker and start > latest_end:
            gaps.append((start - latest_end, latest_speaker, sp))
        if latest_end is None or end >= latest_end:
            latest_end, latest_speaker = end, sp
    return {
        "overlaps": _overlap_intervals(trace),
        "backchannels": backchannels,
        "gaps": gaps,
        "pauses": [(sp, iv) for sp in (0, 1) for iv in structures[sp].pauses],
        "turn_structures": structures,
    }


@dataclass(frozen=True)
class NaturalnessStats:
    """Speech-style statistics; fields stay None without their inputs."""

    wpm: float | None = None          # words per minute of annotated speech
    fwpm: float | None = None         # filler words per minute
    rpm: float | None = None          # repetitions per minute
    lpm: float | None = None          # laughs per minute
    bpm: float | None = None          # breaths per minute
    spm_s: float | None = None        # within-turn silence, seconds per minute
    mean_pause_s: float | None = None # mean length of >200ms pauses
    pstd_hz: float | None = None      # F0 standard deviation over voiced frames
    mean_f0_hz: float | None = None
    estd: float | None = None         # frame-RMS standard deviation over speech

    def to_dict(self):
        return {k: v for k, v in self.__dict__.items()}

    def all_absent(self) -> bool:
        return all(v is None for v in self.__dict__.values())


@dataclass(frozen=True)
class ConversationReport:
    """Per-minute conversational dynamics of one trace."""

    duration_ms: int
    overlaps_per_min: float
    backchannels_per_min: float
    pauses_per_min: float
    avg_gap_ms: float | None
    counts: dict = field(default_factory=dict)
    naturalness: NaturalnessStats | None = None

    def to_dict(self):
        return {
            "duration_ms": self.duration_ms,
            "overlaps_per_min": self.overlaps_per_min,
            "backchannels_per_min": self.backchannels_per_min,
            "pauses_per_min": self.pauses_per_min,
            "avg_gap_ms": self.avg_gap_ms,
            "counts": dict(self.counts),
            "naturalness": None
            if self.naturalness is None
            else self.naturalness.to_dict(),
        }


def _annotation_rates(trace: ConversationTrace):
    word_ms = words = 0
    event_ms = 0
    event_totals = {"fillers": 0, "repetitions": 0, "laughs": 0, "breaths": 0}
    have_events = False
    for ch in trace.channels:
        for seg in ch:
            if seg.words is not None:
                words += seg.words
                word_ms += seg.duration_ms
            if seg.events is not None:
                have_events = True
                event_ms += seg.duration_ms
                for k in event_totals:
                    event_totals[k] += getattr(seg.events, k)
    wpm = words * 60000.0 / word_ms if word_ms else None
    rates = {}
    for key, out in (
        ("fillers", "fwpm"), ("repetitions", "rpm"), ("laughs", "lpm"), ("breaths", "bpm")
    ):
        rates[out] = event_totals[key] * 60000.0 / event_ms if have_events and event_ms else None
    return wpm, rates


def _silence_stats(trace: ConversationTrace):
    """Total within-turn silence and pause lengths, across both speakers."""
    total_silence_ms = 0
    pause_lengths = []
    any_turn = False
    for sp in (0, 1):
        ts = turn_structure(trace, sp)
        any_turn = any_turn or bool(ts.turns)
        bc = set(ts.backchannel_ipus)
        main = [iv for iv in ts.ipus if iv not in bc]
        for prev, cur in zip(main, main[1:]):
            gap = cur[0] - prev[1]
            if 0 < gap < TURN_JOIN_MS:
                total_silence_ms += gap
        pause_lengths.extend(e - s for s, e in ts.pauses)
    return any_turn, total_silence_ms, pause_lengths


def _audio_stats(trace: ConversationTrace, audio):
    if len(audio) != 2:
        raise ValidationError("audio must hold one sample array per speaker")
    grid = frame_grid(trace)
    frame_len = _SAMPLE_RATE * FRAME_MS // 1000
    lag_min = int(_SAMPLE_RATE / PITCH_FMAX_HZ)
    lag_max = int(math.ceil(_SAMPLE_RATE / PITCH_FMIN_HZ))
    window_len = _SAMPLE_RATE * PITCH_WINDOW_MS // 1000
    rms_all = []
    f0_all = []
    for ch, samples in enumerate(audio):
        samples = np.asarray(samples, dtype=np.float64) / _PCM_SCALE
        n_frames = min(samples.size // frame_len, grid.n_frames)
        if n_frames == 0:
            continue
        active = grid.frames[ch, :n_frames]
        if not active.any():
            continue
        rms = _kernels.frame_rms(samples[: n_frames * frame_len], frame_len)
        rms_all.append(rms[active])
        f0, strength = _kernels.f0_frames(
            samples, _SAMPLE_RATE, frame_len, window_len, lag_min, lag_max
        )
        f0 = f0[:n_frames]
        strength = strength[:n_frames]
        voiced = active & (strength >= VOICING_THRESHOLD) & (f0 > 0)
        f0_all.append(f0[voiced])
    estd = pstd = mean_f0 = None
    if rms_all:
        pooled = np.concatenate(rms_all)
        if pooled.size:
            estd = float(np.std(pooled))
    if f0_all:
        pooled = np.concatenate(f0_all)
        if pooled.size:
            pstd = float(np.std(pooled))
            mean_f0 = float(np.mean(pooled))
    return estd, pstd, mean_f0


def naturalness_report(
    trace: ConversationTrace, audio=None, require=()
) -> NaturalnessStats:
    """Compute whichever naturalness metrics the available inputs allow.

    Word/event rates need segment annotations; pitch/energy spread needs the
    per-speaker audio. `require` names fields that must come out non-None,
    otherwise MissingInputError is raised.
    """
    wpm, event_rates = _annotation_rates(trace)
    any_turn, silence_ms, pause_lengths = _silence_stats(trace)
    spm_s = None
    mean_pause_s = None
    if any_turn and trace.duration_ms > 0:
        spm_s = (silence_ms / 1000.0) * 60000.0 / trace.duration_ms
        if pause_lengths:
            mean_pause_s = sum(pause_lengths) / len(pause_lengths) / 1000.0
    estd = pstd = mean_f0 = None
    if audio is not None:
        estd, pstd, mean_f0 = _audio_stats(trace, audio)
    stats = NaturalnessStats(
        wpm=wpm,
        fwpm=event_rates["fwpm"],
        rpm=event_rates["rpm"],
        lpm=event_rates["lpm"],
        bpm=event_rates["bpm"],
        spm_s=spm_s,
        mean_pause_s=mean_pause_s,
        pstd_hz=pstd,
        mean_f0_hz=mean_f0,
        estd=estd,
    )
    for name in require:
        if getattr(stats, name, None) is None:
            raise MissingInputError(
                f"metric {name!r} needs inputs that were not provided"
            )
    return stats


def conversation_report(trace: ConversationTrace, audio=None) -> ConversationReport:
    """Overlap/backchannel/pause rates per minute plus average gap latency."""
    if trace.duration_ms <= 0:
        raise ValidationError("cannot analyze a zero-duration trace")
    events = cross_channel_events(trace)
    per_min = 60000.0 / trace.duration_ms
    gaps = events["gaps"]
    naturalness = naturalness_report(trace, audio=audio)
    return ConversationReport(
        duration_ms=trace.duration_ms,
        overlaps_per_min=len(events["overlaps"]) * per_min,
        backchannels_per_min=len(events["backchannels"]) * per_min,
        pauses_per_min=len(events["pauses"]) * per_min,
        avg_gap_ms=(sum(g[0] for g in gaps) / len(gaps)) if gaps else None,
        counts={
            "overlaps": len(events["overlaps"]),
            "backchannels": len(events["backchannels"]),
            "pauses": len(events["pauses"]),
            "gaps": len(gaps),
        },
        naturalness=None if naturalness.all_absent() else naturalness,
    )


@dataclass(frozen=True)
class ClassMetrics:
    support: int
    precision: float
    recall: float
    f1: float


@dataclass(frozen=True)
class ClassReport:
    """Per-action precision/recall/F1 plus overall accuracy."""

    per_class: dict
    accuracy: float

    def to_dict(self):
        return {
            "accuracy": self.accuracy,
            "classes": {
                a.name: vars(m).copy() for a, m in self.per_class.items()
            },
        }


def f1_score(precision: float, recall: float) -> float:
    return 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0


def classification_report(gold, predicted) -> ClassReport:
    """Standard multi-class report over the four dialogue actions."""
    gold = [Action(a) for a in gold]
    predicted = [Action(a) for a in predicted]
    if len(gold) != len(predicted):
        raise ValidationError(
            f"gold and predicted lengths differ: {len(gold)} vs {len(predicted)}"
        )
    if not gold:
        raise ValidationError("cannot score empty label lists")
    per_class = {}
    correct = sum(1 for g, p in zip(gold, predicted) if g == p)
    for action in Action:
        tp = sum(1 for g, p in zip(gold, predicted) if g == action and p == action)
        fp = sum(1 for g, p in zip(gold, predicted) if g != action and p == action)
        fn = sum(1 for g, p in zip(gold, predicted) if g == action and p != action)
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        per_class[action] = ClassMetrics(
            support=tp + fn,
            precision=precision,
            recall=recall,
            f1=f1_score(precision, recall),
        )
    return ClassReport(per_class=per_class, accuracy=correct / len(gold))


def _fmt(value) -> str:
    if value is None:
        return "-"
    text = f"{value:.1f}".rstrip("0").rstrip(".")
    return text if text else "0"


def format_report_table(rows) -> str:
    """Aligned text table of (name, ConversationReport) rows."""
    header = ("conversation", "overlaps/min", "backchannels/min", "pauses/min", "avg_gap_ms")
    table = [header]
    for name, rep in rows:
        table.append(
            (
                str(name),
                _fmt(rep.overlaps_per_min),
                _fmt(rep.backchannels_per_min),
                _fmt(rep.pauses_per_min),
                _fmt(rep.avg_gap_ms),
            )
        )
    widths = [max(len(r[c]) for r in table) for c in range(len(header))]
    lines = [
        "  ".join(cell.ljust(widths[c]) for c, cell in enumerate(row)).rstrip()
        for row in table
    ]
    return "\n".join(lines)


def format_class_report(report: ClassReport) -> str:
    lines = [
        f"{'action':<8}{'support':>8}{'precision':>11}{'recall':>8}{'f1':>7}"
    ]
    for action in Action:
        m = report.per_class[action]
        lines.append(
            f"{action.name:<8}{m.support:>8}{m.precision:>11.3f}{m.recall:>8.3f}{m.f1:>7.3f}"
        )
    lines.append(f"accuracy {report.accuracy:.3f}")
    return "\n".join(lines)
