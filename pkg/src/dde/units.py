"""Discrete speech-unit post-processing: dedup, byte-pair encoding, error rate.

Raw unit sequences carry one id per 20ms frame. Before BPE they are
deduplicated (runs of identical adjacent ids collapse to one).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import groupby

from . import _kernels
from .errors import ValidationError
from .segments import FRAME_MS


def dedup(seq) -> tuple[int, ...]:
    """Collapse adjacent equal ids; order preserved, idempotent."""
    return tuple(k for k, _ in groupby(seq))


def units_duration_ms(raw_seq) -> int:
    """Audio duration covered by a raw (pre-dedup) unit sequence."""
    return FRAME_MS * len(raw_seq)


@dataclass(frozen=True)
class BpeVocab:
    """Ordered merge table over a base alphabet of raw unit ids 0..K-1.

    Merge k maps an adjacent (left, right) pair to the new id K+k; operands may
    be base ids or ids created by earlier merges.
    """

    base_alphabet_size: int
    merges: tuple[tuple[int, int, int], ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.base_alphabet_size <= 0:
            raise ValidationError("base alphabet size must be positive")
        object.__setattr__(
            self, "merges", tuple((int(l), int(r), int(n)) for l, r, n in self.merges)
        )
        known = self.base_alphabet_size
        for left, right, new in self.merges:
            if not (0 <= left < known and 0 <= right < known):
                raise ValidationError(
                    f"merge ({left},{right})->{new} references unknown ids"
                )
            if new != known:
                raise ValidationError(
                    f"merge ids must be consecutive from {self.base_alphabet_size}; "
                    f"got {new}, expected {known}"
                )
            known += 1

    @property
    def size(self) -> int:
        return self.base_alphabet_size + len(self.merges)

    def to_dict(self):
        return {
            "base_alphabet_size": self.base_alphabet_size,
            "merges": [list(m) for m in self.merges],
        }

    def to_json(self, indent=None) -> str:
        return json.dumps(self.to_dict(), indent=indent, sort_keys=True)

    @classmethod
    def from_dict(cls, data) -> "BpeVocab":
        return cls(
            base_alphabet_size=int(data["base_alphabet_size"]),
            merges=tuple(tuple(m) for m in data.get("merges", ())),
        )

    @classmethod
    def from_json(cls, text: str) -> "BpeVocab":
        try:
            return cls.from_dict(json.loads(text))
        except (json.JSONDecodeError, KeyError) as exc:
            raise ValidationError(f"malformed vocab JSON: {exc}") from exc


def _check_raw(seq, base_alphabet_size: int) -> None:
    prev = None
    for u in seq:
        if u < 0 or u >= base_alphabet_size:
            raise ValidationError(
                f"raw unit id {u} outside alphabet [0, {base_alphabet_size})"
            )
        if u == prev:
            raise ValidationError("sequence must be deduplicated before BPE")
        prev = u


def _merge_pass(seq: list[int], left: int, right: int, new: int) -> list[int]:
    # one exhaustive left-to-right replacement of (left, right) by new
    out = []
    i = 0
    n = len(seq)
    while i < n:
        if i + 1 < n and seq[i] == left and seq[i + 1] == right:
            out.append(new)
            i += 2
        else:
            out.append(seq[i])
            i += 1
    return out


def bpe_train(corpus, num_merges: int, base_alphabet_size: int) -> BpeVocab:
    """Greedy BPE over deduplicated unit sequences.

    Each round merges the most frequent adjacent pair everywhere (ties go to
    the lexicographically smallest pair) and assigns the next free id.
    Training stops early once no pair occurs twice.
    """
    if num_merges < 0:
        raise ValidationError("num_merges must be >= 0")
    seqs = []
    for seq in corpus:
        seq = list(seq)
        _check_raw(seq, base_alphabet_size)
        seqs.append(seq)
    merges = []
    next_id = base_alphabet_size
    for _ in range(num_merges):
        counts: dict[tuple[int, int], int] = {}
        for seq in seqs:
            for pair in zip(seq, seq[1:]):
                counts[pair] = counts.get(pair, 0) + 1
        if not counts:
            break
        best = min(counts.items(), key=lambda kv: (-kv[1], kv[0]))
        (left, right), freq = best
        if freq < 2:
            break
        merges.append((left, right, next_id))
        seqs = [_merge_pass(seq, left, right, next_id) for seq in seqs]
        next_id += 1
    return BpeVocab(base_alphabet_size=base_alphabet_size, merges=tuple(merges))


def bpe_encode(vocab: BpeVocab, seq) -> tuple[int, ...]:
    """Apply the vocab's merges in training order, each exhaustively."""
    seq = list(seq)
    _check_raw(seq, vocab.base_alphabet_size)
    for left, right, new in vocab.merges:
        seq = _merge_pass(seq, left, right, new)
    return tuple(seq)


def bpe_decode(vocab: BpeVocab, seq) -> tuple[int, ...]:
    """Expand merged ids back to base ids."""
    table = {new: (left, right) for left, right, new in vocab.merges}
    out = []
    for u in seq:
        u = int(u)
        if u < 0 or u >= vocab.size:
            raise ValidationError(f"unknown id {u} for a vocab of size {vocab.size}")
        stack = [u]
        while stack:
            v = stack.pop()
            if v < vocab.base_alphabet_size:
                out.append(v)
            else:
                left, right = table[v]
                stack.append(right)
                stack.append(left)
    return tuple(out)


def unit_error_rate(reference, hypothesis) -> float:
    """Edit distance (unit substitutions/insertions/deletions, unit cost)
    divided by reference length. May exceed 1."""
    ref = list(reference)
    hyp = list(hypothesis)
    if not ref:
        raise ValidationError("reference sequence must be non-empty")
    return _kernels.levenshtein(ref, hyp) / len(ref)
