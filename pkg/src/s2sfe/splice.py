"""Overlapping word windows for long sentences and splicing of their translations."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

from .corpus import Sentence
from .errors import EmptyOutputError, PlanError, TranslationError


@dataclass(frozen=True)
class SpliceConfig:
    window: int = 25
    overlap: int = 10

    def __post_init__(self):
        if not 0 < self.overlap < self.window:
            raise ValueError(f"need 0 < overlap < window, got overlap={self.overlap}, "
                             f"window={self.window}")

    @property
    def stride(self) -> int:
        return self.window - self.overlap


@dataclass(frozen=True)
class ChunkPlan:
    spans: tuple[tuple[int, int], ...]

    @property
    def n_words(self) -> int:
        return self.spans[-1][1] if self.spans else 0

    def overlaps(self) -> list[int]:
        return [a[1] - b[0] for a, b in zip(self.spans, self.spans[1:])]

    def describe(self) -> str:
        return " ".join(f"{s}:{e}" for s, e in self.spans)

    @classmethod
    def parse(cls, text: str) -> "ChunkPlan":
        spans = []
        for item in text.split():
            try:
                s, e = item.split(":")
                spans.append((int(s), int(e)))
            except ValueError:
                raise PlanError(f"bad span {item!r}; expected START:END") from None
        return cls(tuple(spans))


@dataclass(frozen=True)
class SpliceJoin:
    offset: int  # shift from the nominal alignment
    score: int   # equal words in the aligned overlap
    cut: int     # position inside the aligned overlap where right output takes over
    start: int   # index in the left output aligned with the right output's first word
    length: int  # aligned overlap length


def chunk(words: Sequence, config: SpliceConfig = SpliceConfig()) -> ChunkPlan:
    n = len(words)
    if n <= config.window:
        return ChunkPlan(((0, n),))
    spans = []
    start = 0
    while start + config.window < n:
        spans.append((start, start + config.window))
        start += config.stride
    # right-anchored final window; its overlap with the previous one is >= config.overlap
    spans.append((n - config.window, n))
    return ChunkPlan(tuple(spans))


def _band_score(left: Sequence[str], right: Sequence[str], start: int,
                limit: int) -> tuple[int, int]:
    length = min(len(left) - start, len(right), limit)
    score = sum(1 for k in range(length) if left[start + k] == right[k])
    return score, length


def align_pair(left_out: Sequence[str], right_out: Sequence[str],
               expected_overlap_words: int) -> SpliceJoin:
    """Find the banded shift that maximizes word agreement between the two outputs.

    The nominal alignment places ``right_out[0]`` on
    ``left_out[len(left_out) - expected_overlap_words]``; shifts of up to
    ``expected_overlap_words`` either way are tried. Ties prefer the shift
    closest to nominal, then the smaller shift.

    At most ``expected_overlap_words`` positions are compared per shift, so a
    shift toward the left cannot win merely by exposing a longer overlap.
    """
    if not left_out or not right_out:
        raise EmptyOutputError("cannot align an empty output")
    n_left = len(left_out)
    exp = max(0, min(expected_overlap_words, n_left))
    nominal = n_left - exp
    best = None
    best_key = None
    for offset in range(-exp, exp + 1):
        start = nominal + offset
        if start < 0 or start > n_left:
            continue
        score, length = _band_score(left_out, right_out, start, exp)
        key = (-score, abs(offset), offset)
        if best_key is None or key < best_key:
            best_key = key
            best = SpliceJoin(offset=offset, score=score, cut=length // 2,
                              start=start, length=length)
    return best


def join(left_out: Sequence[str], right_out: Sequence[str], j: SpliceJoin) -> list[str]:
    return list(left_out[:j.start + j.cut]) + list(right_out[j.cut:])


def expected_output_overlap(input_overlap: int, span_len: int, out_len: int) -> int:
    """Scale the input overlap by the right chunk's output/input length ratio."""
    if span_len <= 0:
        return 0
    return int(round(input_overlap * out_len / span_len))


def splice(outputs: Sequence[Sequence[str]], plan: ChunkPlan,
           config: SpliceConfig = SpliceConfig()) -> list[str]:
    if len(outputs) != len(plan.spans):
        raise PlanError(f"{len(outputs)} outputs for {len(plan.spans)} spans")
    if not outputs:
        return []
    acc = list(outputs[0])
    for (prev, span), out in zip(zip(plan.spans, plan.spans[1:]), outputs[1:]):
        if not out:
            continue
        if not acc:
            acc = list(out)
            continue
        in_overlap = max(0, prev[1] - span[0])
        exp = expected_output_overlap(in_overlap, span[1] - span[0], len(out))
        acc = join(acc, out, align_pair(acc, out, exp))
    return acc


Translator = Callable[[Sentence], Sentence]


def translate_long(sentence: Sentence, translator: Translator,
                   config: SpliceConfig = SpliceConfig()) -> Sentence:
    words = sentence.words
    if len(words) <= config.window:
        return translator(sentence)
    plan = chunk(words, config)
    outputs = []
    for span in plan.spans:
        piece = Sentence(" ".join(words[span[0]:span[1]]))
        try:
            outputs.append(translator(piece).words)
        except Exception as exc:
            raise TranslationError(span, exc) from exc
    return Sentence(" ".join(splice(outputs, plan, config)))
