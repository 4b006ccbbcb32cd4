"""Parallel corpora for the three frontend stages, teacher extraction and splitting."""
from __future__ import annotations

import enum
import re
import shlex
import subprocess
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .errors import AlignmentError, CorpusDecodeError, CorpusSizeError, TeacherError

_WS = re.compile(r"[ \t\n\r\f\v]+")


def split_words(text: str) -> list[str]:
    """Split on runs of ASCII whitespace only; other Unicode spaces stay inside words."""
    return [w for w in _WS.split(text) if w]


class Stage(enum.Enum):
    NORMALIZATION = "normalization"
    PRONUNCIATION = "pronunciation"
    COMBINED = "combined"

    @property
    def source_form(self) -> str:
        return _STAGE_FORMS[self][0]

    @property
    def target_form(self) -> str:
        return _STAGE_FORMS[self][1]

    @classmethod
    def parse(cls, name: str) -> "Stage":
        try:
            return cls(name.lower())
        except ValueError:
            raise ValueError(f"unknown stage {name!r}; expected one of "
                             f"{[s.value for s in cls]}") from None


_STAGE_FORMS = {
    Stage.NORMALIZATION: ("unnormalized", "normalized"),
    Stage.PRONUNCIATION: ("normalized", "phone sequence"),
    Stage.COMBINED: ("unnormalized", "phone sequence"),
}


@dataclass(frozen=True)
class Sentence:
    text: str

    def __post_init__(self):
        if "\n" in self.text or "\r" in self.text:
            raise ValueError("sentence text must not contain line breaks")

    @property
    def words(self) -> list[str]:
        return split_words(self.text)

    def normalized(self) -> "Sentence":
        return Sentence(" ".join(self.words))

    def __str__(self) -> str:
        return self.text


@dataclass
class ParallelCorpus:
    stage: Stage
    pairs: list[tuple[Sentence, Sentence]] = field(default_factory=list)

    @classmethod
    def from_strings(cls, stage: Stage, sources: Sequence[str],
                     targets: Sequence[str]) -> "ParallelCorpus":
        if len(sources) != len(targets):
            raise AlignmentError(len(sources), len(targets))
        return cls(stage, [(Sentence(s), Sentence(t)) for s, t in zip(sources, targets)])

    def __len__(self) -> int:
        return len(self.pairs)

    @property
    def sources(self) -> list[str]:
        return [s.text for s, _ in self.pairs]

    @property
    def targets(self) -> list[str]:
        return [t.text for _, t in self.pairs]

    def deduplicated(self) -> "ParallelCorpus":
        seen = set()
        kept = []
        for src, tgt in self.pairs:
            key = (src.text, tgt.text)
            if key not in seen:
                seen.add(key)
                kept.append((src, tgt))
        return ParallelCorpus(self.stage, kept)

    def write(self, src_path, tgt_path) -> None:
        write_lines(src_path, self.sources)
        write_lines(tgt_path, self.targets)


@dataclass(frozen=True)
class SplitSpec:
    n_valid: int
    n_test: int
    seed: int = 0


def read_lines(path) -> list[str]:
    """Read a UTF-8 file as one sentence per line, trailing whitespace stripped."""
    data = Path(path).read_bytes()
    raw = data.split(b"\n")
    if raw and raw[-1] == b"":
        raw.pop()
    lines = []
    for i, chunk in enumerate(raw, start=1):
        try:
            line = chunk.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise CorpusDecodeError(path, i, exc.reason) from None
        lines.append(line.rstrip(" \t\r\f\v"))
    return lines


def write_lines(path, lines: Iterable[str]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for line in lines:
            fh.write(line)
            fh.write("\n")


def load_parallel(src_path, tgt_path, stage: Stage) -> ParallelCorpus:
    src = read_lines(src_path)
    tgt = read_lines(tgt_path)
    if len(src) != len(tgt):
        raise AlignmentError(len(src), len(tgt))
    return ParallelCorpus.from_strings(stage, src, tgt)


class XorShift64Star:
    """xorshift64* generator (Vigna 2014): shifts 12/25/27, multiplier 0x2545F4914F6CDD1D.

    A zero seed is replaced by a fixed nonzero constant since the all-zero state is absorbing.
    """

    MASK = (1 << 64) - 1

    def __init__(self, seed: int):
        state = seed & self.MASK
        self.state = state if state else 0x9E3779B97F4A7C15

    def next_u64(self) -> int:
        x = self.state
        x ^= x >> 12
        x ^= (x << 25) & self.MASK
        x ^= x >> 27
        self.state = x
        return (x * 0x2545F4914F6CDD1D) & self.MASK

    def below(self, n: int) -> int:
        # multiply-shift range reduction
        return (self.next_u64() * n) >> 64

    def shuffle(self, items: list) -> None:
        for i in range(len(items) - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]


def split(corpus: ParallelCorpus, spec: SplitSpec
          ) -> tuple[ParallelCorpus, ParallelCorpus, ParallelCorpus]:
    """Deduplicate on the exact pair, then carve out disjoint valid/test sets.

    Each returned corpus keeps the original corpus order.
    """
    if spec.n_valid < 0 or spec.n_test < 0:
        raise ValueError("split sizes must be non-negative")
    uniq = corpus.deduplicated()
    n = len(uniq)
    if spec.n_valid + spec.n_test >= n:
        raise CorpusSizeError(
            f"corpus has {n} unique pairs; need more than "
            f"n_valid + n_test = {spec.n_valid + spec.n_test}")
    order = list(range(n))
    XorShift64Star(spec.seed).shuffle(order)
    valid_idx = sorted(order[:spec.n_valid])
    test_idx = sorted(order[spec.n_valid:spec.n_valid + spec.n_test])
    train_idx = sorted(order[spec.n_valid + spec.n_test:])

    def take(idx):
        return ParallelCorpus(corpus.stage, [uniq.pairs[i] for i in idx])

    return take(train_idx), take(valid_idx), take(test_idx)


def run_teacher(lines: Sequence[str], teacher_cmd, stage: Stage | None = None,
                timeout: float | None = None) -> list[str]:
    """Pipe ``lines`` through an external line-oriented command.

    ``teacher_cmd`` is either an argv list or a shell-style string; the
    placeholder ``{stage}`` is substituted with the stage name.
    """
    if isinstance(teacher_cmd, str):
        argv = shlex.split(teacher_cmd)
    else:
        argv = list(teacher_cmd)
    if stage is not None:
        argv = [a.replace("{stage}", stage.value) for a in argv]
    payload = "".join(line + "\n" for line in lines)
    proc = subprocess.run(argv, input=payload.encode("utf-8"), capture_output=True,
                          timeout=timeout)
    if proc.returncode != 0:
        raise TeacherError(argv, proc.returncode, proc.stderr.decode("utf-8", "replace"))
    out = proc.stdout.decode("utf-8").split("\n")
    if out and out[-1] == "":
        out.pop()
    out = [line.rstrip(" \t\r\f\v") for line in out]
    if len(out) != len(lines):
        raise AlignmentError(len(lines), len(out))
    return out


def build_from_teacher(raw_path, teacher_cmd, stage: Stage,
                       timeout: float | None = None) -> ParallelCorpus:
    raw = read_lines(raw_path)
    processed = run_teacher(raw, teacher_cmd, stage, timeout=timeout)
    return ParallelCorpus.from_strings(stage, raw, processed)
