"""Joint byte-pair encoding with ``@@`` continuation markers.

Merges are learned per word: the word boundary is never part of a pair, so a
merge can never span two words. Ties in pair frequency go to the
lexicographically smallest ``(left, right)``.
"""
from __future__ import annotations

import heapq
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .corpus import split_words
from .errors import CodecFormatError, DanglingContinuationError, EmptyInputError

MARKER = "@@"
UNK = "⟨unk⟩"
# raw "@@" in input text is swapped for this private-use character so the marker stays unambiguous
ESCAPE = "\uE000"
HEADER = "#s2sfe-bpe v1"
CHARS_MARKER = "#chars"


@dataclass(frozen=True)
class BpeConfig:
    num_merges: int = 32000
    unk_token: str = UNK

    def __post_init__(self):
        if self.num_merges < 0:
            raise ValueError("num_merges must be >= 0")


def escape(text: str) -> str:
    return text.replace(MARKER, ESCAPE)


def unescape(text: str) -> str:
    return text.replace(ESCAPE, MARKER)


def word_counts(corpora: Iterable[Iterable[str]]) -> Counter:
    counts: Counter = Counter()
    for stream in corpora:
        for line in stream:
            counts.update(split_words(escape(line)))
    return counts


def _merge_symbols(symbols: Sequence[str], left: str, right: str) -> list[str]:
    out = []
    i = 0
    n = len(symbols)
    while i < n:
        if i + 1 < n and symbols[i] == left and symbols[i + 1] == right:
            out.append(left + right)
            i += 2
        else:
            out.append(symbols[i])
            i += 1
    return out


def _pairs(symbols: Sequence[str]) -> Counter:
    return Counter(zip(symbols, symbols[1:]))


def learn(corpora: Iterable[Iterable[str]], config: BpeConfig = BpeConfig()) -> "BpeCodec":
    """Learn a joint merge table over all ``corpora`` (iterables of lines)."""
    counts = word_counts(corpora)
    if not counts:
        raise EmptyInputError("BPE learning needs at least one non-empty corpus")
    words = [list(w) for w in counts]
    freqs = list(counts.values())
    char_vocab = frozenset(ch for w in counts for ch in w)

    pair_counts: Counter = Counter()
    where: dict[tuple[str, str], set[int]] = defaultdict(set)
    for idx, (syms, freq) in enumerate(zip(words, freqs)):
        for pair, c in _pairs(syms).items():
            pair_counts[pair] += c * freq
            where[pair].add(idx)

    heap = [(-c, p[0], p[1]) for p, c in pair_counts.items()]
    heapq.heapify(heap)
    merges: list[tuple[str, str]] = []
    while len(merges) < config.num_merges and heap:
        negc, left, right = heapq.heappop(heap)
        pair = (left, right)
        current = pair_counts.get(pair, 0)
        if -negc != current:
            # stale entry; the live count was pushed separately
            continue
        if current < 2:
            break
        merges.append(pair)
        changed: dict[tuple[str, str], int] = {}
        for idx in where.pop(pair, ()):
            syms = words[idx]
            if len(syms) < 2:
                continue
            old = _pairs(syms)
            if pair not in old:
                continue
            new_syms = _merge_symbols(syms, left, right)
            new = _pairs(new_syms)
            freq = freqs[idx]
            for p, c in old.items():
                pair_counts[p] -= c * freq
                changed[p] = pair_counts[p]
            for p, c in new.items():
                pair_counts[p] += c * freq
                changed[p] = pair_counts[p]
                where[p].add(idx)
            words[idx] = new_syms
        pair_counts.pop(pair, None)
        changed.pop(pair, None)
        for p, c in changed.items():
            if c > 0:
                heapq.heappush(heap, (-c, p[0], p[1]))
            else:
                pair_counts.pop(p, None)
    return BpeCodec(merges, char_vocab)


@dataclass
class BpeCodec:
    merges: list[tuple[str, str]]
    char_vocab: frozenset
    unk_token: str = UNK
    _ranks: dict = field(init=False, repr=False)
    _cache: dict = field(init=False, repr=False)

    def __post_init__(self):
        self.merges = [tuple(m) for m in self.merges]
        self.char_vocab = frozenset(self.char_vocab)
        self._ranks = {}
        for rank, pair in enumerate(self.merges):
            if pair in self._ranks:
                raise CodecFormatError(f"duplicate merge {pair}")
            self._ranks[pair] = rank
        self._cache = {}

    def __eq__(self, other):
        if not isinstance(other, BpeCodec):
            return NotImplemented
        return (self.merges == other.merges and self.char_vocab == other.char_vocab
                and self.unk_token == other.unk_token)

    def segment_word(self, word: str) -> list[str]:
        """Subword pieces of an (already escaped) word, without markers."""
        hit = self._cache.get(word)
        if hit is not None:
            return hit
        if any(ch not in self.char_vocab for ch in word):
            pieces = [self.unk_token]
        else:
            pieces = list(word)
            ranks = self._ranks
            while len(pieces) > 1:
                best = None
                best_rank = None
                for pair in zip(pieces, pieces[1:]):
                    r = ranks.get(pair)
                    if r is not None and (best_rank is None or r < best_rank):
                        best, best_rank = pair, r
                if best is None:
                    break
                pieces = _merge_symbols(pieces, *best)
        self._cache[word] = pieces
        return pieces

    def encode(self, text: str) -> list[str]:
        tokens = []
        for word in split_words(escape(text)):
            pieces = self.segment_word(word)
            tokens.extend(p + MARKER for p in pieces[:-1])
            tokens.append(pieces[-1])
        return tokens

    def symbols(self) -> list[str]:
        """Every subword the codec can emit (bare form), in a stable order."""
        out = sorted(self.char_vocab)
        seen = set(out)
        for left, right in self.merges:
            s = left + right
            if s not in seen:
                seen.add(s)
                out.append(s)
        return out

    def save(self, path) -> None:
        lines = [HEADER]
        lines.extend(f"{left} {right}" for left, right in self.merges)
        lines.append(CHARS_MARKER)
        lines.extend(sorted(self.char_vocab))
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path) -> "BpeCodec":
        text = Path(path).read_text(encoding="utf-8")
        # split on LF only: some characters in the vocabulary count as line breaks for str.splitlines
        lines = text.split("\n")
        if lines and lines[-1] == "":
            lines.pop()
        if not lines or lines[0] != HEADER:
            raise CodecFormatError(f"{path}: missing header {HEADER!r}")
        try:
            sep = lines.index(CHARS_MARKER, 1)
        except ValueError:
            raise CodecFormatError(f"{path}: missing {CHARS_MARKER!r} section") from None
        merges = []
        for no, line in enumerate(lines[1:sep], start=2):
            parts = line.split(" ")
            if len(parts) != 2 or not parts[0] or not parts[1]:
                raise CodecFormatError(f"{path}:{no}: malformed merge line {line!r}")
            merges.append((parts[0], parts[1]))
        chars = lines[sep + 1:]
        for no, ch in enumerate(chars, start=sep + 2):
            if len(ch) != 1:
                raise CodecFormatError(f"{path}:{no}: expected one character, got {ch!r}")
        return cls(merges, frozenset(chars))


def encode(text: str, codec: BpeCodec) -> list[str]:
    return codec.encode(text)


def decode(tokens: Sequence[str]) -> str:
    words = []
    buf = []
    for tok in tokens:
        if tok.endswith(MARKER):
            buf.append(tok[:-len(MARKER)])
        else:
            buf.append(tok)
            words.append("".join(buf))
            buf = []
    if buf:
        raise DanglingContinuationError(
            f"token sequence ends with a continuation piece {tokens[-1]!r}")
    return unescape(" ".join(words))


PAD, BOS, EOS = "<pad>", "<s>", "</s>"


class Vocab:
    """Token/id mapping shared by encoder and decoder.

    Ids 0..3 are PAD, BOS, EOS and the unk token; each codec symbol then gets
    two ids, its continuation form first.
    """

    pad_id, bos_id, eos_id, unk_id = 0, 1, 2, 3

    def __init__(self, tokens: Sequence[str]):
        self.tokens = list(tokens)
        self.index = {t: i for i, t in enumerate(self.tokens)}
        if len(self.index) != len(self.tokens):
            raise ValueError("duplicate tokens in vocabulary")

    @classmethod
    def from_codec(cls, codec: BpeCodec) -> "Vocab":
        tokens = [PAD, BOS, EOS, codec.unk_token]
        for s in codec.symbols():
            tokens.append(s + MARKER)
            tokens.append(s)
        return cls(tokens)

    def __len__(self) -> int:
        return len(self.tokens)

    def ids(self, tokens: Iterable[str]) -> list[int]:
        unk = self.unk_id
        return [self.index.get(t, unk) for t in tokens]

    def to_tokens(self, ids: Iterable[int]) -> list[str]:
        out = []
        for i in ids:
            if i in (self.pad_id, self.bos_id):
                continue
            if i == self.eos_id:
                break
            out.append(self.tokens[i])
        return out

    def detokenize(self, ids: Iterable[int]) -> str:
        """Decode ids to text; a dangling continuation at the end is closed off."""
        toks = self.to_tokens(ids)
        if toks and toks[-1].endswith(MARKER):
            toks[-1] = toks[-1][:-len(MARKER)]
        return decode(toks)
