"""Simulated translators for measuring what chunk splicing buys on long inputs."""
from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass

from .corpus import Sentence
from .metrics import bleu
from .splice import SpliceConfig, translate_long


def _rng_for(seed: int, text: str) -> random.Random:
    digest = hashlib.blake2b(f"{seed}\x00{text}".encode("utf-8"), digest_size=8).digest()
    return random.Random(int.from_bytes(digest, "little"))


@dataclass(frozen=True)
class DegradingTranslator:
    """Identity translation that gets worse once the input exceeds ``clean_words``.

    Each word is corrupted with probability ``slope * (n - clean_words)`` for an
    n-word input (0 within the clean length); a corrupted word is dropped or
    replaced with equal odds. Output depends only on (seed, input text).
    """

    seed: int = 0
    clean_words: int = 25
    slope: float = 0.01

    def corruption(self, n_words: int) -> float:
        return min(1.0, max(0.0, self.slope * (n_words - self.clean_words)))

    def __call__(self, sentence: Sentence) -> Sentence:
        words = sentence.words
        p = self.corruption(len(words))
        if p == 0.0:
            return Sentence(" ".join(words))
        rng = _rng_for(self.seed, sentence.text)
        out = []
        for w in words:
            if rng.random() < p:
                if rng.random() < 0.5:
                    continue
                out.append(w[::-1] + "~")
            else:
                out.append(w)
        return Sentence(" ".join(out))


def random_long_sentences(n: int, min_words: int = 40, max_words: int = 80, seed: int = 0,
                          vocab_size: int = 500) -> list[str]:
    rng = random.Random(seed)
    return [" ".join(f"w{rng.randrange(vocab_size)}" for _ in range(rng.randint(min_words, max_words)))
            for _ in range(n)]


@dataclass
class SpliceBenefit:
    bleu_spliced: float
    bleu_unspliced: float

    @property
    def gain(self) -> float:
        return self.bleu_spliced - self.bleu_unspliced


def splice_benefit(n: int = 500, seed: int = 0, config: SpliceConfig = SpliceConfig(),
                   translator: DegradingTranslator | None = None) -> SpliceBenefit:
    """Corpus BLEU of whole-sentence vs chunked-and-spliced translation of long sentences."""
    tr = translator or DegradingTranslator(seed=seed, clean_words=config.window)
    refs = random_long_sentences(n, seed=seed)
    whole = [tr(Sentence(s)).text for s in refs]
    spliced = [translate_long(Sentence(s), tr, config).text for s in refs]
    return SpliceBenefit(bleu(spliced, refs), bleu(whole, refs))
