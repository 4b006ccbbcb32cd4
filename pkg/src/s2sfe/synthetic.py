"""A toy locale with a rule-based teacher, for desk-scale end-to-end experiments.

Raw sentences mix lexicon words with numbers 0-9999, optionally glued to a
unit ("70kmh"). The teacher spells numbers and units out in words, drops
sentence-final punctuation, and maps each letter of each normalized word
through a fixed letter-to-phone table.

Run as a line-oriented teacher command::

    python -m s2sfe.synthetic --form normalized < raw.txt > normalized.txt
"""
from __future__ import annotations

import argparse
import random
import re
import sys

from .corpus import ParallelCorpus, Stage

ONES = ["zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine",
        "ten", "eleven", "twelve", "thirteen", "fourteen", "fifteen", "sixteen",
        "seventeen", "eighteen", "nineteen"]
TENS = ["", "", "twenty", "thirty", "forty", "fifty", "sixty", "seventy", "eighty", "ninety"]

UNITS = {
    "kg": ("kilogram", "kilograms"),
    "km": ("kilometer", "kilometers"),
    "kmh": ("kilometer per hour", "kilometers per hour"),
    "m": ("meter", "meters"),
    "h": ("hour", "hours"),
    "%": ("percent", "percent"),
}

LEXICON = (
    "the a wind that stiffened to by lunch box weighs about road is long we drove "
    "for train left after price rose fell storm moved at speed of bag held nearly "
    "river ran over town grew cat slept tree stood near house sold in year time "
    "people came with water was more than less only each day"
).split()

LETTER_TO_PHONE = {
    "a": "æ", "b": "b", "c": "k", "d": "d", "e": "ɛ", "f": "f", "g": "ɡ", "h": "h",
    "i": "ɪ", "j": "ʤ", "k": "k", "l": "l", "m": "m", "n": "n", "o": "ɒ", "p": "p",
    "q": "q", "r": "ɹ", "s": "s", "t": "t", "u": "ʌ", "v": "v", "w": "w", "x": "χ",
    "y": "j", "z": "z",
}

_NUM_TOKEN = re.compile(r"^(\d{1,4})(%s)?$" % "|".join(
    re.escape(u) for u in sorted(UNITS, key=len, reverse=True)))


def number_to_words(n: int) -> str:
    if not 0 <= n <= 9999:
        raise ValueError(f"{n} outside 0..9999")
    if n < 20:
        return ONES[n]
    if n < 100:
        tens, ones = divmod(n, 10)
        return TENS[tens] + ("" if ones == 0 else " " + ONES[ones])
    if n < 1000:
        hundreds, rest = divmod(n, 100)
        head = ONES[hundreds] + " hundred"
        return head if rest == 0 else head + " " + number_to_words(rest)
    thousands, rest = divmod(n, 1000)
    head = ONES[thousands] + " thousand"
    return head if rest == 0 else head + " " + number_to_words(rest)


def normalize(text: str) -> str:
    words = []
    for tok in text.split():
        tok = tok.rstrip(".")
        if not tok:
            continue
        m = _NUM_TOKEN.match(tok)
        if m:
            value = int(m.group(1))
            words.append(number_to_words(value))
            if m.group(2):
                singular, plural = UNITS[m.group(2)]
                words.append(singular if value == 1 else plural)
        else:
            words.append(tok)
    return " ".join(words)


def pronounce(text: str) -> str:
    return " ".join("".join(LETTER_TO_PHONE.get(ch, ch) for ch in word)
                    for word in text.split())


def combined(text: str) -> str:
    return pronounce(normalize(text))


FORMS = {"normalized": normalize, "phones": pronounce, "combined": combined}


def random_number_token(rng: random.Random) -> str:
    # log-uniform-ish magnitude so small numbers are not swamped by 4-digit ones
    digits = rng.choice((1, 2, 3, 4))
    value = rng.randrange(10 ** (digits - 1) if digits > 1 else 0, 10 ** digits)
    unit = rng.choice(list(UNITS)) if rng.random() < 0.5 else ""
    return f"{value}{unit}"


def random_sentence(rng: random.Random, min_words: int = 3, max_words: int = 8,
                    max_numbers: int = 2) -> str:
    n = rng.randint(min_words, max_words)
    words = [rng.choice(LEXICON) for _ in range(n)]
    for _ in range(rng.randint(1, max_numbers)):
        words[rng.randrange(n)] = random_number_token(rng)
    if rng.random() < 0.5:
        words[-1] += "."
    return " ".join(words)


def generate_raw(n: int, seed: int = 0, **kw) -> list[str]:
    rng = random.Random(seed)
    return [random_sentence(rng, **kw) for _ in range(n)]


def make_corpora(raw: list[str]) -> dict[Stage, ParallelCorpus]:
    """The three stage pairings of one raw sentence list."""
    norm = [normalize(s) for s in raw]
    phones = [pronounce(s) for s in norm]
    return {
        Stage.NORMALIZATION: ParallelCorpus.from_strings(Stage.NORMALIZATION, raw, norm),
        Stage.PRONUNCIATION: ParallelCorpus.from_strings(Stage.PRONUNCIATION, norm, phones),
        Stage.COMBINED: ParallelCorpus.from_strings(Stage.COMBINED, raw, phones),
    }


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description="toy-locale teacher: stdin lines -> stdout lines")
    ap.add_argument("--form", choices=sorted(FORMS), default="combined")
    args = ap.parse_args(argv)
    fn = FORMS[args.form]
    for line in sys.stdin:
        sys.stdout.write(fn(line.rstrip("\n")) + "\n")
    sys.stdout.flush()
    return 0


if __name__ == "__main__":
    sys.exit(main())
