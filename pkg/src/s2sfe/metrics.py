"""Corpus BLEU, chrF3 and categorized sentence diffs."""
from __future__ import annotations

import math
import re
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .corpus import split_words
from .errors import AlignmentError, LabelParseError


@dataclass(frozen=True)
class BleuConfig:
    max_n: int = 4

    def __post_init__(self):
        if self.max_n < 1:
            raise ValueError("max_n must be >= 1")


@dataclass(frozen=True)
class ChrfConfig:
    max_n: int = 6
    beta: float = 3.0

    def __post_init__(self):
        if self.beta <= 0:
            raise ValueError("beta must be > 0")
        if self.max_n < 1:
            raise ValueError("max_n must be >= 1")


def _check_lengths(candidates, references):
    if len(candidates) != len(references):
        raise AlignmentError(len(candidates), len(references), "sentences")


def ngram_counts(items: Sequence, n: int) -> Counter:
    return Counter(tuple(items[i:i + n]) for i in range(len(items) - n + 1))


@dataclass
class BleuStats:
    matches: list[int]
    totals: list[int]
    cand_len: int = 0
    ref_len: int = 0

    @property
    def score(self) -> float:
        if self.cand_len == 0 or any(m == 0 for m in self.matches):
            return 0.0
        log_prec = sum(math.log(m / t) for m, t in zip(self.matches, self.totals))
        log_prec /= len(self.matches)
        bp = math.exp(min(0.0, 1.0 - self.ref_len / self.cand_len))
        return 100.0 * bp * math.exp(log_prec)


def bleu_stats(candidates: Sequence[str], references: Sequence[str],
               config: BleuConfig = BleuConfig()) -> BleuStats:
    _check_lengths(candidates, references)
    stats = BleuStats([0] * config.max_n, [0] * config.max_n)
    for cand, ref in zip(candidates, references):
        c_words = split_words(cand)
        r_words = split_words(ref)
        stats.cand_len += len(c_words)
        stats.ref_len += len(r_words)
        for n in range(1, config.max_n + 1):
            c = ngram_counts(c_words, n)
            r = ngram_counts(r_words, n)
            stats.matches[n - 1] += sum((c & r).values())
            stats.totals[n - 1] += max(0, len(c_words) - n + 1)
    return stats


def bleu(candidates: Sequence[str], references: Sequence[str],
         config: BleuConfig = BleuConfig()) -> float:
    """Corpus BLEU on whitespace tokens, 0-100, no smoothing.

    Any order without a single match collapses the geometric mean to 0.
    """
    if not candidates:
        raise ValueError("BLEU needs at least one sentence pair")
    return bleu_stats(candidates, references, config).score


def _chars(text: str) -> str:
    return "".join(ch for ch in text if not ch.isspace())


def chrf(candidates: Sequence[str], references: Sequence[str],
         config: ChrfConfig = ChrfConfig()) -> float:
    """Character n-gram F-score in [0, 1] with whitespace removed.

    Counts are pooled over the corpus per order; F_beta is taken per order and
    averaged over orders that have reference n-grams.
    """
    _check_lengths(candidates, references)
    n_max = config.max_n
    matched = [0] * n_max
    hyp_total = [0] * n_max
    ref_total = [0] * n_max
    for cand, ref in zip(candidates, references):
        c = _chars(cand)
        r = _chars(ref)
        for n in range(1, n_max + 1):
            cc = ngram_counts(c, n)
            rc = ngram_counts(r, n)
            matched[n - 1] += sum((cc & rc).values())
            hyp_total[n - 1] += max(0, len(c) - n + 1)
            ref_total[n - 1] += max(0, len(r) - n + 1)
    b2 = config.beta ** 2
    scores = []
    for m, h, r in zip(matched, hyp_total, ref_total):
        if r == 0:
            continue
        prec = m / h if h else 0.0
        rec = m / r
        if prec == 0.0 and rec == 0.0:
            scores.append(0.0)
        else:
            scores.append((1 + b2) * prec * rec / (b2 * prec + rec))
    if not scores:
        # no reference characters at all: perfect only if the candidates are empty too
        return 1.0 if not any(hyp_total) else 0.0
    return sum(scores) / len(scores)


# -- diff report -------------------------------------------------------------

CATEGORIES = ("identical", "punctuation_only", "second_language", "other")
HUMAN_LABELS = ("better", "equal", "worse")

LOCALE_SCRIPTS = {
    "ru": {"CYRILLIC"},
    "uk": {"CYRILLIC"},
    "bg": {"CYRILLIC"},
    "el": {"GREEK"},
    "he": {"HEBREW"},
    "ar": {"ARABIC"},
    "hi": {"DEVANAGARI"},
    "th": {"THAI"},
    "ja": {"CJK", "HIRAGANA", "KATAKANA"},
    "zh": {"CJK"},
    "ko": {"HANGUL"},
}

SECOND_LANGUAGE_THRESHOLD = 0.30


def scripts_for_locale(locale: str) -> set[str]:
    lang = locale.split("-")[0].split("_")[0].lower()
    return set(LOCALE_SCRIPTS.get(lang, {"LATIN"}))


def char_script(ch: str) -> str:
    name = unicodedata.name(ch, "")
    return name.split(" ")[0] if name else ""


def strip_punctuation(text: str) -> str:
    kept = "".join(ch for ch in text if not unicodedata.category(ch).startswith("P"))
    return " ".join(split_words(kept))


def foreign_fraction(text: str, scripts: set[str]) -> float:
    letters = [ch for ch in text if ch.isalpha()]
    if not letters:
        return 0.0
    foreign = sum(1 for ch in letters if char_script(ch) not in scripts)
    return foreign / len(letters)


def categorize(candidate: str, reference: str, scripts: set[str]) -> str:
    if candidate == reference:
        return "identical"
    if strip_punctuation(candidate) == strip_punctuation(reference):
        return "punctuation_only"
    # either side may carry the foreign text (a mistranslation, or a foreign input)
    if max(foreign_fraction(candidate, scripts),
           foreign_fraction(reference, scripts)) > SECOND_LANGUAGE_THRESHOLD:
        return "second_language"
    return "other"


@dataclass
class DiffRecord:
    index: int
    candidate: str
    reference: str
    category: str
    label: str | None = None


@dataclass
class DiffReport:
    total: int
    differing: int
    categories: dict[str, int]
    records: list[DiffRecord] = field(default_factory=list)
    labels: dict[str, int] = field(default_factory=dict)

    def differing_records(self) -> list[DiffRecord]:
        return [r for r in self.records if r.category != "identical"]

    def summary_lines(self) -> list[str]:
        lines = [f"total\t{self.total}", f"differing\t{self.differing}"]
        for cat in CATEGORIES:
            n = self.categories.get(cat, 0)
            pct = 100.0 * n / self.differing if self.differing and cat != "identical" else 0.0
            lines.append(f"{cat}\t{n}" + (f"\t{pct:.0f}%" if cat != "identical" else ""))
        for lab in HUMAN_LABELS:
            if lab in self.labels:
                lines.append(f"label:{lab}\t{self.labels[lab]}")
        return lines

    def tsv_lines(self, include_identical: bool = False) -> list[str]:
        out = []
        for r in self.records:
            if r.category == "identical" and not include_identical:
                continue
            fields = [str(r.index), r.category, _tsv_escape(r.candidate),
                      _tsv_escape(r.reference)]
            if r.label is not None:
                fields.append(r.label)
            out.append("\t".join(fields))
        return out

    def write(self, text_path=None, tsv_path=None) -> None:
        if text_path is not None:
            Path(text_path).write_text("\n".join(self.summary_lines()) + "\n", encoding="utf-8")
        if tsv_path is not None:
            body = "".join(line + "\n" for line in self.tsv_lines())
            Path(tsv_path).write_text(body, encoding="utf-8")


def _tsv_escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace("\t", "\\t")


def read_labels(path) -> dict[int, str]:
    """Parse ``index<TAB>label`` lines; blank lines and ``#`` comments are skipped."""
    labels = {}
    text = Path(path).read_text(encoding="utf-8")
    for no, line in enumerate(text.split("\n"), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        parts = re.split(r"\t| +", stripped)
        if len(parts) != 2 or not parts[0].isdigit() or parts[1] not in HUMAN_LABELS:
            raise LabelParseError(no, line)
        labels[int(parts[0])] = parts[1]
    return labels


def diff_report(candidates: Sequence[str], references: Sequence[str],
                labels=None, locale: str = "en-US",
                scripts: set[str] | None = None) -> DiffReport:
    """Categorize every pair; human labels (a mapping or a label file path) are attached
    to the records without changing the automatic category."""
    _check_lengths(candidates, references)
    if scripts is None:
        scripts = scripts_for_locale(locale)
    if labels is not None and not isinstance(labels, dict):
        labels = read_labels(labels)
    labels = labels or {}
    counts = {cat: 0 for cat in CATEGORIES}
    label_counts: dict[str, int] = {}
    records = []
    for i, (cand, ref) in enumerate(zip(candidates, references)):
        cat = categorize(cand, ref, scripts)
        counts[cat] += 1
        lab = labels.get(i)
        if lab is not None:
            label_counts[lab] = label_counts.get(lab, 0) + 1
        records.append(DiffRecord(i, cand, ref, cat, lab))
    total = len(records)
    return DiffReport(total, total - counts["identical"], counts, records, label_counts)
