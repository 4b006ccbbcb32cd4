import math
import random

import pytest
from hypothesis import given, settings, strategies as st

from oracles import bleu_bruteforce, chrf_bruteforce
from s2sfe.errors import AlignmentError, LabelParseError
from s2sfe.metrics import (BleuConfig, ChrfConfig, bleu, categorize, chrf, diff_report,
                           scripts_for_locale)


def test_bleu_identity_and_disjoint():
    refs = ["the cat sat on the mat", "a b c d e"]
    assert bleu(refs, refs) == 100.0
    assert bleu(["x y z w"], ["a b c d"]) == 0.0


def test_bleu_short_candidate_by_hand():
    # 1-gram 3/3, 2-gram 2/2, 3-gram 1/1, 4-gram 0/0 -> zero 4-gram matches collapse to 0
    assert bleu(["the cat sat"], ["the cat sat down"]) == 0.0
    # with max_n=3 the precisions are all 1 and only the brevity penalty remains
    got = bleu(["the cat sat"], ["the cat sat down"], BleuConfig(3))
    assert got == pytest.approx(100 * math.exp(1 - 4 / 3), abs=1e-9)
    assert got == pytest.approx(bleu_bruteforce(["the cat sat"], ["the cat sat down"], 3),
                                abs=1e-9)


def test_bleu_errors():
    with pytest.raises(AlignmentError):
        bleu(["a"], ["a", "b"])
    with pytest.raises(ValueError):
        bleu([], [])


def test_chrf_identity_and_disjoint():
    assert chrf(["abc def"], ["abc def"]) == 1.0
    assert chrf(["xyz"], ["abc"]) == 0.0


def test_chrf_abc_vs_abcd_by_hand():
    # orders 1..3 are matched fully on the candidate side: P = 1, R = (3/4, 2/3, 1/2);
    # order 4 has a reference 4-gram but no candidate 4-gram: F = 0; orders 5, 6 are skipped
    def f(p, r):
        return 10 * p * r / (9 * p + r)

    expected = (f(1, 3 / 4) + f(1, 2 / 3) + f(1, 1 / 2) + 0.0) / 4
    assert chrf(["abc"], ["abcd"]) == pytest.approx(expected, abs=1e-12)


def test_chrf_ignores_whitespace():
    assert chrf(["a b c"], ["abc"]) == 1.0


def test_chrf_length_mismatch():
    with pytest.raises(AlignmentError):
        chrf(["a"], [])


VOCAB = list("abcde")


def _random_corpus(rng):
    n = rng.randint(1, 5)
    c = [" ".join(rng.choice(VOCAB) for _ in range(rng.randint(0, 8))) for _ in range(n)]
    r = [" ".join(rng.choice(VOCAB) for _ in range(rng.randint(0, 8))) for _ in range(n)]
    return c, r


def test_metrics_match_oracles_randomized():
    rng = random.Random(11)
    for _ in range(300):
        c, r = _random_corpus(rng)
        assert bleu(c, r) == pytest.approx(bleu_bruteforce(c, r), abs=1e-9)
        assert chrf(c, r) == pytest.approx(chrf_bruteforce(c, r), abs=1e-9)


sentences = st.lists(st.text("ab c", min_size=1, max_size=12).filter(lambda s: s.strip()),
                     min_size=1, max_size=6)


@settings(max_examples=100, deadline=None)
@given(sentences, st.randoms())
def test_permutation_invariance(sents, rnd):
    refs = list(reversed(sents))
    pairs = list(zip(sents, refs))
    shuffled = pairs[:]
    rnd.shuffle(shuffled)
    c2, r2 = zip(*shuffled)
    assert bleu(sents, refs) == pytest.approx(bleu(list(c2), list(r2)), abs=1e-12)
    assert chrf(sents, refs) == pytest.approx(chrf(list(c2), list(r2)), abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(sentences)
def test_self_scores(sents):
    assert bleu(sents, sents) == 100.0 or any(len(s.split()) < 4 for s in sents)
    assert chrf(sents, sents) == 1.0


def test_self_bleu_long_sentences():
    rng = random.Random(0)
    sents = [" ".join(rng.choice(VOCAB) for _ in range(rng.randint(4, 9))) for _ in range(20)]
    assert bleu(sents, sents) == 100.0


def test_config_validation():
    with pytest.raises(ValueError):
        BleuConfig(0)
    with pytest.raises(ValueError):
        ChrfConfig(beta=0)


# -- diff report ------------------------------------------------------------------

LATIN = scripts_for_locale("en-US")


def test_diff_identical_corpus():
    refs = [f"sentence {i}" for i in range(10000)]
    rep = diff_report(refs, refs)
    assert rep.differing == 0 and rep.categories["identical"] == 10000


def test_diff_table_example_is_other():
    rep = diff_report(["A yuuuge amount of articles."], ["A yuuuuge amount of articles."])
    rec = rep.records[0]
    assert rec.category == "other"
    assert rec.candidate == "A yuuuge amount of articles."
    assert rec.reference == "A yuuuuge amount of articles."


def test_diff_hyphen_only():
    assert categorize("a well-known fact", "a wellknown fact", LATIN) == "punctuation_only"
    assert categorize("a well - known fact", "a well known fact", LATIN) == "punctuation_only"


def test_diff_second_language():
    assert categorize("он сказал привет мир", "he said hello world", LATIN) == "second_language"
    assert scripts_for_locale("ru-RU") == {"CYRILLIC"}
    assert categorize("он сказал", "он сказал!", scripts_for_locale("ru-RU")) == \
        "punctuation_only"


def test_diff_labels(tmp_path):
    path = tmp_path / "labels.tsv"
    path.write_text("# human judgments\n0\tbetter\n1\tworse\n")
    rep = diff_report(["a b", "c"], ["a c", "d"], labels=path)
    assert [r.label for r in rep.records] == ["better", "worse"]
    assert [r.category for r in rep.records] == ["other", "other"]
    assert rep.labels == {"better": 1, "worse": 1}
    path.write_text("0\tbetter\nzero\tworse\n")
    with pytest.raises(LabelParseError) as err:
        diff_report(["a"], ["b"], labels=path)
    assert err.value.line_no == 2


def test_diff_partition_and_outputs(tmp_path):
    rep = diff_report(["a", "b c", "d\te"], ["a", "b, c", "x"])
    assert sum(rep.categories.values()) == rep.total == 3
    assert rep.categories["identical"] + rep.differing == rep.total
    rep.write(tmp_path / "r.txt", tmp_path / "r.tsv")
    tsv = (tmp_path / "r.tsv").read_text().splitlines()
    assert tsv[0] == "1\tpunctuation_only\tb c\tb, c"
    assert tsv[1] == "2\tother\td\\te\tx"


def test_second_language_not_diluted_by_long_reference():
    ref = "the river rose seven meters by noon and then fell again by night"
    assert categorize("это совсем другой текст the", ref, {"LATIN"}) == "second_language"
    assert categorize(ref, "это совсем другой текст", {"LATIN"}) == "second_language"
