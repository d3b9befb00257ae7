import math
import random
from fractions import Fraction
from functools import lru_cache

import numpy as np
import pytest
from hypothesis import given, strategies as st

from speechblend.evaluation import (
    ConfidenceInterval,
    bootstrap_wer_ci,
    corpus_bleu,
    corpus_wer,
    hallucination_rate,
    normalize_eval_text,
    segment_plan,
    stitch_long_form,
    tokenize_bleu,
    word_error_rate,
)


# ---------------------------------------------------------------- oracles

def oracle_sdi(ref, hyp):
    """Top-down recursion over (edits, indels); derives S, D, I from the totals."""

    @lru_cache(maxsize=None)
    def go(i, j):
        if i == len(ref):
            return (len(hyp) - j, len(hyp) - j)
        if j == len(hyp):
            return (len(ref) - i, len(ref) - i)
        e, x = go(i + 1, j + 1)
        options = [(e + (ref[i] != hyp[j]), x)]
        e, x = go(i + 1, j)
        options.append((e + 1, x + 1))
        e, x = go(i, j + 1)
        options.append((e + 1, x + 1))
        return min(options)

    edits, indels = go(0, 0)
    n, m = len(ref), len(hyp)
    deletions = (indels + n - m) // 2
    insertions = (indels - n + m) // 2
    return edits - indels, deletions, insertions


def oracle_bleu(refs, hyps, max_n=4):
    num = [0] * max_n
    den = [0] * max_n
    r_len = sum(len(r) for r in refs)
    h_len = sum(len(h) for h in hyps)
    for ref, hyp in zip(refs, hyps):
        for n in range(1, max_n + 1):
            hg = [tuple(hyp[i:i + n]) for i in range(len(hyp) - n + 1)]
            rg = [tuple(ref[i:i + n]) for i in range(len(ref) - n + 1)]
            for g in set(hg):
                num[n - 1] += min(hg.count(g), rg.count(g))
            den[n - 1] += len(hg)
    if h_len == 0 or 0 in num:
        return 0.0
    prod = Fraction(1)
    for a, b in zip(num, den):
        prod *= Fraction(a, b)
    geo = float(prod) ** (1.0 / max_n)
    bp = 1.0 if h_len > r_len else math.exp(1 - r_len / h_len)
    return 100 * bp * geo


def oracle_percentile_ci(per_utt, reps, level, seed):
    rng = random.Random(seed)
    n = len(per_utt)
    vals = []
    for _ in range(reps):
        w = e = 0
        for _ in range(n):
            a, b = per_utt[rng.randrange(n)]
            w += a
            e += b
        vals.append(e / w)
    vals.sort()
    tail = (1 - level) / 2

    def pct(q):
        pos = q * (reps - 1)
        lo = math.floor(pos)
        hi = min(lo + 1, reps - 1)
        return vals[lo] + (vals[hi] - vals[lo]) * (pos - lo)

    return pct(tail), pct(1 - tail)


# ---------------------------------------------------------------- normalization

@pytest.mark.parametrize("text,expected", [
    ("Hello, World!", "hello world"),
    ("  a   b ", "a b"),
    ("Don't STOP—now.", "dont stop now"),
    ("", ""),
])
def test_normalize(text, expected):
    assert normalize_eval_text(text) == expected


@given(st.text())
def test_normalize_idempotent(text):
    once = normalize_eval_text(text)
    assert normalize_eval_text(once) == once


# ---------------------------------------------------------------- WER

def test_wer_examples():
    assert word_error_rate("a b c", "a b c").wer == 0
    b = word_error_rate("a b c", "a x c")
    assert (b.substitutions, b.deletions, b.insertions) == (1, 0, 0) and b.wer == pytest.approx(1 / 3)
    b = word_error_rate("a b c", "")
    assert b.deletions == 3 and b.wer == 1.0


def test_wer_empty_reference():
    b = word_error_rate("", "x y")
    assert b.insertions == 2 and b.wer == 2.0 and b.empty_reference
    assert word_error_rate("", "").wer == 0


def test_wer_prefers_substitution():
    b = word_error_rate("a b", "b a")
    assert (b.substitutions, b.deletions, b.insertions) == (2, 0, 0)


def test_wer_matches_oracle():
    rng = random.Random(0)
    for _ in range(1000):
        ref = [rng.choice("abc") for _ in range(rng.randint(0, 8))]
        hyp = [rng.choice("abc") for _ in range(rng.randint(0, 8))]
        b = word_error_rate(" ".join(ref), " ".join(hyp))
        assert (b.substitutions, b.deletions, b.insertions) == oracle_sdi(ref, hyp)


def test_corpus_wer_parallel_identical():
    rng = random.Random(1)
    refs = [" ".join(rng.choice("abcd") for _ in range(rng.randint(1, 12))) for _ in range(300)]
    hyps = [" ".join(rng.choice("abcd") for _ in range(rng.randint(0, 12))) for _ in range(300)]
    serial = corpus_wer(refs, hyps, workers=1)
    parallel = corpus_wer(refs, hyps, workers=4)
    assert serial == parallel
    assert serial[0].ref_words == sum(len(r.split()) for r in refs)


# ---------------------------------------------------------------- bootstrap

def test_bootstrap_degenerate():
    ci = bootstrap_wer_ci([(10, 2)] * 50, replications=500, seed=1)
    assert ci.lower == ci.point == ci.upper == 0.2


def test_bootstrap_errors():
    with pytest.raises(ValueError):
        bootstrap_wer_ci([])
    with pytest.raises(ValueError):
        bootstrap_wer_ci([(0, 0), (0, 1)])


def synthetic_utts(rng, n, p=0.1):
    words = rng.integers(5, 30, n)
    errors = rng.binomial(words, p)
    return list(zip(words.tolist(), errors.tolist()))


def test_bootstrap_deterministic_and_against_oracle():
    utts = synthetic_utts(np.random.default_rng(2), 200)
    a = bootstrap_wer_ci(utts, replications=4000, seed=5)
    b = bootstrap_wer_ci(utts, replications=4000, seed=5)
    assert a == b
    assert isinstance(a, ConfidenceInterval) and a.lower <= a.point <= a.upper
    lo, hi = oracle_percentile_ci(utts, 4000, 0.95, seed=123)
    # two independent Monte-Carlo runs of 4000 replicates
    assert abs(a.lower - lo) < 0.004 and abs(a.upper - hi) < 0.004


def test_bootstrap_contains_point():
    rng = np.random.default_rng(3)
    for trial in range(20):
        utts = synthetic_utts(rng, int(rng.integers(30, 300)), p=float(rng.uniform(0.02, 0.4)))
        ci = bootstrap_wer_ci(utts, replications=2000, seed=trial)
        tot = sum(e for _, e in utts) / sum(w for w, _ in utts)
        assert ci.lower <= tot <= ci.upper


def test_bootstrap_seed_noise():
    utts = synthetic_utts(np.random.default_rng(4), 1000)
    a = bootstrap_wer_ci(utts, seed=1)
    b = bootstrap_wer_ci(utts, seed=2)
    assert abs(a.lower - b.lower) < 1e-3 and abs(a.upper - b.upper) < 1e-3


# ---------------------------------------------------------------- BLEU

def test_bleu_examples():
    refs = [["the", "cat", "sat", "on", "the", "mat"]]
    assert corpus_bleu(refs, refs) == 100.0
    assert corpus_bleu(refs, [[]]) == 0.0
    assert corpus_bleu([], []) == 0.0
    assert corpus_bleu([["a", "b", "c", "d"]], [["a", "b", "x", "d"]]) == 0.0
    assert oracle_bleu([["a", "b", "c", "d"]], [["a", "b", "x", "d"]]) == 0.0


def test_bleu_hand_computed():
    # p1 = 5/6, p2 = 3/5, p3 = 2/4, p4 = 1/3, equal lengths
    ref = "the cat sat on the mat".split()
    hyp = "the cat sat on a mat".split()
    assert corpus_bleu([ref], [hyp]) == pytest.approx(100 * (1 / 12) ** (1 / 4), rel=1e-12)
    # p1 = 4/6, p2 = 1/5, p3 = 0/4 -> unsmoothed 0
    hyp = "the cat is on a mat".split()
    assert corpus_bleu([ref], [hyp]) == 0.0
    assert corpus_bleu([ref], [hyp], max_n=2) == pytest.approx(100 * (4 / 6 * 1 / 5) ** 0.5, rel=1e-12)


def test_bleu_brevity_penalty():
    ref = "a b c d e f g h".split()
    hyp = "a b c d".split()
    assert corpus_bleu([ref], [hyp]) == pytest.approx(100 * math.exp(1 - 8 / 4), rel=1e-12)


def test_bleu_matches_oracle_random():
    rng = random.Random(7)
    vocab = "a b c d e".split()
    for _ in range(100):
        k = rng.randint(1, 5)
        refs = [[rng.choice(vocab) for _ in range(rng.randint(0, 12))] for _ in range(k)]
        hyps = [[rng.choice(vocab) for _ in range(rng.randint(0, 12))] for _ in range(k)]
        assert abs(corpus_bleu(refs, hyps) - oracle_bleu(refs, hyps)) < 1e-9


def test_bleu_permutation_equivariant():
    rng = random.Random(8)
    refs = [[rng.choice("abc") for _ in range(10)] for _ in range(20)]
    hyps = [r[:-1] + [rng.choice("abc")] for r in refs]
    pairs = list(zip(refs, hyps))
    rng.shuffle(pairs)
    assert corpus_bleu(refs, hyps) == pytest.approx(corpus_bleu(*map(list, zip(*pairs))), rel=1e-14)


def test_tokenize_bleu():
    assert tokenize_bleu("Hello, world! It's") == ["Hello", ",", "world", "!", "It", "'", "s"]


# ---------------------------------------------------------------- long-form, hallucination

def test_stitch():
    assert stitch_long_form(["hello", "world"]) == "hello world"
    assert stitch_long_form(["a ", "", " b"]) == "a b"
    assert stitch_long_form([]) == ""


@pytest.mark.parametrize("total,plan", [
    (75, [(0, 30), (30, 60), (60, 75)]),
    (30, [(0, 30)]),
    (29, [(0, 29)]),
])
def test_segment_plan(total, plan):
    assert segment_plan(total) == plan


@given(st.floats(min_value=1e-3, max_value=1e5))
def test_segment_plan_covers(total):
    plan = segment_plan(total)
    assert plan[0][0] == 0 and plan[-1][1] == total
    assert all(a[1] == b[0] for a, b in zip(plan, plan[1:]))
    assert all(e - s <= 30 and e > s for s, e in plan)


def test_segment_plan_errors():
    with pytest.raises(ValueError):
        segment_plan(0)


def test_hallucination_rate():
    assert hallucination_rate(["x" * 300, "y" * 300], 5) == 120.0
    assert hallucination_rate(["", "  "], 10) == 0
    assert hallucination_rate(["  a b  "], 1) == 3
    with pytest.raises(ValueError):
        hallucination_rate([], 0)
