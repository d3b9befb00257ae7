"""Scoring: text normalization, WER with bootstrap intervals, corpus BLEU,
long-form chunking and stitching, hallucination rate."""
from __future__ import annotations

import math
import re
import unicodedata
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from ._random import make_generator

_WS = re.compile(r"\s+")
_APOSTROPHES = ("'", "’")


def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


def normalize_eval_text(text: str) -> str:
    """Lowercase, strip punctuation, collapse whitespace.

    A rough stand-in for Whisper's normalizer: apostrophes are deleted so
    contractions stay one word ("don't" -> "dont"); all other punctuation
    becomes a space. No number or abbreviation expansion.
    """
    text = text.lower()
    for a in _APOSTROPHES:
        text = text.replace(a, "")
    text = "".join(" " if _is_punct(ch) else ch for ch in text)
    return _WS.sub(" ", text).strip()


@dataclass(frozen=True)
class WerBreakdown:
    substitutions: int
    deletions: int
    insertions: int
    ref_words: int

    @property
    def errors(self) -> int:
        return self.substitutions + self.deletions + self.insertions

    @property
    def wer(self) -> float:
        return self.errors / max(1, self.ref_words)

    @property
    def empty_reference(self) -> bool:
        return self.ref_words == 0

    def __add__(self, other: "WerBreakdown") -> "WerBreakdown":
        return WerBreakdown(
            self.substitutions + other.substitutions,
            self.deletions + other.deletions,
            self.insertions + other.insertions,
            self.ref_words + other.ref_words,
        )

    def to_json_dict(self) -> dict:
        return {
            "wer": self.wer,
            "substitutions": self.substitutions,
            "deletions": self.deletions,
            "insertions": self.insertions,
            "ref_words": self.ref_words,
        }


def align_words(ref: Sequence[str], hyp: Sequence[str]) -> Tuple[int, int, int]:
    """Minimum edit alignment, returning ``(S, D, I)``.

    Among alignments with the fewest edits, the one with the fewest
    insertions plus deletions (i.e. the most substitutions) is chosen.
    """
    n, m = len(ref), len(hyp)
    # cost[j] = (edits, indels) for ref[:i] vs hyp[:j]; ops kept for backtrace
    prev = [(j, j) for j in range(m + 1)]
    back = [[2] * (m + 1)]  # 0 diag, 1 deletion, 2 insertion
    for i in range(1, n + 1):
        cur = [(i, i)]
        row = [1]
        r = ref[i - 1]
        for j in range(1, m + 1):
            e, x = prev[j - 1]
            diag = (e, x) if r == hyp[j - 1] else (e + 1, x)
            e, x = prev[j]
            dele = (e + 1, x + 1)
            e, x = cur[j - 1]
            ins = (e + 1, x + 1)
            best, op = diag, 0
            if dele < best:
                best, op = dele, 1
            if ins < best:
                best, op = ins, 2
            cur.append(best)
            row.append(op)
        back.append(row)
        prev = cur
    s = d = ins_count = 0
    i, j = n, m
    while i > 0 or j > 0:
        op = back[i][j] if i > 0 else 2
        if op == 0:
            if ref[i - 1] != hyp[j - 1]:
                s += 1
            i -= 1
            j -= 1
        elif op == 1:
            d += 1
            i -= 1
        else:
            ins_count += 1
            j -= 1
    return s, d, ins_count


def word_error_rate(ref: str, hyp: str) -> WerBreakdown:
    """Word-level edit distance between already normalized strings.

    With an empty reference the rate is the insertion count and
    ``empty_reference`` is set on the result.
    """
    r = ref.split()
    h = hyp.split()
    s, d, i = align_words(r, h)
    return WerBreakdown(s, d, i, len(r))


def corpus_wer(refs: Sequence[str], hyps: Sequence[str], workers: int = 1) -> Tuple[WerBreakdown, List[WerBreakdown]]:
    """Pooled WER over a corpus plus the per-utterance breakdowns.

    ``workers > 1`` scores utterances on a thread pool; the reduction is over
    integer counts, so the result is identical to the serial path.
    """
    if len(refs) != len(hyps):
        raise ValueError(f"{len(refs)} references but {len(hyps)} hypotheses")
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per = list(pool.map(word_error_rate, refs, hyps))
    else:
        per = [word_error_rate(r, h) for r, h in zip(refs, hyps)]
    total = WerBreakdown(0, 0, 0, 0)
    for b in per:
        total = total + b
    return total, per


@dataclass(frozen=True)
class ConfidenceInterval:
    point: float
    lower: float
    upper: float
    level: float = 0.95
    replications: int = 10000

    def to_json_dict(self) -> dict:
        return {"point": self.point, "lower": self.lower, "upper": self.upper,
                "level": self.level, "replications": self.replications}


def bootstrap_wer_ci(
    per_utt: Sequence[Tuple[int, int]],
    replications: int = 10000,
    level: float = 0.95,
    seed: int = 0,
    chunk: int = 4_000_000,
) -> ConfidenceInterval:
    """Percentile bootstrap interval for pooled WER.

    ``per_utt`` holds ``(ref_words, edit_errors)`` per utterance. Each
    replicate resamples utterances with replacement and recomputes
    ``sum(errors) / sum(ref_words)``. Resampling is done in row blocks of
    about ``chunk`` indices to bound memory; the block layout depends only on
    the input size, so results are a function of the seed alone.

    The interval is widened to include the point estimate if the percentiles
    happen to miss it.
    """
    if not per_utt:
        raise ValueError("bootstrap needs at least one utterance")
    if not 0 < level < 1:
        raise ValueError(f"level must be in (0, 1), got {level}")
    if replications < 1:
        raise ValueError("replications must be positive")
    arr = np.asarray(per_utt, dtype=np.float64)
    words, errors = arr[:, 0], arr[:, 1]
    total_words = words.sum()
    if total_words <= 0:
        raise ValueError("total reference word count is zero")
    point = float(errors.sum() / total_words)
    n = len(words)
    gen = make_generator(seed, "bootstrap-wer")
    rows = max(1, chunk // n)
    stats = np.empty(replications, dtype=np.float64)
    for start in range(0, replications, rows):
        k = min(rows, replications - start)
        idx = gen.integers(0, n, size=(k, n))
        w = words[idx].sum(axis=1)
        e = errors[idx].sum(axis=1)
        # a replicate of only empty references has no defined WER; count it as 0
        stats[start:start + k] = np.divide(e, w, out=np.zeros_like(e), where=w > 0)
    tail = (1.0 - level) / 2.0 * 100.0
    lower, upper = np.percentile(stats, [tail, 100.0 - tail])
    return ConfidenceInterval(
        point=point,
        lower=min(float(lower), point),
        upper=max(float(upper), point),
        level=level,
        replications=replications,
    )


def tokenize_bleu(text: str) -> List[str]:
    """Whitespace tokens with punctuation split off as separate tokens."""
    out: List[str] = []
    for word in text.split():
        piece = []
        for ch in word:
            if _is_punct(ch):
                if piece:
                    out.append("".join(piece))
                    piece = []
                out.append(ch)
            else:
                piece.append(ch)
        if piece:
            out.append("".join(piece))
    return out


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def bleu_statistics(refs: Sequence[Sequence[str]], hyps: Sequence[Sequence[str]], max_n: int = 4):
    """Corpus totals: clipped matches and candidate counts per order, lengths."""
    matches = [0] * max_n
    totals = [0] * max_n
    ref_len = hyp_len = 0
    for ref, hyp in zip(refs, hyps):
        ref_len += len(ref)
        hyp_len += len(hyp)
        for n in range(1, max_n + 1):
            h = _ngrams(hyp, n)
            r = _ngrams(ref, n)
            matches[n - 1] += sum(min(c, r[g]) for g, c in h.items())
            totals[n - 1] += max(0, len(hyp) - n + 1)
    return matches, totals, ref_len, hyp_len


def corpus_bleu(refs: Sequence[Sequence[str]], hyps: Sequence[Sequence[str]], max_n: int = 4) -> float:
    """Unsmoothed corpus BLEU in [0, 100] with a single reference per hypothesis.

    Inputs are token lists (see :func:`tokenize_bleu`). Any n-gram order with
    zero matches gives a score of 0.
    """
    if len(refs) != len(hyps):
        raise ValueError(f"{len(refs)} references but {len(hyps)} hypotheses")
    if max_n < 1:
        raise ValueError("max_n must be >= 1")
    if not hyps:
        return 0.0
    matches, totals, ref_len, hyp_len = bleu_statistics(refs, hyps, max_n)
    if hyp_len == 0 or any(m == 0 for m in matches):
        return 0.0
    log_p = math.fsum(math.log(m / t) for m, t in zip(matches, totals)) / max_n
    bp = math.exp(min(0.0, 1.0 - ref_len / hyp_len))
    return 100.0 * bp * math.exp(log_p)


def stitch_long_form(segments: Sequence[str]) -> str:
    return " ".join(s for s in (seg.strip() for seg in segments) if s)


def segment_plan(total_duration: float, chunk: float = 30.0) -> List[Tuple[float, float]]:
    """Contiguous non-overlapping ``(start, end)`` windows over ``[0, total]``."""
    if not total_duration > 0:
        raise ValueError(f"total_duration must be positive, got {total_duration}")
    if not chunk > 0:
        raise ValueError(f"chunk must be positive, got {chunk}")
    plan = []
    k = 0
    while True:
        start = k * chunk
        if start >= total_duration:
            break
        end = min((k + 1) * chunk, total_duration)
        plan.append((start, end))
        k += 1
    return plan


def hallucination_rate(transcripts: Sequence[str], total_minutes: float) -> float:
    """Characters per minute emitted on audio that contains no speech.

    Leading and trailing whitespace is not counted; inner spaces are.
    """
    if not total_minutes > 0:
        raise ValueError(f"total_minutes must be positive, got {total_minutes}")
    return sum(len(t.strip()) for t in transcripts) / total_minutes
