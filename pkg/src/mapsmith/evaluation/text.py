"""Overlap metrics for generated text, all scaled to 0-100.

BLEU is cumulative with a brevity penalty, ROUGE-L is the LCS
F-measure, and the METEOR variant here matches unigrams exactly first
and then through a small suffix-stripping stemmer; no synonym
dictionary is consulted.  Tokenization is shared with the labeler:
lowercased ASCII-alphanumeric runs.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

from ..errors import DataError
from ..labeling import words_of

# Longest suffix first, so "es" wins over "s".
_SUFFIXES = ("ing", "ed", "es", "s")


@dataclass(frozen=True)
class TextMetricReport:
    """Scores for one hypothesis against a reference set."""

    bleu: tuple[float, float, float, float]
    meteor: float
    rouge_l: float


def _ngram_counts(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu(hypothesis: str, references: Sequence[str], max_n: int = 4) -> list[float]:
    """Cumulative BLEU-1..max_n scores in 0-100.

    N-gram counts are clipped to the best count over the references and
    the brevity penalty compares against the reference length closest
    to the hypothesis (shorter wins ties).  A zero precision at any
    order zeroes that cumulative score and all longer ones.
    """
    if not references:
        raise DataError("BLEU needs at least one reference")
    hyp = words_of(hypothesis)
    refs = [words_of(r) for r in references]
    if not hyp:
        return [0.0] * max_n
    c = len(hyp)
    r = min((abs(len(t) - c), len(t)) for t in refs)[1]
    bp = min(1.0, math.exp(1.0 - r / c))
    precisions = []
    for n in range(1, max_n + 1):
        counts = _ngram_counts(hyp, n)
        total = sum(counts.values())
        if total == 0:
            precisions.append(0.0)
            continue
        best: Counter = Counter()
        for t in refs:
            for gram, k in _ngram_counts(t, n).items():
                if k > best[gram]:
                    best[gram] = k
        clipped = sum(min(k, best[gram]) for gram, k in counts.items())
        precisions.append(clipped / total)
    scores = []
    for n in range(1, max_n + 1):
        window = precisions[:n]
        if min(window) == 0.0:
            scores.append(0.0)
        else:
            scores.append(100.0 * bp * math.exp(sum(map(math.log, window)) / n))
    return scores


def _lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    # One-row dynamic program, O(len(a) * len(b)) time.
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, start=1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge_l(hypothesis: str, reference: str, beta: float = 1.2) -> float:
    """Longest-common-subsequence F-measure in 0-100; empty input scores 0."""
    hyp = words_of(hypothesis)
    ref = words_of(reference)
    if not hyp or not ref:
        return 0.0
    lcs = _lcs_length(hyp, ref)
    if lcs == 0:
        return 0.0
    recall = lcs / len(ref)
    precision = lcs / len(hyp)
    beta2 = beta * beta
    return 100.0 * (1.0 + beta2) * recall * precision / (beta2 * recall + precision)


def _stem(token: str) -> str:
    for suffix in _SUFFIXES:
        if token.endswith(suffix) and len(token) - len(suffix) >= 2:
            token = token[: -len(suffix)]
            break
    # Collapse a doubled final letter so "running" and "run" meet at "run".
    if len(token) >= 3 and token[-1] == token[-2]:
        token = token[:-1]
    return token


def meteor_lite(hypothesis: str, reference: str) -> float:
    """Unigram F-score weighted 9:1 toward recall, with a chunk penalty.

    Matching runs in two passes, exact then stemmed, each token pairing
    with the earliest unused reference token.  The penalty grows with
    the cube of the matched-chunk fraction, so scattered matches score
    below one contiguous run.
    """
    hyp = words_of(hypothesis)
    ref = words_of(reference)
    if not hyp or not ref:
        return 0.0
    used = [False] * len(ref)
    align: dict[int, int] = {}
    for exact in (True, False):
        for i, token in enumerate(hyp):
            if i in align:
                continue
            key = token if exact else _stem(token)
            for j, other in enumerate(ref):
                if not used[j] and key == (other if exact else _stem(other)):
                    align[i] = j
                    used[j] = True
                    break
    m = len(align)
    if m == 0:
        return 0.0
    precision = m / len(hyp)
    recall = m / len(ref)
    f_mean = 10.0 * precision * recall / (recall + 9.0 * precision)
    chunks = 0
    prev = None
    for i in sorted(align):
        if prev is None or i != prev + 1 or align[i] != align[prev] + 1:
            chunks += 1
        prev = i
    penalty = 0.5 * (chunks / m) ** 3
    return 100.0 * f_mean * (1.0 - penalty)


def edit_distance(a: str, b: str) -> int:
    """Levenshtein distance over characters, unit edit costs."""
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, x in enumerate(a, start=1):
        cur = [i]
        for j, y in enumerate(b, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (x != y)))
        prev = cur
    return prev[-1]


def text_report(hypothesis: str, references: Sequence[str]) -> TextMetricReport:
    """Score one hypothesis; the single-reference metrics take the best reference."""
    scores = bleu(hypothesis, references)
    return TextMetricReport(
        bleu=(scores[0], scores[1], scores[2], scores[3]),
        meteor=max(meteor_lite(hypothesis, r) for r in references),
        rouge_l=max(rouge_l(hypothesis, r) for r in references),
    )
