"""Corpus-comparison statistics and the bootstrap subsampling protocol.

All divergences are in bits (base-2 logs), so Jensen-Shannon divergence
is bounded by 1. Bootstrap subsamples draw with replacement: 10000 words
for word-level measures, 1000 utterances for utterance-level ones, with
100 subsamples per measure.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .corpus import Utterance
from .errors import MeasureUndefinedError


@dataclass
class FrequencyDistribution:
    probs: dict[str, float]
    total_count: int

    @classmethod
    def from_counts(cls, counts: dict[str, int] | Counter) -> "FrequencyDistribution":
        total = sum(counts.values())
        if total <= 0:
            raise MeasureUndefinedError("cannot normalize an empty count table")
        return cls(probs={k: v / total for k, v in counts.items() if v > 0}, total_count=total)

    @property
    def support_size(self) -> int:
        return len(self.probs)


@dataclass
class MeasureDistribution:
    measure: str
    age: float
    corpus_tag: str
    values: list[float]
    missing: int = 0


@dataclass
class QuadraticFit:
    a: float
    b: float
    c: float
    rss: float

    def __call__(self, x: float) -> float:
        return self.a * x * x + self.b * x + self.c


def ttr(lemmas: Sequence[str]) -> float:
    """Distinct-lemma count over token count."""
    if not lemmas:
        raise MeasureUndefinedError("TTR is undefined on an empty sample")
    return len(set(lemmas)) / len(lemmas)


def mean_utterance_length(utterances: Sequence[Utterance]) -> float:
    """Mean number of words per utterance (terminal stop excluded)."""
    if not utterances:
        raise MeasureUndefinedError("mean utterance length is undefined on an empty sample")
    return sum(len(u.words) for u in utterances) / len(utterances)


def jsd(p: FrequencyDistribution, q: FrequencyDistribution) -> float:
    """Jensen-Shannon divergence in bits over the union support."""
    total = 0.0
    for key in p.probs.keys() | q.probs.keys():
        pi = p.probs.get(key, 0.0)
        qi = q.probs.get(key, 0.0)
        mi = 0.5 * (pi + qi)
        if pi > 0:
            total += 0.5 * pi * math.log2(pi / mi)
        if qi > 0:
            total += 0.5 * qi * math.log2(qi / mi)
    return max(0.0, total)


def lexical_divergence(
    sample_lemmas: Sequence[str], reference_lemmas: Sequence[str], min_count: int = 2
) -> float:
    """JSD between the two samples' lexeme frequency distributions, after
    dropping lexemes occurring fewer than ``min_count`` times within each
    sample separately."""

    def _dist(lemmas: Sequence[str]) -> FrequencyDistribution:
        counts = Counter(lemmas)
        kept = {k: v for k, v in counts.items() if v >= min_count}
        if not kept:
            raise MeasureUndefinedError(
                f"no lexeme reaches the min count of {min_count}; divergence undefined"
            )
        return FrequencyDistribution.from_counts(kept)

    return jsd(_dist(sample_lemmas), _dist(reference_lemmas))


def perplexity(logprobs: Sequence[float]) -> float:
    """exp of the negative mean natural-log probability of one string."""
    if not logprobs:
        raise MeasureUndefinedError("perplexity needs at least one scored token")
    arr = np.asarray(logprobs, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError("non-finite log probability in input")
    return float(np.exp(-arr.mean()))


def quadratic_fit(points: Sequence[tuple[float, float]]) -> QuadraticFit:
    """Ordinary least squares of value on (age^2, age, 1)."""
    if len({x for x, _ in points}) < 3:
        raise ValueError("quadratic fit needs at least 3 distinct x values")
    x = np.asarray([p[0] for p in points], dtype=np.float64)
    y = np.asarray([p[1] for p in points], dtype=np.float64)
    design = np.column_stack([x**2, x, np.ones_like(x)])
    coef, _, _, _ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ coef
    return QuadraticFit(a=float(coef[0]), b=float(coef[1]), c=float(coef[2]), rss=float(resid @ resid))


def subsample_rng(master_seed: int, measure: str, age_key: int, subsample_idx: int) -> np.random.Generator:
    """Per-subsample RNG stream so parallel evaluation order cannot
    change results."""
    measure_key = int.from_bytes(measure.encode("utf-8")[:4].ljust(4, b"\0"), "big")
    return np.random.default_rng([master_seed, measure_key, age_key, subsample_idx])


def sample_utterances(
    utterances: Sequence[Utterance], n: int, rng: np.random.Generator
) -> list[Utterance]:
    idx = rng.integers(0, len(utterances), size=n)
    return [utterances[i] for i in idx]


def sample_words(
    utterances: Sequence[Utterance], word_budget: int, rng: np.random.Generator
) -> list[Utterance]:
    """Whole utterances with replacement until the word budget is first
    met or exceeded (utterances stay intact for lexeme counting)."""
    out: list[Utterance] = []
    words = 0
    n = len(utterances)
    while words < word_budget:
        utt = utterances[int(rng.integers(0, n))]
        out.append(utt)
        words += len(utt.words)
    return out


def bootstrap(
    measure_name: str,
    measure_fn: Callable[[list[Utterance]], float],
    utterances: Sequence[Utterance],
    corpus_tag: str,
    age: float,
    unit: str = "utterances",
    n_subsamples: int = 100,
    words_per_sample: int = 10_000,
    utterances_per_sample: int = 1_000,
    master_seed: int = 0,
) -> MeasureDistribution:
    """Apply ``measure_fn`` to ``n_subsamples`` with-replacement
    subsamples; ``unit`` selects word-budget or utterance-count sampling."""
    if not utterances:
        raise MeasureUndefinedError(f"{measure_name}: empty corpus for age {age}")
    if unit not in ("words", "utterances"):
        raise ValueError(f"unknown bootstrap unit {unit!r}")
    age_key = int(round(age * 1000))
    values: list[float] = []
    missing = 0
    for i in range(n_subsamples):
        rng = subsample_rng(master_seed, measure_name, age_key, i)
        if unit == "words":
            sample = sample_words(utterances, words_per_sample, rng)
        else:
            sample = sample_utterances(utterances, utterances_per_sample, rng)
        try:
            values.append(float(measure_fn(sample)))
        except MeasureUndefinedError:
            missing += 1
    return MeasureDistribution(
        measure=measure_name, age=age, corpus_tag=corpus_tag, values=values, missing=missing
    )


@dataclass
class DistributionSummary:
    n: int
    mean: float
    sd: float
    minimum: float
    q1: float
    median: float
    q3: float
    maximum: float


def summarize(values: Sequence[float]) -> DistributionSummary:
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        raise MeasureUndefinedError("cannot summarize an empty value list")
    q1, med, q3 = np.percentile(arr, [25, 50, 75])
    return DistributionSummary(
        n=int(arr.size),
        mean=float(arr.mean()),
        sd=float(arr.std(ddof=0)),
        minimum=float(arr.min()),
        q1=float(q1),
        median=float(med),
        q3=float(q3),
        maximum=float(arr.max()),
    )


def contiguous_strings(
    utterances: Sequence[Utterance],
    n_strings: int = 100,
    min_words: int = 50,
    rng: np.random.Generator | None = None,
) -> list[list[Utterance]]:
    """Strings of contiguous complete utterances of at least ``min_words``
    words each, for perplexity scoring. Start positions are drawn without
    replacement when the corpus allows."""
    rng = rng if rng is not None else np.random.default_rng(0)
    n = len(utterances)
    if n == 0:
        raise MeasureUndefinedError("no utterances to draw perplexity strings from")
    starts = list(range(n))
    replace = n < n_strings
    chosen = rng.choice(n, size=n_strings, replace=replace) if not replace else rng.integers(0, n, size=n_strings)
    del starts
    strings: list[list[Utterance]] = []
    for start in chosen:
        string: list[Utterance] = []
        words = 0
        i = int(start)
        while words < min_words:
            utt = utterances[i % n]
            string.append(utt)
            words += len(utt.words)
            i += 1
        strings.append(string)
    return strings
