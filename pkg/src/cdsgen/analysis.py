"""Runs the full measurement suite over real and generated corpora.

Produces bootstrap measure distributions per (corpus tag, age), quadratic
age-trend fits of the per-age means, and novelty-by-length profiles.
Lemma-based measures (TTR, lexical divergence, POS rates, root
dependencies) use ingested parse annotations when available; TTR and
lexical divergence fall back to surface word forms otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

from .corpus import AgeBin, Utterance, VALIDATION_BIN
from .errors import MeasureUndefinedError
from .metrics import (
    MeasureDistribution,
    QuadraticFit,
    contiguous_strings,
    lexical_divergence,
    mean_utterance_length,
    perplexity,
    quadratic_fit,
    subsample_rng,
    ttr,
)
from .novelty import NoveltyIndex, NoveltyProfile, novelty_profile
from .treebank import REPORTED_POS, UDSentence, lemma_stream, pos_rates, root_dependency_count

WORD_MEASURES = ("ttr", "lexical_divergence") + tuple(f"pos_{p.lower()}" for p in REPORTED_POS)
UTTERANCE_MEASURES = ("mlu", "root_deps")
ALL_MEASURES = WORD_MEASURES + UTTERANCE_MEASURES + ("perplexity",)

LEXDIV_REFERENCE_AGE = 60.0


@dataclass
class BootstrapSettings:
    n_subsamples: int = 100
    words_per_sample: int = 10_000
    utterances_per_sample: int = 1_000
    perplexity_strings: int = 100
    perplexity_min_words: int = 50
    novelty_max_length: int | None = None


@dataclass
class AnalysisResult:
    measures: list[MeasureDistribution] = field(default_factory=list)
    fits: list[tuple[str, str, QuadraticFit]] = field(default_factory=list)
    novelty: dict[str, NoveltyProfile] = field(default_factory=dict)


def _sample_n(items: Sequence, n: int, rng) -> list:
    idx = rng.integers(0, len(items), size=n)
    return [items[i] for i in idx]


def _sample_words(items: Sequence, budget: int, length_fn: Callable, rng) -> list:
    out = []
    words = 0
    n = len(items)
    while words < budget:
        item = items[int(rng.integers(0, n))]
        out.append(item)
        words += length_fn(item)
    return out


def _sentence_len(sent: UDSentence) -> int:
    return sum(1 for t in sent.tokens if t.upos != "PUNCT")


def _bootstrap(
    measure: str,
    tag: str,
    age: float,
    items: Sequence,
    length_fn: Callable,
    measure_fn: Callable,
    unit: str,
    settings: BootstrapSettings,
    master_seed: int,
) -> MeasureDistribution:
    age_key = int(round(age * 1000))
    values: list[float] = []
    missing = 0
    for i in range(settings.n_subsamples):
        rng = subsample_rng(master_seed, measure, age_key, i)
        if unit == "words":
            sample = _sample_words(items, settings.words_per_sample, length_fn, rng)
        else:
            sample = _sample_n(items, settings.utterances_per_sample, rng)
        try:
            values.append(float(measure_fn(sample)))
        except MeasureUndefinedError:
            missing += 1
    return MeasureDistribution(measure=measure, age=age, corpus_tag=tag, values=values, missing=missing)


def _mean_root_deps(sentences: Sequence[UDSentence]) -> float:
    counts = [c for c in (root_dependency_count(s) for s in sentences) if c is not None]
    if not counts:
        raise MeasureUndefinedError("no sentences with a unique root")
    return sum(counts) / len(counts)


def _lexdiv_distribution(
    tag: str,
    age: float,
    target_items: Sequence,
    target_lemmas_fn: Callable,
    target_len_fn: Callable,
    ref_items: Sequence,
    ref_lemmas_fn: Callable,
    ref_len_fn: Callable,
    settings: BootstrapSettings,
    master_seed: int,
) -> MeasureDistribution:
    """Both sides are resampled to the word budget in every subsample."""
    age_key = int(round(age * 1000))
    values: list[float] = []
    missing = 0
    for i in range(settings.n_subsamples):
        rng = subsample_rng(master_seed, "lexical_divergence", age_key, i)
        ref_rng = subsample_rng(master_seed, "lexdiv_reference", age_key, i)
        sample = _sample_words(target_items, settings.words_per_sample, target_len_fn, rng)
        ref = _sample_words(ref_items, settings.words_per_sample, ref_len_fn, ref_rng)
        try:
            values.append(lexical_divergence(target_lemmas_fn(sample), ref_lemmas_fn(ref)))
        except MeasureUndefinedError:
            missing += 1
    return MeasureDistribution(
        measure="lexical_divergence", age=age, corpus_tag=tag, values=values, missing=missing
    )


def _utterance_words(utts: Sequence[Utterance]) -> list[str]:
    return [w for u in utts for w in u.words]


def pick_reference_bin(real_bins: Sequence[AgeBin]) -> AgeBin:
    """The lexical-divergence reference: the 60-month bin, or the oldest
    available bin when 60 is absent (small synthetic corpora)."""
    by_center = {b.center_months: b for b in real_bins}
    if int(LEXDIV_REFERENCE_AGE) in by_center:
        return by_center[int(LEXDIV_REFERENCE_AGE)]
    return by_center[max(by_center)]


def analyze(
    real_bins: Sequence[AgeBin],
    generated: dict[float, list[Utterance]] | None = None,
    parses: dict[tuple[str, float], list[UDSentence]] | None = None,
    scorer: Callable[[float, Sequence[Utterance]], list[float]] | None = None,
    logprob_records: dict[tuple[str, float], list[dict]] | None = None,
    settings: BootstrapSettings | None = None,
    master_seed: int = 0,
    novelty_modes: bool = True,
) -> AnalysisResult:
    """Compute every measure for every (tag, age) group.

    ``scorer(age, utterances) -> logprobs`` scores perplexity strings
    (typically the trained model); ``logprob_records`` supplies externally
    scored strings instead. Either, both, or neither may be given.
    """
    settings = settings if settings is not None else BootstrapSettings()
    generated = generated if generated is not None else {}
    parses = parses if parses is not None else {}
    logprob_records = logprob_records if logprob_records is not None else {}
    result = AnalysisResult()

    groups: list[tuple[str, float, list[Utterance]]] = [
        ("real", float(b.center_months), list(b.utterances)) for b in real_bins
    ]
    groups += [("generated", float(age), list(utts)) for age, utts in sorted(generated.items())]

    reference_bin = pick_reference_bin(real_bins) if real_bins else None

    for tag, age, utts in groups:
        if not utts:
            continue
        sentences = parses.get((tag, age))

        result.measures.append(
            _bootstrap("mlu", tag, age, utts, lambda u: len(u.words),
                       mean_utterance_length, "utterances", settings, master_seed)
        )
        if sentences:
            result.measures.append(
                _bootstrap("ttr", tag, age, sentences, _sentence_len,
                           lambda s: ttr(lemma_stream(s)), "words", settings, master_seed)
            )
            for pos in REPORTED_POS:
                result.measures.append(
                    _bootstrap(f"pos_{pos.lower()}", tag, age, sentences, _sentence_len,
                               lambda s, p=pos: pos_rates(s)[p], "words", settings, master_seed)
                )
            result.measures.append(
                _bootstrap("root_deps", tag, age, sentences, _sentence_len,
                           _mean_root_deps, "utterances", settings, master_seed)
            )
        else:
            result.measures.append(
                _bootstrap("ttr", tag, age, utts, lambda u: len(u.words),
                           lambda us: ttr(_utterance_words(us)), "words", settings, master_seed)
            )

        if reference_bin is not None:
            ref_sentences = parses.get(("real", float(reference_bin.center_months)))
            if sentences and ref_sentences:
                result.measures.append(
                    _lexdiv_distribution(tag, age, sentences, lemma_stream, _sentence_len,
                                         ref_sentences, lemma_stream, _sentence_len,
                                         settings, master_seed)
                )
            else:
                result.measures.append(
                    _lexdiv_distribution(tag, age, utts, _utterance_words,
                                         lambda u: len(u.words),
                                         reference_bin.utterances, _utterance_words,
                                         lambda u: len(u.words), settings, master_seed)
                )

        records = logprob_records.get((tag, age))
        if records is not None:
            values = [perplexity(rec["logprobs"]) for rec in records]
            result.measures.append(
                MeasureDistribution(measure="perplexity", age=age, corpus_tag=tag, values=values)
            )
        elif scorer is not None:
            rng = subsample_rng(master_seed, "perplexity", int(round(age * 1000)), 0)
            strings = contiguous_strings(
                utts, settings.perplexity_strings, settings.perplexity_min_words, rng
            )
            values = [perplexity(scorer(age, string)) for string in strings]
            result.measures.append(
                MeasureDistribution(measure="perplexity", age=age, corpus_tag=tag, values=values)
            )

    # Quadratic age trends of the per-age subsample means.
    by_series: dict[tuple[str, str], list[tuple[float, float]]] = {}
    for dist in result.measures:
        if dist.values:
            mean = sum(dist.values) / len(dist.values)
            by_series.setdefault((dist.corpus_tag, dist.measure), []).append((dist.age, mean))
    for (tag, measure), points in sorted(by_series.items()):
        if len({x for x, _ in points}) >= 3:
            result.fits.append((tag, measure, quadratic_fit(points)))

    if novelty_modes and real_bins:
        train_bins = [b for b in real_bins if b.center_months != VALIDATION_BIN]
        index = NoveltyIndex(u.words for b in train_bins for u in b.utterances)
        if generated:
            result.novelty["generated"] = novelty_profile(
                {int(round(age)): list(utts) for age, utts in generated.items()},
                index, mode="external", max_length=settings.novelty_max_length,
            )
        result.novelty["real"] = novelty_profile(
            {b.center_months: list(b.utterances) for b in train_bins},
            index, mode="leave-one-out", max_length=settings.novelty_max_length,
        )
    return result
