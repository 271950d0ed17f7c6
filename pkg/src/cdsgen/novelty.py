"""Substring-novelty detection against a training corpus.

An utterance is novel when its word sequence never occurs contiguously
inside any training utterance. The index is a suffix automaton over the
interned training corpus with a unique sentinel after every utterance so
matches cannot span utterance boundaries.

The automaton core has a compiled backend (``cdsgen._substring_fast``,
Cython) and a pure-Python fallback; set ``CDSGEN_NO_EXT=1`` to force the
fallback. ``benchmarks/bench_substring.py`` compares the two.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from statistics import mean, pstdev
from typing import Iterable, Sequence

from .corpus import Utterance

if os.environ.get("CDSGEN_NO_EXT") == "1":
    from ._substring_py import SuffixAutomaton

    BACKEND = "python"
else:
    try:
        from ._substring_fast import SuffixAutomaton  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        from ._substring_py import SuffixAutomaton  # type: ignore[no-redef]

        BACKEND = "python"


class WordInterner:
    """Stable word -> nonnegative id mapping; negative ids stay free for
    sentinels."""

    def __init__(self):
        self._ids: dict[str, int] = {}

    def intern(self, word: str) -> int:
        wid = self._ids.get(word)
        if wid is None:
            wid = len(self._ids)
            self._ids[word] = wid
        return wid

    def lookup(self, word: str) -> int | None:
        return self._ids.get(word)

    def __len__(self) -> int:
        return len(self._ids)


class NoveltyIndex:
    """Contiguous word-sequence membership over a training corpus."""

    def __init__(self, training_utterances: Iterable[Sequence[str]]):
        self.interner = WordInterner()
        sequence: list[int] = []
        n = 0
        for words in training_utterances:
            sequence.extend(self.interner.intern(w) for w in words)
            n += 1
            sequence.append(-n)  # unique sentinel per utterance
        self.n_utterances = n
        self._automaton = SuffixAutomaton(sequence)

    def _to_ids(self, words: Sequence[str]) -> list[int] | None:
        ids = []
        for w in words:
            wid = self.interner.lookup(w)
            if wid is None:
                return None  # unseen word: cannot occur in training
            ids.append(wid)
        return ids

    def contains(self, words: Sequence[str]) -> bool:
        if not words:
            raise ValueError("empty query")
        ids = self._to_ids(words)
        return ids is not None and self._automaton.contains(ids)

    def count(self, words: Sequence[str]) -> int:
        if not words:
            raise ValueError("empty query")
        ids = self._to_ids(words)
        return 0 if ids is None else self._automaton.count(ids)


def naive_contains(corpus: Sequence[Sequence[str]], query: Sequence[str]) -> bool:
    """O(n*m) scan oracle used to validate the index."""
    m = len(query)
    q = tuple(query)
    for utt in corpus:
        for start in range(len(utt) - m + 1):
            if tuple(utt[start : start + m]) == q:
                return True
    return False


def naive_count(corpus: Sequence[Sequence[str]], query: Sequence[str]) -> int:
    m = len(query)
    q = tuple(query)
    total = 0
    for utt in corpus:
        for start in range(len(utt) - m + 1):
            if tuple(utt[start : start + m]) == q:
                total += 1
    return total


def is_novel(words: Sequence[str], index: NoveltyIndex, mode: str = "external") -> bool:
    """external: novel iff never contained. leave-one-out: for training
    utterances scored against their own corpus, a single self-match still
    counts as novel."""
    if mode == "external":
        return not index.contains(words)
    if mode == "leave-one-out":
        return index.count(words) <= 1
    raise ValueError(f"unknown novelty mode {mode!r}")


@dataclass
class NoveltyProfile:
    """Per utterance-length novelty proportions, aggregated across age bins."""

    lengths: list[int] = field(default_factory=list)
    proportions: list[float] = field(default_factory=list)
    sds: list[float] = field(default_factory=list)
    counts: list[int] = field(default_factory=list)


def novelty_profile(
    utterances_by_bin: dict[int, list[Utterance]],
    index: NoveltyIndex,
    mode: str = "external",
    max_length: int | None = None,
) -> NoveltyProfile:
    """Bucket utterances by word count; report the mean novel proportion
    per length and its SD across age bins."""
    per_bin: dict[int, dict[int, tuple[int, int]]] = {}
    for center, utts in utterances_by_bin.items():
        buckets: dict[int, tuple[int, int]] = {}
        for utt in utts:
            length = len(utt.words)
            if length == 0 or (max_length is not None and length > max_length):
                continue
            novel, total = buckets.get(length, (0, 0))
            buckets[length] = (novel + int(is_novel(utt.words, index, mode)), total + 1)
        per_bin[center] = buckets

    profile = NoveltyProfile()
    all_lengths = sorted({length for b in per_bin.values() for length in b})
    for length in all_lengths:
        props = []
        total = 0
        for buckets in per_bin.values():
            if length in buckets:
                novel, n = buckets[length]
                props.append(novel / n)
                total += n
        profile.lengths.append(length)
        profile.proportions.append(mean(props))
        profile.sds.append(pstdev(props) if len(props) > 1 else 0.0)
        profile.counts.append(total)
    return profile
