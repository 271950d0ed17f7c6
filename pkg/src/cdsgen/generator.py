"""Seeded, age-conditioned top-k sampling of synthetic transcripts.

Each run starts from a 1-4 token seed drawn from a random position of
the training token streams, extends it token by token (top-500 sampling,
temperature 1) until 60 tokens total, then drops every utterance that
overlaps the seed and any trailing utterance without a final full stop.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import torch

from .corpus import Utterance
from .model import AgeConditionedLM
from .tokenizer import WordPieceVocab, decode

DEFAULT_AGES = (6.0, 9.0, 12.0, 15.0, 18.0, 21.0, 24.0, 36.0, 48.0)


@dataclass
class GenerationSpec:
    ages: tuple[float, ...] = DEFAULT_AGES
    runs_per_age: int = 2000
    top_k: int = 500
    temperature: float = 1.0
    max_tokens: int = 60
    seed_len_range: tuple[int, int] = (1, 4)
    rng_seed: int = 0

    def __post_init__(self):
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")
        if self.max_tokens < 2:
            raise ValueError("max_tokens must be >= 2")
        lo, hi = self.seed_len_range
        if not (1 <= lo <= hi < self.max_tokens):
            raise ValueError("seed_len_range must lie within [1, max_tokens)")


@dataclass
class GeneratedTranscript:
    age_months: float
    utterances: list[Utterance] = field(default_factory=list)
    seed_tokens: tuple[int, ...] = ()


def draw_seed(
    train_streams: dict[int, list[int]], rng: np.random.Generator, len_range: tuple[int, int] = (1, 4)
) -> list[int]:
    """Contiguous tokens from a uniformly random position of the
    concatenated training streams; length uniform over ``len_range``."""
    concat: list[int] = []
    for center in sorted(train_streams):
        concat.extend(train_streams[center])
    if not concat:
        raise ValueError("training streams are empty")
    lo, hi = len_range
    length = int(rng.integers(lo, hi + 1))
    length = min(length, len(concat))
    start = int(rng.integers(0, len(concat) - length + 1))
    return concat[start : start + length]


def top_k_sample(probs: np.ndarray, top_k: int, rng: np.random.Generator) -> int:
    """Sample from the ``top_k`` most probable entries after
    renormalization; probability ties are broken toward lower ids."""
    n = probs.shape[0]
    k = min(top_k, n)
    # lexsort: primary key last -> order by descending prob, then ascending id
    order = np.lexsort((np.arange(n), -probs))
    top = order[:k]
    p = probs[top]
    p = p / p.sum()
    return int(top[rng.choice(k, p=p)])


@torch.no_grad()
def sample_next(
    model: AgeConditionedLM,
    age: float,
    context_ids: Sequence[int],
    top_k: int,
    temperature: float,
    rng: np.random.Generator,
) -> int:
    if not context_ids:
        raise ValueError("context must be non-empty")
    model.eval()
    ages = torch.tensor([age], dtype=torch.float32)
    toks = torch.tensor([list(context_ids)], dtype=torch.long)
    logits = model(ages, toks)[0, -1, :]
    probs = torch.softmax(logits / temperature, dim=-1).double()
    probs = (probs / probs.sum()).cpu().numpy()
    return top_k_sample(probs, top_k, rng)


def _split_token_utterances(ids: Sequence[int], stop_id: int) -> list[tuple[int, int, bool]]:
    """(start, end, terminated) spans, end exclusive of the stop token's
    successor; ``terminated`` marks spans ending in a full stop."""
    spans = []
    start = 0
    for i, tid in enumerate(ids):
        if tid == stop_id:
            spans.append((start, i + 1, True))
            start = i + 1
    if start < len(ids):
        spans.append((start, len(ids), False))
    return spans


@torch.no_grad()
def generate_one(
    model: AgeConditionedLM,
    vocab: WordPieceVocab,
    age: float,
    seed: Sequence[int],
    spec: GenerationSpec,
    rng: np.random.Generator,
) -> GeneratedTranscript:
    """One sampling run: extend the seed to ``max_tokens`` tokens, decode,
    and trim seed-bearing and unterminated utterances."""
    ids = list(seed)
    seq_len = model.config.seq_len
    while len(ids) < spec.max_tokens:
        context = ids[-seq_len:] if len(ids) > seq_len else ids
        ids.append(sample_next(model, age, context, spec.top_k, spec.temperature, rng))

    utterances: list[Utterance] = []
    seed_end = len(seed)
    for start, end, terminated in _split_token_utterances(ids, vocab.stop_id):
        if start < seed_end:  # overlaps a seed token position
            continue
        if not terminated:
            continue
        text = decode(ids[start:end], vocab)
        words = tuple(text.split()[:-1])  # drop the terminal "."
        if words:
            utterances.append(Utterance(words=words, source_age_months=age))
    return GeneratedTranscript(age_months=age, utterances=utterances, seed_tokens=tuple(seed))


def run_rng(master_seed: int, age: float, run_index: int) -> np.random.Generator:
    """Per-run stream derived from (master seed, age, run); generation
    order cannot change results."""
    return np.random.default_rng([master_seed, int(round(age * 1000)), run_index])


def generate_corpus(
    model: AgeConditionedLM,
    vocab: WordPieceVocab,
    train_streams: dict[int, list[int]],
    spec: GenerationSpec,
) -> dict[float, list[GeneratedTranscript]]:
    """``runs_per_age`` independent runs for every conditioning age."""
    corpora: dict[float, list[GeneratedTranscript]] = {}
    for age in spec.ages:
        transcripts = []
        for run in range(spec.runs_per_age):
            rng = run_rng(spec.rng_seed, age, run)
            seed = draw_seed(train_streams, rng, spec.seed_len_range)
            transcripts.append(generate_one(model, vocab, age, seed, spec, rng))
        corpora[age] = transcripts
    return corpora


def word_counts(corpora: dict[float, list[GeneratedTranscript]]) -> dict[float, int]:
    return {
        age: sum(len(u.words) for t in transcripts for u in t.utterances)
        for age, transcripts in corpora.items()
    }
