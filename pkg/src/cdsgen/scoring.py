"""Per-token log-probability scoring for perplexity evaluation.

Default scorer is the internally trained age-conditioned model; external
scorers are ingested through a JSON-lines exchange file with one record
per scored string: {"text": ..., "tokens": [...], "logprobs": [...]}
where logprobs are natural logs.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Sequence

import torch
import torch.nn.functional as F

from .corpus import Utterance
from .errors import SchemaError
from .model import AgeConditionedLM
from .tokenizer import WordPieceVocab, encode

LOGPROB_FIELDS = ("text", "tokens", "logprobs")


@torch.no_grad()
def score_tokens(model: AgeConditionedLM, age: float, ids: Sequence[int]) -> list[float]:
    """Natural-log probability of each token given its predecessors (and
    the age embedding, which predicts the first token). Sequences longer
    than the context window are scored in consecutive windows."""
    model.eval()
    out: list[float] = []
    seq_len = model.config.seq_len
    ids = list(ids)
    for start in range(0, len(ids), seq_len):
        window = ids[start : start + seq_len]
        ages = torch.tensor([age], dtype=torch.float32)
        toks = torch.tensor([window], dtype=torch.long)
        logits = model(ages, toks)[0]  # (T+1, V); row i predicts window[i]
        logp = F.log_softmax(logits[: len(window)], dim=-1)
        out.extend(logp[torch.arange(len(window)), torch.tensor(window)].tolist())
    return out


def score_string(
    model: AgeConditionedLM, vocab: WordPieceVocab, age: float, utterances: Sequence[Utterance]
) -> list[float]:
    ids: list[int] = []
    for utt in utterances:
        ids.extend(encode(utt, vocab))
    return score_tokens(model, age, ids)


def write_logprob_file(path: str | Path, records: list[dict]) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")


def read_logprob_file(path: str | Path) -> list[dict]:
    records = []
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"{path}:{lineno}: invalid json: {exc}") from exc
            missing = [f for f in LOGPROB_FIELDS if f not in rec]
            if missing:
                raise SchemaError(f"{path}:{lineno}: missing field {missing[0]!r}")
            if len(rec["tokens"]) != len(rec["logprobs"]):
                raise SchemaError(f"{path}:{lineno}: tokens/logprobs length mismatch")
            records.append(rec)
    return records
