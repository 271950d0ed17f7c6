import json
import math

import pytest
import torch

from cdsgen.corpus import Utterance
from cdsgen.errors import SchemaError
from cdsgen.metrics import perplexity
from cdsgen.model import AgeConditionedLM, ModelConfig
from cdsgen.scoring import read_logprob_file, score_string, score_tokens, write_logprob_file
from cdsgen.tokenizer import UNK_PIECE, WordPieceVocab


@pytest.fixture(scope="module")
def vocab():
    return WordPieceVocab(pieces=[UNK_PIECE, ".", "a", "b", "c"], target_size=5)


@pytest.fixture(scope="module")
def model(vocab):
    torch.manual_seed(0)
    cfg = ModelConfig(vocab_size=len(vocab), d_model=8, n_blocks=1, n_heads=1,
                      ffn_dim=16, dropout=0.0, seq_len=4)
    return AgeConditionedLM(cfg)


def test_one_logprob_per_token(model, vocab):
    utts = [Utterance(("a", "b"), 6.0)]
    logprobs = score_string(model, vocab, 6.0, utts)
    assert len(logprobs) == 3  # two words + stop
    assert all(lp < 0 for lp in logprobs)


def test_uniform_head_gives_vocab_size_perplexity(model, vocab):
    with torch.no_grad():
        saved = (model.head.weight.clone(), model.head.bias.clone())
        model.head.weight.zero_()
        model.head.bias.zero_()
    try:
        logprobs = score_tokens(model, 6.0, [2, 3, 1])
        assert perplexity(logprobs) == pytest.approx(len(vocab))
        assert all(lp == pytest.approx(math.log(1 / len(vocab))) for lp in logprobs)
    finally:
        with torch.no_grad():
            model.head.weight.copy_(saved[0])
            model.head.bias.copy_(saved[1])


def test_long_sequence_windowed(model, vocab):
    ids = [2, 3, 4, 1] * 3  # 12 tokens, window 4
    assert len(score_tokens(model, 6.0, ids)) == 12


def test_logprob_file_roundtrip(tmp_path):
    records = [{"text": "a b .", "tokens": ["a", "b", "."], "logprobs": [-1.0, -2.0, -0.5]}]
    path = tmp_path / "lp.jsonl"
    write_logprob_file(path, records)
    assert read_logprob_file(path) == records


def test_logprob_file_validation(tmp_path):
    path = tmp_path / "lp.jsonl"
    path.write_text(json.dumps({"text": "a", "tokens": ["a"]}) + "\n")
    with pytest.raises(SchemaError, match="logprobs"):
        read_logprob_file(path)
    path.write_text(json.dumps({"text": "a", "tokens": ["a", "b"], "logprobs": [-1.0]}) + "\n")
    with pytest.raises(SchemaError, match="mismatch"):
        read_logprob_file(path)
