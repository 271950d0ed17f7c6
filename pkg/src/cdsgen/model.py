"""Age-conditioned decoder-only transformer language model.

A scalar recipient age is mapped through a ReLU feed-forward layer into
one embedding vector that is prepended (in time) to the positionally
encoded token embeddings; causal self-attention then predicts the next
token at every position, so the age position itself predicts the first
token of the window.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import torch
import torch.nn as nn
import torch.nn.functional as F

from .errors import ConfigError, DivergenceError, SchemaError

CHECKPOINT_VERSION = 1


@dataclass
class ModelConfig:
    vocab_size: int = 8000
    d_model: int = 512
    n_blocks: int = 5
    n_heads: int = 8
    ffn_dim: int = 2048
    dropout: float = 0.05
    seq_len: int = 100
    learning_rate: float = 1e-4
    batch_size: int = 64
    patience: int = 15
    age_scale: float = 84.0
    # Whether the age-position output also gets a target (the window's
    # first token); with False only the 100 token positions are scored.
    include_age_target: bool = True

    def __post_init__(self):
        if self.d_model % self.n_heads != 0:
            raise ConfigError("d_model must be divisible by n_heads")
        if self.seq_len < 2:
            raise ConfigError("seq_len must be at least 2")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must be in [0, 1)")


@dataclass
class TrainingSample:
    tokens: list[int]  # seq_len + 1 consecutive ids, never crossing a bin boundary
    age_months: float


class Block(nn.Module):
    """Pre-norm transformer block with causal self-attention."""

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.n_heads = config.n_heads
        self.head_dim = config.d_model // config.n_heads
        self.ln1 = nn.LayerNorm(config.d_model)
        self.qkv = nn.Linear(config.d_model, 3 * config.d_model)
        self.proj = nn.Linear(config.d_model, config.d_model)
        self.ln2 = nn.LayerNorm(config.d_model)
        self.mlp = nn.Sequential(
            nn.Linear(config.d_model, config.ffn_dim),
            nn.GELU(),
            nn.Linear(config.ffn_dim, config.d_model),
        )
        self.drop = nn.Dropout(config.dropout)

    def _attend(self, x: torch.Tensor) -> torch.Tensor:
        b, t, d = x.shape
        q, k, v = self.qkv(x).split(d, dim=2)
        q = q.view(b, t, self.n_heads, self.head_dim).transpose(1, 2)
        k = k.view(b, t, self.n_heads, self.head_dim).transpose(1, 2)
        v = v.view(b, t, self.n_heads, self.head_dim).transpose(1, 2)
        att = (q @ k.transpose(-2, -1)) / math.sqrt(self.head_dim)
        mask = torch.triu(torch.ones(t, t, dtype=torch.bool, device=x.device), diagonal=1)
        att = att.masked_fill(mask, float("-inf"))
        att = F.softmax(att, dim=-1)
        out = att @ v
        return self.proj(out.transpose(1, 2).contiguous().view(b, t, d))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = x + self.drop(self._attend(self.ln1(x)))
        x = x + self.drop(self.mlp(self.ln2(x)))
        return x


class AgeConditionedLM(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        self.token_embedding = nn.Embedding(config.vocab_size, config.d_model)
        self.position_embedding = nn.Embedding(config.seq_len, config.d_model)
        self.age_conditioner = nn.Linear(1, config.d_model)
        self.blocks = nn.ModuleList(Block(config) for _ in range(config.n_blocks))
        self.drop = nn.Dropout(config.dropout)
        self.ln_f = nn.LayerNorm(config.d_model)
        self.head = nn.Linear(config.d_model, config.vocab_size)
        self.apply(self._init_weights)

    @staticmethod
    def _init_weights(module: nn.Module) -> None:
        if isinstance(module, (nn.Linear, nn.Embedding)):
            nn.init.normal_(module.weight, mean=0.0, std=0.02)
            if isinstance(module, nn.Linear) and module.bias is not None:
                nn.init.zeros_(module.bias)

    def forward(self, ages: torch.Tensor, tokens: torch.Tensor) -> torch.Tensor:
        """ages: (B,), tokens: (B, T) -> logits (B, T+1, vocab_size).

        Position 0 of the output corresponds to the age embedding, which
        carries no positional embedding."""
        b, t = tokens.shape
        if t < 1 or t > self.config.seq_len:
            raise ValueError(f"sequence length {t} outside [1, {self.config.seq_len}]")
        if tokens.min() < 0 or tokens.max() >= self.config.vocab_size:
            raise ValueError("token id out of vocabulary range")
        dtype = self.token_embedding.weight.dtype
        scaled = (ages / self.config.age_scale).to(dtype).view(b, 1)
        age_vec = F.relu(self.age_conditioner(scaled)).unsqueeze(1)  # (B, 1, D)
        pos = torch.arange(t, device=tokens.device)
        x = self.token_embedding(tokens) + self.position_embedding(pos)
        x = torch.cat([age_vec, x], dim=1)
        x = self.drop(x)
        for block in self.blocks:
            x = block(x)
        return self.head(self.ln_f(x))


def forward(
    model: AgeConditionedLM, age_months: float, tokens: Sequence[int], mode: str = "eval"
) -> torch.Tensor:
    """Single-sequence forward pass; returns (T+1, vocab_size) logits."""
    if age_months < 0:
        raise ValueError("age must be nonnegative")
    model.train(mode == "train")
    ctx = torch.enable_grad() if mode == "train" else torch.no_grad()
    with ctx:
        ages = torch.tensor([age_months], dtype=torch.float32)
        toks = torch.tensor([list(tokens)], dtype=torch.long)
        out = model(ages, toks)[0]
    model.eval()
    return out


def lm_loss(model: AgeConditionedLM, ages: torch.Tensor, tokens: torch.Tensor) -> torch.Tensor:
    """Mean next-token cross-entropy over a batch of (seq_len + 1)-token
    windows; inputs are tokens[:, :-1]."""
    expected = model.config.seq_len + 1
    if tokens.shape[1] != expected:
        raise ValueError(f"training sample must have {expected} tokens, got {tokens.shape[1]}")
    logits = model(ages, tokens[:, :-1])  # (B, seq_len + 1, V)
    if model.config.include_age_target:
        targets = tokens
    else:
        logits = logits[:, 1:, :]
        targets = tokens[:, 1:]
    return F.cross_entropy(logits.reshape(-1, logits.shape[-1]), targets.reshape(-1))


def make_samples(streams: dict[int, list[int]], seq_len: int) -> list[TrainingSample]:
    """Non-overlapping (seq_len + 1)-token windows with stride seq_len
    within each age bin's stream; the trailing remainder is dropped."""
    samples: list[TrainingSample] = []
    window = seq_len + 1
    for center in sorted(streams):
        stream = streams[center]
        start = 0
        while start + window <= len(stream):
            samples.append(TrainingSample(tokens=stream[start : start + window], age_months=float(center)))
            start += seq_len
    return samples


def _to_tensors(samples: Sequence[TrainingSample]) -> tuple[torch.Tensor, torch.Tensor]:
    tokens = torch.tensor([s.tokens for s in samples], dtype=torch.long)
    ages = torch.tensor([s.age_months for s in samples], dtype=torch.float32)
    return ages, tokens


@torch.no_grad()
def evaluate_loss(model: AgeConditionedLM, samples: Sequence[TrainingSample], batch_size: int = 64) -> float:
    model.eval()
    ages, tokens = _to_tensors(samples)
    total = 0.0
    for i in range(0, len(samples), batch_size):
        batch = slice(i, i + batch_size)
        loss = lm_loss(model, ages[batch], tokens[batch])
        total += loss.item() * (min(i + batch_size, len(samples)) - i)
    return total / len(samples)


def train(
    model: AgeConditionedLM,
    train_samples: Sequence[TrainingSample],
    validation_samples: Sequence[TrainingSample],
    seed: int = 0,
    max_epochs: int | None = None,
    verbose: bool = False,
) -> tuple[dict, list[dict]]:
    """Adam training with early stopping on validation loss.

    Returns (best state_dict, per-epoch history). Stops when the
    validation loss has not improved for ``patience`` epochs."""
    if not train_samples or not validation_samples:
        raise ConfigError("both training and validation sample sets must be non-empty")
    config = model.config
    torch.manual_seed(seed)
    opt = torch.optim.Adam(model.parameters(), lr=config.learning_rate)
    ages, tokens = _to_tensors(train_samples)
    n = len(train_samples)
    gen = torch.Generator().manual_seed(seed)

    best_loss = math.inf
    best_state = {k: v.detach().clone() for k, v in model.state_dict().items()}
    since_improvement = 0
    history: list[dict] = []
    epoch = 0
    while max_epochs is None or epoch < max_epochs:
        epoch += 1
        model.train()
        perm = torch.randperm(n, generator=gen)
        epoch_loss = 0.0
        for i in range(0, n, config.batch_size):
            idx = perm[i : i + config.batch_size]
            loss = lm_loss(model, ages[idx], tokens[idx])
            if not torch.isfinite(loss):
                raise DivergenceError(f"non-finite training loss at epoch {epoch}")
            opt.zero_grad()
            loss.backward()
            opt.step()
            epoch_loss += loss.item() * len(idx)
        val_loss = evaluate_loss(model, validation_samples, config.batch_size)
        if not math.isfinite(val_loss):
            raise DivergenceError(f"non-finite validation loss at epoch {epoch}")
        history.append(
            {"epoch": epoch, "train_loss": epoch_loss / n, "validation_loss": val_loss}
        )
        if verbose:
            print(f"epoch {epoch}: train {epoch_loss / n:.4f} val {val_loss:.4f}")
        if val_loss < best_loss:
            best_loss = val_loss
            best_state = {k: v.detach().clone() for k, v in model.state_dict().items()}
            since_improvement = 0
        else:
            since_improvement += 1
            if since_improvement >= config.patience:
                break
    model.load_state_dict(best_state)
    return best_state, history


def gradient_check(
    model: AgeConditionedLM,
    sample: TrainingSample,
    n_params: int = 200,
    step: float = 1e-4,
    seed: int = 0,
    corrupt_param: str | None = None,
) -> float:
    """Max relative error between autograd and central finite differences
    over ``n_params`` randomly chosen scalar parameters.

    ``corrupt_param`` flips the sign of that parameter tensor's analytic
    gradient (negative control). Run with a float64 model and dropout 0."""
    model.eval()
    ages = torch.tensor([sample.age_months], dtype=torch.float64)
    tokens = torch.tensor([sample.tokens], dtype=torch.long)

    model.zero_grad()
    loss = lm_loss(model, ages, tokens)
    loss.backward()

    named = [(name, p) for name, p in model.named_parameters() if p.grad is not None]
    flat: list[tuple[torch.Tensor, torch.Tensor, int]] = []
    for name, p in named:
        grad = p.grad
        if name == corrupt_param:
            grad = -grad
        for j in range(p.numel()):
            flat.append((p, grad, j))
    rng = torch.Generator().manual_seed(seed)
    chosen = torch.randperm(len(flat), generator=rng)[: min(n_params, len(flat))]

    max_err = 0.0
    with torch.no_grad():
        for k in chosen.tolist():
            p, grad, j = flat[k]
            orig = p.view(-1)[j].item()
            p.view(-1)[j] = orig + step
            lo_plus = lm_loss(model, ages, tokens).item()
            p.view(-1)[j] = orig - step
            lo_minus = lm_loss(model, ages, tokens).item()
            p.view(-1)[j] = orig
            fd = (lo_plus - lo_minus) / (2 * step)
            an = grad.view(-1)[j].item()
            denom = max(abs(fd), abs(an), 1e-8)
            max_err = max(max_err, abs(fd - an) / denom)
    return max_err


def save_checkpoint(
    model: AgeConditionedLM, path: str | Path, vocab_checksum: str = "", rng_state=None
) -> None:
    payload = {
        "format_version": CHECKPOINT_VERSION,
        "config": asdict(model.config),
        "vocab_checksum": vocab_checksum,
        "state_dict": model.state_dict(),
        "rng_state": rng_state if rng_state is not None else torch.get_rng_state(),
    }
    torch.save(payload, str(path))


def load_checkpoint(
    path: str | Path,
    expected_vocab_checksum: str | None = None,
    expected_config: ModelConfig | None = None,
) -> tuple[AgeConditionedLM, dict]:
    try:
        payload = torch.load(str(path), map_location="cpu", weights_only=False)
    except Exception as exc:
        raise SchemaError(f"unreadable checkpoint {path}: {exc}") from exc
    if not isinstance(payload, dict) or payload.get("format_version") != CHECKPOINT_VERSION:
        raise SchemaError(f"checkpoint {path}: unsupported or missing format version")
    if expected_vocab_checksum is not None and payload["vocab_checksum"] != expected_vocab_checksum:
        raise SchemaError(f"checkpoint {path}: vocabulary checksum mismatch")
    config = ModelConfig(**payload["config"])
    if expected_config is not None and config != expected_config:
        raise SchemaError(f"checkpoint {path}: config does not match the expected one")
    model = AgeConditionedLM(config)
    try:
        model.load_state_dict(payload["state_dict"])
    except RuntimeError as exc:
        raise SchemaError(f"checkpoint {path}: parameter shape mismatch: {exc}") from exc
    model.eval()
    return model, payload
