"""WordPiece vocabulary training and deterministic encode/decode.

Training follows the likelihood-gain merge objective: at each step the
adjacent piece pair maximizing count(pair) / (count(left) * count(right))
is merged, with ties broken lexicographically, until the vocabulary
reaches its target size. Encoding is greedy longest-match-first with
"##" marking word-internal continuation pieces.
"""

from __future__ import annotations

import hashlib
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .corpus import AgeBin, Utterance
from .errors import ConfigError

UNK_PIECE = "[UNK]"
STOP_PIECE = "."
CONTINUATION = "##"
MAX_WORD_CHARS = 100


@dataclass
class WordPieceVocab:
    pieces: list[str]
    target_size: int
    piece_to_id: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        if len(set(self.pieces)) != len(self.pieces):
            raise ConfigError("duplicate pieces in vocabulary")
        for required in (UNK_PIECE, STOP_PIECE):
            if required not in self.pieces:
                raise ConfigError(f"vocabulary missing required piece {required!r}")
        self.piece_to_id = {p: i for i, p in enumerate(self.pieces)}

    def __len__(self) -> int:
        return len(self.pieces)

    @property
    def unk_id(self) -> int:
        return self.piece_to_id[UNK_PIECE]

    @property
    def stop_id(self) -> int:
        return self.piece_to_id[STOP_PIECE]

    def checksum(self) -> str:
        h = hashlib.sha256("\n".join(self.pieces).encode("utf-8"))
        return h.hexdigest()

    def save(self, path: str | Path) -> None:
        Path(path).write_text("\n".join(self.pieces) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "WordPieceVocab":
        pieces = Path(path).read_text(encoding="utf-8").splitlines()
        return cls(pieces=pieces, target_size=len(pieces))


def _word_to_initial_pieces(word: str) -> list[str]:
    return [word[0]] + [CONTINUATION + ch for ch in word[1:]]


def _merge_piece(left: str, right: str) -> str:
    assert right.startswith(CONTINUATION)
    return left + right[len(CONTINUATION):]


def train_vocab(corpus: Iterable[Utterance], target_size: int = 8000) -> WordPieceVocab:
    """Build a WordPiece vocabulary of at most ``target_size`` pieces.

    Deterministic: merge ties are broken by lexicographic order of the
    (left, right) pair.
    """
    word_freq: Counter[str] = Counter()
    for utt in corpus:
        word_freq.update(utt.words)
    if not word_freq:
        raise ConfigError("cannot train a vocabulary on an empty corpus")

    words = sorted(word_freq)
    freqs = [word_freq[w] for w in words]
    splits: list[list[str]] = [_word_to_initial_pieces(w) for w in words]

    alphabet = sorted({p for split in splits for p in split})
    vocab = [UNK_PIECE, STOP_PIECE] + alphabet
    if target_size < len(vocab):
        raise ConfigError(
            f"target_size {target_size} is below alphabet + specials ({len(vocab)})"
        )
    vocab_set = set(vocab)

    piece_counts: Counter[str] = Counter()
    pair_counts: Counter[tuple[str, str]] = Counter()
    pair_words: defaultdict[tuple[str, str], set[int]] = defaultdict(set)

    def add_word(idx: int, sign: int) -> None:
        f = freqs[idx] * sign
        split = splits[idx]
        for p in split:
            piece_counts[p] += f
        for pair in zip(split, split[1:]):
            pair_counts[pair] += f
            if sign > 0:
                pair_words[pair].add(idx)

    for i in range(len(words)):
        add_word(i, +1)

    while len(vocab) < target_size:
        best_pair = None
        best_score = -1.0
        for pair, pc in pair_counts.items():
            if pc <= 0:
                continue
            denom = piece_counts[pair[0]] * piece_counts[pair[1]]
            score = pc / denom
            if score > best_score or (score == best_score and pair < best_pair):
                best_score = score
                best_pair = pair
        if best_pair is None:
            break
        new_piece = _merge_piece(*best_pair)
        affected = [i for i in pair_words.pop(best_pair, ()) if best_pair in zip(splits[i], splits[i][1:])]
        for idx in affected:
            add_word(idx, -1)
            split = splits[idx]
            merged: list[str] = []
            j = 0
            while j < len(split):
                if j + 1 < len(split) and (split[j], split[j + 1]) == best_pair:
                    merged.append(new_piece)
                    j += 2
                else:
                    merged.append(split[j])
                    j += 1
            splits[idx] = merged
            add_word(idx, +1)
        pair_counts = +pair_counts  # drop zero/negative entries
        if new_piece not in vocab_set:
            vocab.append(new_piece)
            vocab_set.add(new_piece)

    return WordPieceVocab(pieces=vocab, target_size=target_size)


def encode_word(word: str, vocab: WordPieceVocab) -> list[int]:
    """Greedy longest-match-first segmentation; unsegmentable -> [unk]."""
    if len(word) > MAX_WORD_CHARS:
        return [vocab.unk_id]
    ids: list[int] = []
    start = 0
    n = len(word)
    while start < n:
        end = n
        match = None
        while start < end:
            piece = word[start:end]
            if start > 0:
                piece = CONTINUATION + piece
            pid = vocab.piece_to_id.get(piece)
            if pid is not None:
                match = pid
                break
            end -= 1
        if match is None:
            return [vocab.unk_id]
        ids.append(match)
        start = end
    return ids


def encode(utterance: Utterance, vocab: WordPieceVocab) -> list[int]:
    """Token ids for the utterance's words followed by the stop token."""
    ids: list[int] = []
    for word in utterance.words:
        ids.extend(encode_word(word, vocab))
    ids.append(vocab.stop_id)
    return ids


def decode(ids: Sequence[int], vocab: WordPieceVocab) -> str:
    """Inverse of encode for unknown-free sequences; returns the
    normalized one-line form ("go ahead .")."""
    parts: list[str] = []
    for tid in ids:
        if not 0 <= tid < len(vocab):
            raise ValueError(f"token id {tid} out of range for vocab of {len(vocab)}")
        piece = vocab.pieces[tid]
        if piece.startswith(CONTINUATION) and parts:
            parts[-1] += piece[len(CONTINUATION):]
        else:
            parts.append(piece)
    return " ".join(parts)


def encode_corpus_stream(bins: Iterable[AgeBin], vocab: WordPieceVocab) -> dict[int, list[int]]:
    """Per-bin concatenation of utterance token sequences, in corpus order."""
    streams: dict[int, list[int]] = {}
    for b in bins:
        stream: list[int] = []
        for utt in b.utterances:
            stream.extend(encode(utt, vocab))
        streams[b.center_months] = stream
    return streams
