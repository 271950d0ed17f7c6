"""Deterministic synthetic corpus for smoke tests and CI.

The real transcripts cannot be redistributed, so this builds a small
age-annotated export with the qualitative structure the pipeline cares
about: utterance length grows with age, interjections fade with age, and
a 57-month bin exists for validation. A companion fake CoNLL-U writer
provides parse-derived measures without an external tagger.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .corpus import Utterance

TOY_AGES = (6.0, 12.0, 18.0, 24.0, 30.0, 36.0, 42.0, 48.0, 57.0)

# word -> (lemma, upos)
TOY_LEXICON: dict[str, tuple[str, str]] = {
    "ball": ("ball", "NOUN"), "doggy": ("doggy", "NOUN"), "kitty": ("kitty", "NOUN"),
    "baby": ("baby", "NOUN"), "book": ("book", "NOUN"), "truck": ("truck", "NOUN"),
    "bear": ("bear", "NOUN"), "duck": ("duck", "NOUN"), "cup": ("cup", "NOUN"),
    "shoe": ("shoe", "NOUN"), "banana": ("banana", "NOUN"), "water": ("water", "NOUN"),
    "bunny": ("bunny", "NOUN"), "blanket": ("blanket", "NOUN"), "spoon": ("spoon", "NOUN"),
    "babies": ("baby", "NOUN"), "trucks": ("truck", "NOUN"), "ducks": ("duck", "NOUN"),
    "go": ("go", "VERB"), "look": ("look", "VERB"), "see": ("see", "VERB"),
    "want": ("want", "VERB"), "put": ("put", "VERB"), "come": ("come", "VERB"),
    "eat": ("eat", "VERB"), "play": ("play", "VERB"), "throw": ("throw", "VERB"),
    "open": ("open", "VERB"), "playing": ("play", "VERB"), "eating": ("eat", "VERB"),
    "looking": ("look", "VERB"), "wants": ("want", "VERB"), "goes": ("go", "VERB"),
    "you": ("you", "PRON"), "it": ("it", "PRON"), "he": ("he", "PRON"),
    "she": ("she", "PRON"), "we": ("we", "PRON"), "i": ("i", "PRON"),
    "that": ("that", "PRON"), "this": ("this", "PRON"),
    "big": ("big", "ADJ"), "little": ("little", "ADJ"), "red": ("red", "ADJ"),
    "nice": ("nice", "ADJ"), "silly": ("silly", "ADJ"), "fuzzy": ("fuzzy", "ADJ"),
    "oh": ("oh", "INTJ"), "wow": ("wow", "INTJ"), "yeah": ("yeah", "INTJ"),
    "uhoh": ("uhoh", "INTJ"), "huh": ("huh", "INTJ"), "okay": ("okay", "INTJ"),
    "the": ("the", "DET"), "a": ("a", "DET"),
    "there": ("there", "ADV"), "here": ("here", "ADV"), "now": ("now", "ADV"),
    "not": ("not", "ADV"), "again": ("again", "ADV"),
}

_BY_POS: dict[str, list[str]] = {}
for _w, (_l, _p) in TOY_LEXICON.items():
    _BY_POS.setdefault(_p, []).append(_w)
for _v in _BY_POS.values():
    _v.sort()


def toy_mean_length(age: float) -> float:
    """Teacher curve: 2 words at 6 months rising to 8 at 48+."""
    return 2.0 + 6.0 * min(max(age - 6.0, 0.0), 42.0) / 42.0


def _pos_weights(age: float) -> dict[str, float]:
    t = min(max(age - 6.0, 0.0), 42.0) / 42.0
    return {
        "INTJ": 0.30 - 0.22 * t,
        "NOUN": 0.22 + 0.08 * t,
        "VERB": 0.14 + 0.06 * t,
        "PRON": 0.12 + 0.04 * t,
        "ADJ": 0.05 + 0.03 * t,
        "DET": 0.09,
        "ADV": 0.08,
    }


def toy_utterance(age: float, rng: np.random.Generator) -> list[str]:
    mean_len = toy_mean_length(age)
    length = max(1, int(round(rng.normal(mean_len, 0.8))))
    weights = _pos_weights(age)
    cats = sorted(weights)
    p = np.array([weights[c] for c in cats])
    p = p / p.sum()
    words = []
    for _ in range(length):
        cat = cats[int(rng.choice(len(cats), p=p))]
        options = _BY_POS[cat]
        words.append(options[int(rng.integers(0, len(options)))])
    return words


def toy_utterances(
    n_per_age: int, ages: tuple[float, ...] = TOY_AGES, seed: int = 0
) -> list[Utterance]:
    rng = np.random.default_rng(seed)
    out = []
    for age in ages:
        for _ in range(n_per_age):
            jitter = float(rng.uniform(-1.4, 1.4))
            out.append(
                Utterance(words=tuple(toy_utterance(age, rng)), source_age_months=age + jitter)
            )
    return out


def write_toy_export(
    path: str | Path, n_per_age: int = 700, ages: tuple[float, ...] = TOY_AGES, seed: int = 0
) -> int:
    """CSV export in the documented schema, including rows the filters
    must reject. Returns the number of keepable utterance rows."""
    rng = np.random.default_rng(seed)
    kept = 0
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["gloss", "speaker_role", "target_child_age", "corpus_name", "transcript_id"])
        for age in ages:
            for i in range(n_per_age):
                words = toy_utterance(age, rng)
                text = " ".join(words).capitalize()
                text += "?" if rng.random() < 0.2 else "."
                role = "MOT" if rng.random() < 0.7 else "FAT"
                jitter = float(rng.uniform(-1.4, 1.4))
                writer.writerow([text, role, f"{age + jitter:.2f}", "toy", f"t{int(age)}_{i}"])
                kept += 1
                # interleave rows that preprocessing must drop
                if i % 50 == 0:
                    writer.writerow(["xxx yyy.", "MOT", f"{age:.2f}", "toy", f"bad{int(age)}_{i}"])
                    writer.writerow(["Hi there.", "INV", f"{age:.2f}", "toy", f"inv{int(age)}_{i}"])
                    writer.writerow(["No age here.", "MOT", "", "toy", f"noage{int(age)}_{i}"])
    return kept


def write_toy_conllu(
    utterances_by_group: dict[tuple[str, float], list[Utterance]],
    conllu_path: str | Path,
    map_path: str | Path,
) -> None:
    """Deterministic fake annotation: every word is tagged from the toy
    lexicon (unknown words become X), the first non-INTJ word (else the
    first word) is the root, everything else attaches to it, and the
    terminal stop is a PUNCT dependent."""
    mapping = []
    with Path(conllu_path).open("w", encoding="utf-8") as fh:
        for (tag, age), utts in utterances_by_group.items():
            for idx, utt in enumerate(utts):
                entries = [TOY_LEXICON.get(w, (w, "X")) for w in utt.words]
                root = next(
                    (i for i, (_, pos) in enumerate(entries) if pos not in ("INTJ", "PUNCT")), 0
                )
                fh.write(f"# sent_id = {tag}-{age}-{idx}\n")
                for i, (word, (lemma, pos)) in enumerate(zip(utt.words, entries)):
                    head = 0 if i == root else root + 1
                    deprel = "root" if i == root else "dep"
                    fh.write(f"{i + 1}\t{word}\t{lemma}\t{pos}\t_\t_\t{head}\t{deprel}\t_\t_\n")
                n = len(utt.words)
                fh.write(f"{n + 1}\t.\t.\tPUNCT\t_\t_\t{root + 1}\tpunct\t_\t_\n")
                fh.write("\n")
            mapping.append({"corpus_tag": tag, "age": age, "count": len(utts)})
    Path(map_path).write_text(json.dumps(mapping, indent=2), encoding="utf-8")
