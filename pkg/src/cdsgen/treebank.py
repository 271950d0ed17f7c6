"""CoNLL-U ingestion and the parse-derived corpus measures.

POS tagging / parsing happen externally; this module only reads standard
CoNLL-U files and computes POS rates, root-dependency counts, and lemma
streams. PUNCT tokens are excluded from all reported measures.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .errors import MeasureUndefinedError

REPORTED_POS = ("NOUN", "VERB", "PRON", "ADJ", "INTJ")


@dataclass(frozen=True)
class UDToken:
    id: int
    form: str
    lemma: str
    upos: str
    head: int
    deprel: str


@dataclass
class UDSentence:
    tokens: list[UDToken]
    source: tuple[str, int, int] = ("", 0, 0)  # (corpus tag, age bin, utterance index)

    def root_index(self) -> int | None:
        roots = [t.id for t in self.tokens if t.head == 0]
        return roots[0] if len(roots) == 1 else None


@dataclass
class ParseReport:
    rejected_blocks: list[tuple[int, str]] = field(default_factory=list)
    comment_lines: int = 0
    range_lines: int = 0
    token_lines: int = 0


def _parse_block(
    lines: list[tuple[int, str]], strict: bool, report: ParseReport
) -> UDSentence | None:
    tokens: list[UDToken] = []
    first_line = lines[0][0]
    for lineno, line in lines:
        cols = line.split("\t")
        if len(cols) != 10:
            report.rejected_blocks.append((first_line, f"line {lineno}: expected 10 columns, got {len(cols)}"))
            return None
        tok_id, form, lemma, upos, _, _, head, deprel = cols[:8]
        if "-" in tok_id or "." in tok_id:
            report.range_lines += 1
            continue  # multiword ranges and empty nodes are skipped
        try:
            tid = int(tok_id)
            hid = int(head)
        except ValueError:
            report.rejected_blocks.append((first_line, f"line {lineno}: non-integer id/head"))
            return None
        report.token_lines += 1
        tokens.append(UDToken(id=tid, form=form, lemma=lemma, upos=upos, head=hid, deprel=deprel))
    if not tokens:
        return None
    n = len(tokens)
    if [t.id for t in tokens] != list(range(1, n + 1)):
        report.rejected_blocks.append((first_line, "non-consecutive token ids"))
        return None
    if any(not (0 <= t.head <= n) for t in tokens):
        report.rejected_blocks.append((first_line, "head out of range"))
        return None
    roots = [t for t in tokens if t.head == 0]
    if len(roots) != 1:
        if strict or not roots:
            report.rejected_blocks.append((first_line, f"{len(roots)} root tokens"))
            return None
        # Lenient repair: keep the first root, reattach the rest to it.
        primary = roots[0].id
        tokens = [
            t if t.head != 0 or t.id == primary
            else UDToken(t.id, t.form, t.lemma, t.upos, primary, "parataxis")
            for t in tokens
        ]
    return UDSentence(tokens=tokens)


def parse_conllu(
    path: str | Path, strict: bool = True, report: ParseReport | None = None
) -> list[UDSentence]:
    """One UDSentence per blank-line-separated block, in file order."""
    report = report if report is not None else ParseReport()
    sentences: list[UDSentence] = []
    block: list[tuple[int, str]] = []
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                if block:
                    sent = _parse_block(block, strict, report)
                    if sent is not None:
                        sentences.append(sent)
                    block = []
                continue
            if line.startswith("#"):
                report.comment_lines += 1
                continue
            block.append((lineno, line))
    if block:
        sent = _parse_block(block, strict, report)
        if sent is not None:
            sentences.append(sent)
    return sentences


def _content_tokens(sentence: UDSentence) -> list[UDToken]:
    return [t for t in sentence.tokens if t.upos != "PUNCT"]


def pos_rates(
    sentences: Iterable[UDSentence], categories: Sequence[str] | None = REPORTED_POS
) -> dict[str, float]:
    """Proportion of (non-PUNCT) tokens per POS category.

    With ``categories=None``, returns rates for every tag present (these
    sum to 1)."""
    counts: Counter[str] = Counter()
    total = 0
    for sent in sentences:
        for tok in _content_tokens(sent):
            counts[tok.upos] += 1
            total += 1
    if total == 0:
        raise MeasureUndefinedError("pos_rates: no non-punctuation tokens")
    if categories is None:
        categories = sorted(counts)
    return {cat: counts.get(cat, 0) / total for cat in categories}


def root_dependency_count(sentence: UDSentence, mode: str = "children") -> int | None:
    """Direct non-PUNCT dependents of the root; None if the sentence has
    no unique root. ``mode="arcs"`` counts all non-PUNCT dependency arcs
    instead."""
    root = sentence.root_index()
    if root is None:
        return None
    if mode == "children":
        return sum(1 for t in _content_tokens(sentence) if t.head == root)
    if mode == "arcs":
        return sum(1 for t in _content_tokens(sentence) if t.head != 0)
    raise ValueError(f"unknown root-dependency mode {mode!r}")


def lemma_stream(sentences: Iterable[UDSentence]) -> list[str]:
    """Lowercase lemmas in token order, punctuation excluded."""
    return [t.lemma.lower() for s in sentences for t in _content_tokens(s)]
