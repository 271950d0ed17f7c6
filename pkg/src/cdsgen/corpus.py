"""Ingestion and normalization of age-annotated transcript exports.

Raw exports (CSV or JSON-lines with columns ``gloss``, ``speaker_role``,
``target_child_age``, ``corpus_name``, ``transcript_id``) are filtered to
caregiver speech, lowercased, whitespace-tokenized, and grouped into
3-month age bins centered at 3..84 months. The 57-month bin is held out
for validation.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

from .errors import ConfigError, SchemaError

BIN_CENTERS = tuple(range(3, 85, 3))
BIN_WIDTH = 3.0
VALIDATION_BIN = 57

DAYS_PER_MONTH = 30.4375

#: Standard CHAT codes for unintelligible speech; an utterance containing
#: any of these as a word is excluded.
DEFAULT_UNINTELLIGIBLE_MARKERS = frozenset({"xxx", "yyy", "www"})

#: Export speaker codes mapped onto the roles we keep. Unknown codes map
#: to "other" and are filtered out.
DEFAULT_ROLE_MAP = {
    "MOT": "mother",
    "FAT": "father",
    "mother": "mother",
    "father": "father",
    "Mother": "mother",
    "Father": "father",
}

REQUIRED_COLUMNS = ("gloss", "speaker_role", "target_child_age", "corpus_name", "transcript_id")

_TERMINAL_PUNCT = ".!?"


@dataclass(frozen=True)
class RawRecord:
    text: str
    speaker_role: str
    child_age_months: Optional[float]
    corpus_id: str
    transcript_id: str


@dataclass(frozen=True)
class Utterance:
    words: tuple[str, ...]
    source_age_months: float
    corpus_id: str = ""

    def serialize(self) -> str:
        """One-line normalized form: space-separated words plus ' .'."""
        return " ".join(self.words) + " ."


@dataclass
class AgeBin:
    center_months: int
    utterances: list[Utterance] = field(default_factory=list)


@dataclass
class CorpusSplit:
    train_bins: list[AgeBin]
    validation_bin: AgeBin


@dataclass
class RejectionReport:
    """Counts of rows/records dropped at each stage."""

    malformed_rows: list[tuple[int, str]] = field(default_factory=list)
    empty_text: int = 0
    bad_role: int = 0
    missing_age: int = 0
    unintelligible: int = 0
    no_words: int = 0
    out_of_range_age: int = 0

    def total_filtered(self) -> int:
        return (
            self.empty_text
            + self.bad_role
            + self.missing_age
            + self.unintelligible
            + self.no_words
        )


def _parse_age(raw: str | float | None) -> Optional[float]:
    if raw is None:
        return None
    if isinstance(raw, (int, float)):
        age = float(raw)
    else:
        raw = raw.strip()
        if not raw:
            return None
        age = float(raw)
    if not math.isfinite(age) or age < 0:
        raise ValueError(f"invalid age value {raw!r}")
    return age


def load_records(
    path: str | Path,
    fmt: str = "csv",
    role_map: dict[str, str] | None = None,
    report: RejectionReport | None = None,
) -> list[RawRecord]:
    """Read an export file into RawRecords, in file order.

    ``fmt`` is "csv" (delimited table with header) or "jsonl". Malformed
    rows are recorded in ``report`` with their line numbers.
    """
    path = Path(path)
    role_map = role_map if role_map is not None else DEFAULT_ROLE_MAP
    report = report if report is not None else RejectionReport()
    if not path.exists():
        raise IOError(f"export file not found: {path}")

    records: list[RawRecord] = []
    with path.open(encoding="utf-8") as fh:
        if fmt == "csv":
            reader = csv.DictReader(fh)
            if reader.fieldnames is None:
                raise SchemaError(f"{path}: empty file, no header")
            for col in REQUIRED_COLUMNS:
                if col not in reader.fieldnames:
                    raise SchemaError(f"{path}: missing required column {col!r}")
            rows: Iterable[tuple[int, dict]] = (
                (lineno, row) for lineno, row in enumerate(reader, start=2)
            )
        elif fmt == "jsonl":
            def _iter_jsonl():
                for lineno, line in enumerate(fh, start=1):
                    if not line.strip():
                        continue
                    try:
                        obj = json.loads(line)
                    except json.JSONDecodeError as exc:
                        report.malformed_rows.append((lineno, f"bad json: {exc}"))
                        continue
                    missing = [c for c in REQUIRED_COLUMNS if c not in obj]
                    if missing:
                        raise SchemaError(f"{path}:{lineno}: missing field {missing[0]!r}")
                    yield lineno, obj

            rows = _iter_jsonl()
        else:
            raise ConfigError(f"unknown export format {fmt!r}")

        for lineno, row in rows:
            text = (row.get("gloss") or "").strip()
            if not text:
                report.empty_text += 1
                report.malformed_rows.append((lineno, "empty text"))
                continue
            try:
                age = _parse_age(row.get("target_child_age"))
            except ValueError as exc:
                report.malformed_rows.append((lineno, str(exc)))
                continue
            role_code = (row.get("speaker_role") or "").strip()
            role = role_map.get(role_code, "other")
            records.append(
                RawRecord(
                    text=text,
                    speaker_role=role,
                    child_age_months=age,
                    corpus_id=str(row.get("corpus_name") or ""),
                    transcript_id=str(row.get("transcript_id") or ""),
                )
            )
    return records


def _normalize_text(text: str) -> list[str]:
    """Lowercase, strip punctuation (apostrophes kept), split on whitespace.

    Terminal punctuation only delimits the utterance; it never survives as
    a word. Returns the word list without the terminal stop.
    """
    text = text.lower().strip()
    while text and text[-1] in _TERMINAL_PUNCT:
        text = text[:-1].rstrip()
    cleaned = []
    for ch in text:
        if ch.isspace():
            cleaned.append(" ")
        elif ch in "'’":
            cleaned.append("'")
        elif ch.isalnum() or ch in "+_@-":
            cleaned.append(ch)
        # everything else (commas, stops, quotes, brackets) is stripped
    return "".join(cleaned).split()


def filter_and_normalize(
    records: Iterable[RawRecord],
    markers: frozenset[str] | set[str] = DEFAULT_UNINTELLIGIBLE_MARKERS,
    report: RejectionReport | None = None,
) -> list[Utterance]:
    """Keep caregiver records with age info and intelligible text."""
    report = report if report is not None else RejectionReport()
    out: list[Utterance] = []
    for rec in records:
        if rec.speaker_role not in ("mother", "father"):
            report.bad_role += 1
            continue
        if rec.child_age_months is None:
            report.missing_age += 1
            continue
        words = _normalize_text(rec.text)
        if not words:
            report.no_words += 1
            continue
        if any(w in markers for w in words):
            report.unintelligible += 1
            continue
        out.append(
            Utterance(
                words=tuple(words),
                source_age_months=rec.child_age_months,
                corpus_id=rec.corpus_id,
            )
        )
    return out


def age_to_bin_center(age_months: float) -> Optional[int]:
    """Half-open assignment [center - 1.5, center + 1.5); None if out of range."""
    if not (BIN_CENTERS[0] - BIN_WIDTH / 2 <= age_months < BIN_CENTERS[-1] + BIN_WIDTH / 2):
        return None
    center = int(math.floor((age_months + BIN_WIDTH / 2) / BIN_WIDTH)) * 3
    return center


def bin_by_age(
    utterances: Iterable[Utterance], report: RejectionReport | None = None
) -> list[AgeBin]:
    report = report if report is not None else RejectionReport()
    bins: dict[int, AgeBin] = {}
    for utt in utterances:
        center = age_to_bin_center(utt.source_age_months)
        if center is None:
            report.out_of_range_age += 1
            continue
        bins.setdefault(center, AgeBin(center_months=center)).utterances.append(utt)
    return [bins[c] for c in sorted(bins)]


def split_train_validation(bins: list[AgeBin]) -> CorpusSplit:
    validation = [b for b in bins if b.center_months == VALIDATION_BIN]
    if not validation:
        raise ConfigError(
            f"no {VALIDATION_BIN}-month bin present; cannot form a validation set"
        )
    train = [b for b in bins if b.center_months != VALIDATION_BIN]
    return CorpusSplit(train_bins=train, validation_bin=validation[0])


def write_normalized_corpus(bins: list[AgeBin], corpus_path: Path, index_path: Path) -> None:
    """One utterance per line, grouped by bin, with a sidecar line-range index."""
    index = []
    line = 0
    with Path(corpus_path).open("w", encoding="utf-8") as fh:
        for b in bins:
            start = line
            for utt in b.utterances:
                fh.write(utt.serialize() + "\n")
                line += 1
            index.append(
                {
                    "age_bin": b.center_months,
                    "start_line": start,
                    "end_line": line,
                    "corpus_ids": sorted({u.corpus_id for u in b.utterances}),
                }
            )
    Path(index_path).write_text(json.dumps(index, indent=2), encoding="utf-8")


def read_normalized_corpus(corpus_path: Path, index_path: Path) -> list[AgeBin]:
    lines = Path(corpus_path).read_text(encoding="utf-8").splitlines()
    index = json.loads(Path(index_path).read_text(encoding="utf-8"))
    bins = []
    for entry in index:
        center = int(entry["age_bin"])
        bin_ = AgeBin(center_months=center)
        for ln in lines[entry["start_line"] : entry["end_line"]]:
            words = ln.split()
            if not words or words[-1] != ".":
                raise SchemaError(f"{corpus_path}: line not full-stop terminated: {ln!r}")
            bin_.utterances.append(
                Utterance(words=tuple(words[:-1]), source_age_months=float(center))
            )
        bins.append(bin_)
    return bins
