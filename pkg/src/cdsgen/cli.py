"""Pipeline orchestration: prepare, train-tokenizer, train, generate,
ingest-parses, analyze, report.

Each stage reads a declarative YAML config (with a few command-line
overrides), writes its artifacts under the work directory, and records a
manifest with the config hash, input checksums, and master seed. Exit
codes: 0 success, 2 schema/config error, 3 missing dependency, 4
numerical divergence.
"""

from __future__ import annotations

import argparse
import copy
import csv
import dataclasses
import hashlib
import json
import os
import sys
from pathlib import Path

import yaml

from . import analysis, corpus, generator, model as model_mod, scoring, tokenizer
from .errors import CdsgenError, ConfigError, DependencyError, SchemaError
from .treebank import UDSentence, UDToken, parse_conllu

DEFAULT_CONFIG: dict = {
    "master_seed": 0,
    "paths": {
        "raw_export": None,
        "export_format": "csv",
        "workdir": "work",
        "conllu": None,
        "conllu_map": None,
        "logprobs": None,
    },
    "tokenizer": {"target_size": 8000},
    "model": dataclasses.asdict(model_mod.ModelConfig()),
    "training": {"max_epochs": None, "verbose": False},
    "generation": {
        "ages": list(generator.DEFAULT_AGES),
        "runs_per_age": 2000,
        "top_k": 500,
        "temperature": 1.0,
        "max_tokens": 60,
        "seed_len_range": [1, 4],
    },
    "bootstrap": dataclasses.asdict(analysis.BootstrapSettings()),
    "report": {"svg": False},
}


def _deep_update(base: dict, overrides: dict) -> dict:
    out = dict(base)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_update(out[key], value)
        else:
            out[key] = value
    return out


def load_config(path: str | None, overrides: list[str], workdir: str | None, seed: int | None) -> dict:
    config = copy.deepcopy(DEFAULT_CONFIG)
    if path is not None:
        try:
            loaded = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except yaml.YAMLError as exc:
            raise ConfigError(f"invalid config file {path}: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError(f"config file {path} must contain a mapping")
        config = _deep_update(config, loaded)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override must look like section.key=value: {item!r}")
        dotted, raw = item.split("=", 1)
        value = yaml.safe_load(raw)
        node = config
        *parents, leaf = dotted.split(".")
        for part in parents:
            node = node.setdefault(part, {})
        node[leaf] = value
    if workdir is not None:
        config["paths"]["workdir"] = workdir
    if os.environ.get("CDSGEN_OUTDIR"):
        config["paths"]["workdir"] = os.environ["CDSGEN_OUTDIR"]
    if seed is not None:
        config["master_seed"] = seed
    return config


def config_hash(config: dict) -> str:
    return hashlib.sha256(json.dumps(config, sort_keys=True, default=str).encode()).hexdigest()


def file_checksum(path: Path) -> str:
    h = hashlib.sha256()
    with path.open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(stage_dir: Path, config: dict, inputs: dict[str, Path], extra: dict | None = None) -> None:
    manifest = {
        "config_hash": config_hash(config),
        "master_seed": config["master_seed"],
        "inputs": {name: file_checksum(p) for name, p in inputs.items()},
    }
    if extra:
        manifest.update(extra)
    (stage_dir / "manifest.json").write_text(json.dumps(manifest, indent=2), encoding="utf-8")


def _require(path: Path, what: str) -> Path:
    if not path.exists():
        raise DependencyError(f"missing upstream artifact: {what} ({path})")
    return path


class Paths:
    def __init__(self, workdir: str):
        self.workdir = Path(workdir)
        self.corpus_dir = self.workdir / "corpus"
        self.normalized = self.corpus_dir / "normalized.txt"
        self.index = self.corpus_dir / "normalized.index.json"
        self.vocab_dir = self.workdir / "vocab"
        self.vocab = self.vocab_dir / "vocab.txt"
        self.model_dir = self.workdir / "model"
        self.checkpoint = self.model_dir / "checkpoint.pt"
        self.gen_dir = self.workdir / "gen"
        self.parse_dir = self.workdir / "parses"
        self.grouped_parses = self.parse_dir / "grouped.json"
        self.analysis_dir = self.workdir / "analysis"
        self.report_dir = self.workdir / "report"


def cmd_prepare(config: dict) -> None:
    paths = Paths(config["paths"]["workdir"])
    raw = config["paths"]["raw_export"]
    if not raw:
        raise ConfigError("paths.raw_export must be set for prepare")
    raw_path = _require(Path(raw), "raw export")
    paths.corpus_dir.mkdir(parents=True, exist_ok=True)

    report = corpus.RejectionReport()
    records = corpus.load_records(raw_path, config["paths"]["export_format"], report=report)
    utterances = corpus.filter_and_normalize(records, report=report)
    bins = corpus.bin_by_age(utterances, report=report)
    corpus.write_normalized_corpus(bins, paths.normalized, paths.index)
    (paths.corpus_dir / "rejections.json").write_text(
        json.dumps(
            {
                "malformed_rows": report.malformed_rows,
                "empty_text": report.empty_text,
                "bad_role": report.bad_role,
                "missing_age": report.missing_age,
                "unintelligible": report.unintelligible,
                "no_words": report.no_words,
                "out_of_range_age": report.out_of_range_age,
            },
            indent=2,
        ),
        encoding="utf-8",
    )
    n_utts = sum(len(b.utterances) for b in bins)
    n_words = sum(len(u.words) for b in bins for u in b.utterances)
    write_manifest(
        paths.corpus_dir, config, {"raw_export": raw_path},
        {"utterances": n_utts, "word_tokens": n_words, "bins": [b.center_months for b in bins]},
    )
    print(f"prepare: {n_utts} utterances, {n_words} word tokens, {len(bins)} bins")


def _load_bins(paths: Paths) -> list[corpus.AgeBin]:
    _require(paths.normalized, "normalized corpus (run prepare)")
    _require(paths.index, "corpus index (run prepare)")
    return corpus.read_normalized_corpus(paths.normalized, paths.index)


def cmd_train_tokenizer(config: dict) -> None:
    paths = Paths(config["paths"]["workdir"])
    bins = _load_bins(paths)
    split = corpus.split_train_validation(bins)
    train_utts = [u for b in split.train_bins for u in b.utterances]
    vocab = tokenizer.train_vocab(train_utts, config["tokenizer"]["target_size"])
    paths.vocab_dir.mkdir(parents=True, exist_ok=True)
    vocab.save(paths.vocab)
    write_manifest(
        paths.vocab_dir, config, {"corpus": paths.normalized},
        {"vocab_size": len(vocab), "vocab_checksum": vocab.checksum()},
    )
    print(f"train-tokenizer: {len(vocab)} pieces")


def cmd_train(config: dict) -> None:
    import torch

    paths = Paths(config["paths"]["workdir"])
    bins = _load_bins(paths)
    _require(paths.vocab, "vocabulary (run train-tokenizer)")
    vocab = tokenizer.WordPieceVocab.load(paths.vocab)
    split = corpus.split_train_validation(bins)

    mconf = model_mod.ModelConfig(**{**config["model"], "vocab_size": len(vocab)})
    train_streams = tokenizer.encode_corpus_stream(split.train_bins, vocab)
    val_streams = tokenizer.encode_corpus_stream([split.validation_bin], vocab)
    train_samples = model_mod.make_samples(train_streams, mconf.seq_len)
    val_samples = model_mod.make_samples(val_streams, mconf.seq_len)
    if not train_samples or not val_samples:
        raise ConfigError(
            "not enough tokens to form training/validation windows; "
            "reduce model.seq_len or supply more data"
        )

    seed = config["master_seed"]
    torch.manual_seed(seed)
    model = model_mod.AgeConditionedLM(mconf)
    _, history = model_mod.train(
        model, train_samples, val_samples, seed=seed,
        max_epochs=config["training"]["max_epochs"],
        verbose=config["training"].get("verbose", False),
    )
    paths.model_dir.mkdir(parents=True, exist_ok=True)
    model_mod.save_checkpoint(model, paths.checkpoint, vocab_checksum=vocab.checksum())
    (paths.model_dir / "loss_history.json").write_text(json.dumps(history, indent=2), encoding="utf-8")
    write_manifest(
        paths.model_dir, config, {"corpus": paths.normalized, "vocab": paths.vocab},
        {"epochs": len(history), "best_validation_loss": min(h["validation_loss"] for h in history),
         "train_samples": len(train_samples), "validation_samples": len(val_samples)},
    )
    print(f"train: {len(history)} epochs, best val loss "
          f"{min(h['validation_loss'] for h in history):.4f}")


def cmd_generate(config: dict) -> None:
    paths = Paths(config["paths"]["workdir"])
    bins = _load_bins(paths)
    _require(paths.vocab, "vocabulary (run train-tokenizer)")
    _require(paths.checkpoint, "checkpoint (run train)")
    vocab = tokenizer.WordPieceVocab.load(paths.vocab)
    model, _ = model_mod.load_checkpoint(paths.checkpoint, expected_vocab_checksum=vocab.checksum())
    split = corpus.split_train_validation(bins)
    train_streams = tokenizer.encode_corpus_stream(split.train_bins, vocab)

    gconf = config["generation"]
    spec = generator.GenerationSpec(
        ages=tuple(float(a) for a in gconf["ages"]),
        runs_per_age=gconf["runs_per_age"],
        top_k=gconf["top_k"],
        temperature=gconf["temperature"],
        max_tokens=gconf["max_tokens"],
        seed_len_range=tuple(gconf["seed_len_range"]),
        rng_seed=config["master_seed"],
    )
    corpora = generator.generate_corpus(model, vocab, train_streams, spec)
    paths.gen_dir.mkdir(parents=True, exist_ok=True)
    for age, transcripts in corpora.items():
        out = paths.gen_dir / f"age_{age:g}.txt"
        with out.open("w", encoding="utf-8") as fh:
            for t in transcripts:
                for utt in t.utterances:
                    fh.write(utt.serialize() + "\n")
    counts = generator.word_counts(corpora)
    write_manifest(
        paths.gen_dir, config,
        {"corpus": paths.normalized, "checkpoint": paths.checkpoint, "vocab": paths.vocab},
        {"spec": dataclasses.asdict(spec), "word_counts": {f"{a:g}": c for a, c in counts.items()}},
    )
    print("generate: " + ", ".join(f"{a:g}mo={c}w" for a, c in sorted(counts.items())))


def cmd_ingest_parses(config: dict) -> None:
    paths = Paths(config["paths"]["workdir"])
    conllu = config["paths"]["conllu"]
    conllu_map = config["paths"]["conllu_map"]
    if not conllu or not conllu_map:
        raise ConfigError("paths.conllu and paths.conllu_map must be set for ingest-parses")
    conllu_path = _require(Path(conllu), "CoNLL-U file")
    map_path = _require(Path(conllu_map), "CoNLL-U group manifest")

    sentences = parse_conllu(conllu_path)
    mapping = json.loads(map_path.read_text(encoding="utf-8"))
    expected = sum(entry["count"] for entry in mapping)
    if expected != len(sentences):
        raise SchemaError(
            f"group manifest covers {expected} sentences but {conllu_path} has {len(sentences)}"
        )
    grouped = []
    pos = 0
    for entry in mapping:
        chunk = sentences[pos : pos + entry["count"]]
        pos += entry["count"]
        grouped.append(
            {
                "corpus_tag": entry["corpus_tag"],
                "age": float(entry["age"]),
                "sentences": [
                    [[t.form, t.lemma, t.upos, t.head, t.deprel] for t in s.tokens]
                    for s in chunk
                ],
            }
        )
    paths.parse_dir.mkdir(parents=True, exist_ok=True)
    paths.grouped_parses.write_text(json.dumps(grouped), encoding="utf-8")
    write_manifest(paths.parse_dir, config, {"conllu": conllu_path, "map": map_path},
                   {"groups": len(grouped), "sentences": len(sentences)})
    print(f"ingest-parses: {len(sentences)} sentences in {len(grouped)} groups")


def _load_grouped_parses(paths: Paths) -> dict[tuple[str, float], list[UDSentence]]:
    if not paths.grouped_parses.exists():
        return {}
    grouped = json.loads(paths.grouped_parses.read_text(encoding="utf-8"))
    out: dict[tuple[str, float], list[UDSentence]] = {}
    for entry in grouped:
        sents = [
            UDSentence(tokens=[
                UDToken(id=i + 1, form=f, lemma=l, upos=u, head=h, deprel=d)
                for i, (f, l, u, h, d) in enumerate(rows)
            ])
            for rows in entry["sentences"]
        ]
        out[(entry["corpus_tag"], float(entry["age"]))] = sents
    return out


def _load_generated(paths: Paths) -> dict[float, list[corpus.Utterance]]:
    out: dict[float, list[corpus.Utterance]] = {}
    if not paths.gen_dir.exists():
        return out
    for f in sorted(paths.gen_dir.glob("age_*.txt")):
        age = float(f.stem.split("_", 1)[1])
        utts = []
        for line in f.read_text(encoding="utf-8").splitlines():
            words = line.split()
            if words and words[-1] == ".":
                utts.append(corpus.Utterance(words=tuple(words[:-1]), source_age_months=age))
        out[age] = utts
    return out


def _load_logprob_records(config: dict) -> dict[tuple[str, float], list[dict]]:
    path = config["paths"].get("logprobs")
    if not path:
        return {}
    records = scoring.read_logprob_file(_require(Path(path), "log-prob file"))
    out: dict[tuple[str, float], list[dict]] = {}
    for rec in records:
        key = (rec.get("corpus_tag", "real"), float(rec.get("age", 0.0)))
        out.setdefault(key, []).append(rec)
    return out


def cmd_analyze(config: dict) -> None:
    paths = Paths(config["paths"]["workdir"])
    bins = _load_bins(paths)
    generated = _load_generated(paths)
    parses = _load_grouped_parses(paths)
    logprob_records = _load_logprob_records(config)

    scorer = None
    if paths.checkpoint.exists() and paths.vocab.exists():
        vocab = tokenizer.WordPieceVocab.load(paths.vocab)
        lm, _ = model_mod.load_checkpoint(paths.checkpoint, expected_vocab_checksum=vocab.checksum())

        def scorer(age, utts, _lm=lm, _vocab=vocab):
            return scoring.score_string(_lm, _vocab, age, utts)

    settings = analysis.BootstrapSettings(**config["bootstrap"])
    result = analysis.analyze(
        bins, generated=generated, parses=parses, scorer=scorer,
        logprob_records=logprob_records, settings=settings,
        master_seed=config["master_seed"],
    )

    paths.analysis_dir.mkdir(parents=True, exist_ok=True)
    with (paths.analysis_dir / "measures.tsv").open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, delimiter="\t")
        writer.writerow(["corpus_tag", "age", "measure", "subsample_id", "value"])
        for dist in result.measures:
            for i, value in enumerate(dist.values):
                writer.writerow([dist.corpus_tag, f"{dist.age:g}", dist.measure, i, repr(value)])
    with (paths.analysis_dir / "fits.tsv").open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, delimiter="\t")
        writer.writerow(["corpus_tag", "measure", "a", "b", "c", "rss"])
        for tag, measure, fit in result.fits:
            writer.writerow([tag, measure, repr(fit.a), repr(fit.b), repr(fit.c), repr(fit.rss)])
    with (paths.analysis_dir / "novelty.tsv").open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, delimiter="\t")
        writer.writerow(["corpus_tag", "length", "proportion", "sd", "n"])
        for tag, profile in sorted(result.novelty.items()):
            for length, prop, sd, n in zip(
                profile.lengths, profile.proportions, profile.sds, profile.counts
            ):
                writer.writerow([tag, length, repr(prop), repr(sd), n])
    inputs = {"corpus": paths.normalized}
    if paths.checkpoint.exists():
        inputs["checkpoint"] = paths.checkpoint
    write_manifest(paths.analysis_dir, config, inputs,
                   {"corpus_checksum": file_checksum(paths.normalized),
                    "n_measure_series": len({(d.corpus_tag, d.measure, d.age) for d in result.measures})})
    print(f"analyze: {len(result.measures)} measure series, {len(result.fits)} fits")


def _read_tsv(path: Path) -> list[dict]:
    with path.open(encoding="utf-8") as fh:
        return list(csv.DictReader(fh, delimiter="\t"))


def cmd_report(config: dict) -> None:
    from .metrics import summarize

    paths = Paths(config["paths"]["workdir"])
    measures_path = _require(paths.analysis_dir / "measures.tsv", "measures table (run analyze)")
    analysis_manifest = json.loads((paths.analysis_dir / "manifest.json").read_text(encoding="utf-8"))

    # Refuse to merge artifacts produced from different corpora.
    corpus_checksum = analysis_manifest.get("corpus_checksum")
    gen_manifest_path = paths.gen_dir / "manifest.json"
    if gen_manifest_path.exists() and corpus_checksum:
        gen_manifest = json.loads(gen_manifest_path.read_text(encoding="utf-8"))
        gen_corpus = gen_manifest.get("inputs", {}).get("corpus")
        if gen_corpus and gen_corpus != corpus_checksum:
            raise SchemaError("generation and analysis artifacts come from different corpora")

    rows = _read_tsv(measures_path)
    series: dict[tuple[str, str, float], list[float]] = {}
    for row in rows:
        key = (row["measure"], row["corpus_tag"], float(row["age"]))
        series.setdefault(key, []).append(float(row["value"]))

    fits = []
    if (paths.analysis_dir / "fits.tsv").exists():
        fits = _read_tsv(paths.analysis_dir / "fits.tsv")
    novelty = []
    if (paths.analysis_dir / "novelty.tsv").exists():
        novelty = _read_tsv(paths.analysis_dir / "novelty.tsv")

    measures_present = sorted({m for m, _, _ in series})
    report_json = {"measures": {}, "fits": fits, "novelty": novelty}
    lines = ["# Corpus comparison report", ""]
    for measure in measures_present:
        lines.append(f"## {measure}")
        lines.append("")
        lines.append("| corpus | age | n | mean | sd | min | q1 | median | q3 | max |")
        lines.append("|---|---|---|---|---|---|---|---|---|---|")
        for (m, tag, age), values in sorted(series.items(), key=lambda kv: (kv[0][0], kv[0][1], kv[0][2])):
            if m != measure:
                continue
            s = summarize(values)
            report_json["measures"].setdefault(measure, []).append(
                {"corpus_tag": tag, "age": age, **dataclasses.asdict(s)}
            )
            lines.append(
                f"| {tag} | {age:g} | {s.n} | {s.mean:.4f} | {s.sd:.4f} | {s.minimum:.4f} "
                f"| {s.q1:.4f} | {s.median:.4f} | {s.q3:.4f} | {s.maximum:.4f} |"
            )
        lines.append("")
    if fits:
        lines.append("## Quadratic age-trend fits")
        lines.append("")
        lines.append("| corpus | measure | a | b | c | rss |")
        lines.append("|---|---|---|---|---|---|")
        for row in fits:
            lines.append(
                f"| {row['corpus_tag']} | {row['measure']} | {float(row['a']):.6g} "
                f"| {float(row['b']):.6g} | {float(row['c']):.6g} | {float(row['rss']):.6g} |"
            )
        lines.append("")
    if novelty:
        lines.append("## Novelty by utterance length")
        lines.append("")
        lines.append("| corpus | length | proportion novel | sd | n |")
        lines.append("|---|---|---|---|---|")
        for row in novelty:
            lines.append(
                f"| {row['corpus_tag']} | {row['length']} | {float(row['proportion']):.4f} "
                f"| {float(row['sd']):.4f} | {row['n']} |"
            )
        lines.append("")
    if not series:
        lines.append("No measure series present.")

    paths.report_dir.mkdir(parents=True, exist_ok=True)
    (paths.report_dir / "report.md").write_text("\n".join(lines), encoding="utf-8")
    (paths.report_dir / "report.json").write_text(json.dumps(report_json, indent=2), encoding="utf-8")
    if config["report"].get("svg"):
        _write_svg_charts(paths, series)
    write_manifest(paths.report_dir, config, {"measures": measures_path},
                   {"measures_present": measures_present})
    print(f"report: {len(measures_present)} measures -> {paths.report_dir / 'report.md'}")


def _write_svg_charts(paths: Paths, series: dict[tuple[str, str, float], list[float]]) -> None:
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        print("matplotlib not available; skipping SVG charts", file=sys.stderr)
        return
    measures = sorted({m for m, _, _ in series})
    for measure in measures:
        fig, ax = plt.subplots(figsize=(6, 4))
        for tag, color in (("real", "tab:red"), ("generated", "tab:blue")):
            points = sorted(
                (age, sum(v) / len(v))
                for (m, t, age), v in series.items()
                if m == measure and t == tag and v
            )
            if points:
                ax.plot([p[0] for p in points], [p[1] for p in points], "o-", color=color, label=tag)
        ax.set_xlabel("age (months)")
        ax.set_ylabel(measure)
        ax.legend()
        fig.tight_layout()
        fig.savefig(paths.report_dir / f"{measure}.svg")
        plt.close(fig)


COMMANDS = {
    "prepare": cmd_prepare,
    "train-tokenizer": cmd_train_tokenizer,
    "train": cmd_train,
    "generate": cmd_generate,
    "ingest-parses": cmd_ingest_parses,
    "analyze": cmd_analyze,
    "report": cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="cdsgen",
        description="Train, sample, and evaluate an age-conditioned transcript language model.",
    )
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", help="YAML pipeline config")
    parser.add_argument("--workdir", help="override paths.workdir")
    parser.add_argument("--seed", type=int, help="override master_seed")
    parser.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="SECTION.KEY=VALUE", help="override a config value")
    args = parser.parse_args(argv)
    try:
        config = load_config(args.config, args.overrides, args.workdir, args.seed)
        COMMANDS[args.command](config)
    except CdsgenError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
