"""Command-line surface: data generation, training, evaluation, reports.

Subcommands::

    gen-data        sample a grammar into an evaluation dataset + manifest
    preprocess      tokenized corpus dir -> train/valid/test + vocabulary
    train-ngram     fit a Kneser-Ney model on a token file
    train-lm        fit a neural model (single run or multi-seed sweep)
    eval            score a dataset under a saved model, one protocol
    generate-text   ancestral sampling from a saved model
    report          aggregate per-seed evaluation reports (mean, pop. std)

Exit codes: 0 success, 1 user error (bad flags, missing or malformed
input), 2 internal error.  Every report is written as a JSON/CSV pair
with identical content, carries no timestamps, and embeds digests of its
inputs, so rerunning a command over unchanged inputs reproduces its
output byte for byte.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import (
    apply_unk,
    build_vocab,
    load_vocab,
    read_corpus_dir,
    read_token_file,
    replacement_rate,
    save_vocab,
    split_corpus,
    split_manifest,
    write_token_file,
)
from .datasets import (
    DATASET_KINDS,
    file_hash,
    generate_dataset,
    grammar_hash,
    read_pair_file,
    read_six_tuple_file,
)
from .grammar import BUNDLED, bundled_grammar, load_grammar
from .lm import generate_text
from .ngram import NGramModel, train_ngram
from .neural.models import NeuralLM, NeuralLMConfig
from .neural.train import encode_stream, evaluate_stream, train_lm
from .qfeval import (
    HIERARCHICAL_RULE,
    LINEAR_RULE,
    breakdown_csv,
    evaluate_pairs,
    lexical_breakdown,
)
from .report import build_aggregate_report, collect_reports, write_report_pair
from .scoring import (
    evaluate_six_way,
    label_name,
    minimal_pair_accuracy,
    read_minimal_pairs,
)
from .transform import SIX_WAY_ORDER

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INTERNAL = 2

PROTOCOLS = ("six-way", "minimal-pair", "question-formation", "perplexity")

# Serialization tags of the two checkpoint formats, used to pick a loader.
_MODEL_TAGS = ((b"KNLM", NGramModel.from_file), (b"AXNN", NeuralLM.from_file))


class UsageError(Exception):
    """A problem the caller can fix; reported on stderr with exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def canonical_hash(obj) -> str:
    """sha256 of an object's canonical JSON form."""
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


# -- experiment configuration -------------------------------------------------


@dataclass
class ExperimentConfig:
    """One JSON document describing a multi-seed training sweep.

    ``corpus_dir`` points at a ``preprocess`` output directory
    (train.txt / valid.txt / vocab.tsv); each entry of ``models`` is a
    neural model configuration dict plus an optional ``name``; every model
    is trained once per entry of ``seeds``.  Command-line flags override
    the document's fields.
    """

    corpus_dir: str
    output_dir: str
    models: list
    seeds: list
    grammar_files: list = field(default_factory=list)
    evaluations: list = field(default_factory=list)
    metric: str = "perplexity"

    def validate(self) -> None:
        if len(set(self.seeds)) != len(self.seeds):
            raise UsageError(f"seeds must be distinct, got {self.seeds}")
        if not self.seeds:
            raise UsageError("at least one seed is required")
        if not self.models:
            raise UsageError("at least one model configuration is required")
        names = [self._model_name(m) for m in self.models]
        if len(set(names)) != len(names):
            raise UsageError(f"model names must be distinct, got {names}")
        if self.metric not in ("perplexity", "slor"):
            raise UsageError(f"unknown metric {self.metric!r}")
        for proto in self.evaluations:
            if proto not in PROTOCOLS:
                raise UsageError(f"unknown evaluation protocol {proto!r}")
        corpus = Path(self.corpus_dir)
        for name in ("train.txt", "valid.txt", "vocab.tsv"):
            if not (corpus / name).is_file():
                raise UsageError(f"missing corpus file: {corpus / name}")
        for path in self.grammar_files:
            if not Path(path).is_file():
                raise UsageError(f"missing grammar file: {path}")

    @staticmethod
    def _model_name(spec) -> str:
        return spec.get("name", spec.get("architecture", "model"))

    @property
    def config_hash(self) -> str:
        return canonical_hash(dataclasses.asdict(self))

    @classmethod
    def from_json(cls, path, overrides=None) -> "ExperimentConfig":
        blob = json.loads(Path(path).read_text(encoding="utf-8"))
        blob.update(overrides or {})
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(blob) - known)
        if unknown:
            raise UsageError(f"unknown experiment config keys: {unknown}")
        missing = sorted(
            {"corpus_dir", "output_dir", "models", "seeds"} - set(blob)
        )
        if missing:
            raise UsageError(f"experiment config lacks keys: {missing}")
        return cls(**blob)


def _model_config(blob) -> NeuralLMConfig:
    known = {f.name for f in dataclasses.fields(NeuralLMConfig)}
    unknown = sorted(set(blob) - known)
    if unknown:
        raise UsageError(f"unknown model config keys: {unknown}")
    if "architecture" not in blob:
        raise UsageError("model config needs an 'architecture'")
    try:
        return NeuralLMConfig(**blob)
    except ValueError as err:
        raise UsageError(f"bad model config: {err}") from err


# -- shared helpers -----------------------------------------------------------


def _resolve_grammar(label):
    """A bundled grammar name or a .cfg path -> (Grammar, source label)."""
    path = Path(label)
    if path.is_file():
        return load_grammar(path), str(label)
    if label in BUNDLED:
        return bundled_grammar(label), label
    raise UsageError(
        f"grammar {label!r} is neither a file nor one of {list(BUNDLED)}"
    )


def _load_model(path):
    path = Path(path)
    if not path.is_file():
        raise UsageError(f"model file not found: {path}")
    with open(path, "rb") as fh:
        magic = fh.read(4)
    for tag, loader in _MODEL_TAGS:
        if magic == tag:
            return loader(path)
    raise UsageError(f"unrecognized model file format: {path}")


def _require_file(path, what) -> Path:
    path = Path(path)
    if not path.is_file():
        raise UsageError(f"{what} not found: {path}")
    return path


def _flat_csv(metrics) -> str:
    from .report import flatten_metrics

    lines = ["metric,value"]
    for name, value in sorted(flatten_metrics(metrics).items()):
        lines.append(f"{name},{value:.6f}")
    return "\n".join(lines) + "\n"


def _write_eval_outputs(base, blob, csv_body) -> None:
    """BASE.json and BASE.csv; CSV opens with provenance comment lines."""
    base = Path(base)
    base.parent.mkdir(parents=True, exist_ok=True)
    Path(str(base) + ".json").write_text(
        json.dumps(blob, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    comments = []
    for key, value in sorted(blob.get("provenance", {}).items()):
        comments.append(f"# {key}: {value}")
    Path(str(base) + ".csv").write_text(
        "\n".join(comments) + ("\n" if comments else "") + csv_body,
        encoding="utf-8",
    )


# -- subcommands --------------------------------------------------------------


def cmd_gen_data(args) -> int:
    if args.count <= 0:
        raise UsageError("--count must be a positive integer")
    grammar, source = _resolve_grammar(args.grammar)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    manifest = generate_dataset(
        args.kind, grammar, args.seed, args.count, out, grammar_source=source
    )
    counts = manifest["counts"]
    print(
        f"wrote {counts['lines']} lines ({counts['items']} items) to {out}; "
        f"manifest at {out}.manifest.json"
    )
    return EXIT_OK


def cmd_preprocess(args) -> int:
    docs = read_corpus_dir(args.input)
    train, valid, test = split_corpus(docs, seed=args.seed)
    vocab = build_vocab(train, min_count=args.min_count)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    manifest = split_manifest(train, valid, test)
    manifest["vocab_size"] = len(vocab)
    manifest["min_count"] = args.min_count
    manifest["seed"] = args.seed
    manifest["replacement_rate"] = {}
    for name, part in (("train", train), ("valid", valid), ("test", test)):
        manifest["replacement_rate"][name] = replacement_rate(part, vocab)
        utterances = [
            apply_unk(utt, vocab) for doc in part for utt in doc.utterances
        ]
        write_token_file(out / f"{name}.txt", utterances)
    save_vocab(vocab, out / "vocab.tsv")
    (out / "split.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    print(
        f"split {len(docs)} documents into "
        f"{len(train)}/{len(valid)}/{len(test)} (train/valid/test); "
        f"vocabulary size {len(vocab)}"
    )
    return EXIT_OK


def cmd_train_ngram(args) -> int:
    if args.order < 1:
        raise UsageError("--order must be at least 1")
    train_utts = read_token_file(_require_file(args.train, "training file"))
    vocab = None
    if args.vocab:
        vocab = load_vocab(_require_file(args.vocab, "vocabulary file"))
        train_utts = [apply_unk(utt, vocab) for utt in train_utts]
    model = train_ngram(
        train_utts, args.order, vocab=vocab, variant=args.variant,
        keep_counts=False,
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    model.save(out)
    print(
        f"trained order-{args.order} {args.variant} Kneser-Ney model on "
        f"{len(train_utts)} utterances; saved to {out}"
    )
    if args.valid:
        valid_utts = read_token_file(_require_file(args.valid, "validation file"))
        if vocab is not None:
            valid_utts = [apply_unk(utt, vocab) for utt in valid_utts]
        ppl = model.perplexity(valid_utts, include_eos=True)
        blob = {
            "protocol": "perplexity",
            "model_id": out.stem,
            "seed": None,
            "metrics": {"perplexity": ppl, "n_utterances": len(valid_utts)},
            "provenance": {
                "flags_sha256": canonical_hash(
                    {"order": args.order, "variant": args.variant}
                ),
                "model_sha256": file_hash(out),
                "dataset_sha256": file_hash(args.valid),
            },
        }
        _write_eval_outputs(str(out) + ".valid", blob, _flat_csv(blob["metrics"]))
        print(f"validation perplexity {ppl:.4f}")
    return EXIT_OK


_MODEL_FLAGS = (
    "architecture", "layers", "hidden", "embedding", "heads", "context",
    "dropout", "lr", "batch_size", "bptt", "clip", "seed", "epochs",
    "anneal", "dtype",
)


def _flag_overrides(args) -> dict:
    return {
        name: getattr(args, name)
        for name in _MODEL_FLAGS
        if getattr(args, name) is not None
    }


def _train_one(config, vocab, train_stream, valid_stream, out, quiet=False):
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    log_path = Path(str(out) + ".log.csv")
    progress = None if quiet else (
        lambda row: print(
            f"  epoch {row['epoch']}: train ppl {row['train_ppl']:.2f}, "
            f"valid ppl {row['valid_ppl']:.2f}, lr {row['lr']:.3g}"
        )
    )
    model = train_lm(config, vocab, train_stream, valid_stream,
                     log_path=log_path, progress=progress)
    model.save(out)
    best = min(row["valid_ppl"] for row in model.log)
    print(f"saved {config.architecture} (seed {config.seed}) to {out}; "
          f"best valid ppl {best:.4f}")
    return model


def cmd_train_lm(args) -> int:
    file_blob = {}
    if args.config:
        file_blob = json.loads(
            _require_file(args.config, "config file").read_text(encoding="utf-8")
        )
    if "models" in file_blob:
        return _run_experiment(file_blob, args)

    merged = dict(file_blob)
    merged.update(_flag_overrides(args))
    if "architecture" not in merged:
        raise UsageError("an architecture is required (flag or config file)")
    for name in ("train", "valid", "vocab", "out"):
        if getattr(args, name) is None:
            raise UsageError(f"--{name} is required for a single training run")
    config = _model_config(merged)
    vocab = load_vocab(_require_file(args.vocab, "vocabulary file"))
    train_stream = encode_stream(
        read_token_file(_require_file(args.train, "training file")), vocab
    )
    valid_stream = encode_stream(
        read_token_file(_require_file(args.valid, "validation file")), vocab
    )
    _train_one(config, vocab, train_stream, valid_stream, args.out,
               quiet=args.quiet)
    return EXIT_OK


def _run_experiment(blob, args) -> int:
    overrides = {}
    if args.seeds:
        overrides["seeds"] = args.seeds
    config = ExperimentConfig.from_json(args.config, overrides)
    config.validate()
    flag_overrides = _flag_overrides(args)
    flag_overrides.pop("seed", None)

    corpus = Path(config.corpus_dir)
    vocab = load_vocab(corpus / "vocab.tsv")
    train_stream = encode_stream(read_token_file(corpus / "train.txt"), vocab)
    valid_stream = encode_stream(read_token_file(corpus / "valid.txt"), vocab)
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    print(
        f"experiment {config.config_hash[:12]}: "
        f"{len(config.models)} model(s) x {len(config.seeds)} seed(s)"
    )
    for spec in config.models:
        name = ExperimentConfig._model_name(spec)
        base = {k: v for k, v in spec.items() if k != "name"}
        base.update(flag_overrides)
        for seed in config.seeds:
            run = _model_config({**base, "seed": seed})
            _train_one(run, vocab, train_stream, valid_stream,
                       out_dir / f"{name}-seed{seed}.ckpt", quiet=args.quiet)
    return EXIT_OK


def cmd_eval(args) -> int:
    model_path = _require_file(args.model, "model file")
    dataset_path = _require_file(args.dataset, "dataset file")
    model = _load_model(model_path)
    model_id = args.model_id or model_path.stem
    seed = model.config.seed if isinstance(model, NeuralLM) else None

    unigram = None
    if args.metric == "slor":
        if not args.unigram_model:
            raise UsageError("--metric slor requires --unigram-model")
        unigram = _load_model(_require_file(args.unigram_model, "unigram model"))

    flags = {
        "protocol": args.protocol,
        "metric": args.metric,
        "free_running": bool(args.free_running),
        "model_id": model_id,
    }
    provenance = {
        "flags_sha256": canonical_hash(flags),
        "model_sha256": file_hash(model_path),
        "dataset_sha256": file_hash(dataset_path),
    }
    if args.unigram_model:
        provenance["unigram_model_sha256"] = file_hash(args.unigram_model)

    base = Path(args.out)
    extra_outputs = []

    if args.protocol == "six-way":
        items = read_six_tuple_file(dataset_path)
        result = evaluate_six_way(
            model, [six for _, six in items], metric=args.metric,
            unigram_model=unigram, model_id=model_id,
        )
        props = result.proportions
        metrics = {
            "proportions": {
                label_name(lb): props[lb] for lb in SIX_WAY_ORDER
            },
            "n_items": result.n_items,
            "n_ties": result.n_ties,
        }
        csv_body = result.to_csv()
    elif args.protocol == "minimal-pair":
        pairs, skipped = read_minimal_pairs(dataset_path)
        result = minimal_pair_accuracy(model, pairs, n_skipped=skipped)
        metrics = {
            "accuracy": result.accuracy,
            "n_items": result.n_items,
            "n_correct": result.n_correct,
            "n_ties": result.n_ties,
            "n_skipped": result.n_skipped,
        }
        csv_body = _flat_csv(metrics)
    elif args.protocol == "question-formation":
        if not args.grammar:
            raise UsageError(
                "--protocol question-formation requires --grammar to "
                "re-annotate the pair file"
            )
        grammar, _ = _resolve_grammar(args.grammar)
        provenance["grammar_sha256"] = grammar_hash(grammar)
        items = read_pair_file(dataset_path, grammar)
        result = evaluate_pairs(
            model, items, free_running=args.free_running, model_id=model_id
        )
        metrics = {
            "first_word_accuracy": result.first_word_accuracy,
            "full_question_accuracy": result.full_question_accuracy,
            "consistency": dict(result.consistency_proportions),
            "linear_rule_rate": result.rule_rate(LINEAR_RULE),
            "hierarchical_rule_rate": result.rule_rate(HIERARCHICAL_RULE),
            "n_items": result.n_items,
        }
        csv_body = _flat_csv(metrics)
        base.parent.mkdir(parents=True, exist_ok=True)
        result.dump_judgments(str(base) + ".judgments.jsonl")
        Path(str(base) + ".breakdown.csv").write_text(
            breakdown_csv(lexical_breakdown(result)), encoding="utf-8"
        )
        extra_outputs = [
            str(base) + ".judgments.jsonl", str(base) + ".breakdown.csv"
        ]
    else:
        utterances = read_token_file(dataset_path)
        if isinstance(model, NGramModel):
            ppl = model.perplexity(utterances, include_eos=True)
        else:
            ppl = evaluate_stream(model, encode_stream(utterances, model.vocab))
        metrics = {"perplexity": ppl, "n_utterances": len(utterances)}
        csv_body = _flat_csv(metrics)

    blob = {
        "protocol": args.protocol,
        "model_id": model_id,
        "seed": seed,
        "metric": args.metric,
        "metrics": metrics,
        "provenance": provenance,
    }
    _write_eval_outputs(base, blob, csv_body)
    outputs = [str(base) + ".json", str(base) + ".csv"] + extra_outputs
    print(f"evaluated {model_id} under {args.protocol}; wrote " + ", ".join(outputs))
    return EXIT_OK


def cmd_generate_text(args) -> int:
    if args.length < 1:
        raise UsageError("--length must be at least 1")
    if args.temperature < 0:
        raise UsageError("--temperature cannot be negative")
    model = _load_model(_require_file(args.model, "model file"))
    prefix = args.prefix.split()
    for tok in prefix:
        if tok not in model.vocab.token_to_id:
            raise UsageError(f"prefix token {tok!r} is not in the vocabulary")
    tokens = generate_text(
        model, prefix, seed=args.seed, length=args.length,
        temperature=args.temperature,
    )
    print(" ".join(prefix + tokens))
    return EXIT_OK


def cmd_report(args) -> int:
    reports = collect_reports(args.run_dir, protocol=args.protocol)
    expected = None
    if args.expect_seeds:
        try:
            expected = [int(s) for s in args.expect_seeds.split(",") if s]
        except ValueError:
            raise UsageError(
                f"--expect-seeds wants comma-separated integers, got "
                f"{args.expect_seeds!r}"
            )
    payload = build_aggregate_report(
        reports, expected_seeds=expected, allow_partial=args.allow_partial
    )
    flags = {
        "protocol": args.protocol,
        "expect_seeds": expected,
        "allow_partial": bool(args.allow_partial),
    }
    grammar_hashes = sorted(
        {
            blob["provenance"]["grammar_sha256"]
            for _, blob in reports
            if "grammar_sha256" in blob.get("provenance", {})
        }
    )
    provenance = {
        "flags_sha256": canonical_hash(flags),
        "inputs": {Path(p).name: file_hash(p) for p, _ in reports},
    }
    if grammar_hashes:
        provenance["grammar_sha256"] = grammar_hashes
    base = Path(args.out)
    base.parent.mkdir(parents=True, exist_ok=True)
    json_path, csv_path = write_report_pair(base, payload, provenance)
    print(
        f"aggregated {len(reports)} report(s) across "
        f"{len(payload['protocols'])} protocol(s); wrote {json_path}, {csv_path}"
    )
    return EXIT_OK


# -- parser -------------------------------------------------------------------


def _int_list(text) -> list:
    try:
        return [int(s) for s in text.split(",") if s]
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected comma-separated integers, got {text!r}"
        )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="auxinv",
        description="Grammar-based datasets, language models, and "
                    "question-formation evaluations.",
    )
    sub = parser.add_subparsers(dest="command", metavar="command")

    p = sub.add_parser("gen-data", help="sample a grammar into a dataset")
    p.add_argument("--grammar", required=True,
                   help=f"bundled grammar name {list(BUNDLED)} or a .cfg path")
    p.add_argument("--kind", required=True, choices=DATASET_KINDS)
    p.add_argument("--count", type=int, required=True,
                   help="number of base declaratives to keep")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("preprocess", help="split a corpus dir and build a vocabulary")
    p.add_argument("--input", required=True, help="directory of utterance files")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--min-count", type=int, default=3, dest="min_count")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("train-ngram", help="fit a Kneser-Ney n-gram model")
    p.add_argument("--train", required=True, help="token file")
    p.add_argument("--order", type=int, default=5)
    p.add_argument("--variant", choices=("modified", "plain"), default="modified")
    p.add_argument("--vocab", help="vocabulary TSV (closed corpus vocab if omitted)")
    p.add_argument("--valid", help="token file for a perplexity report")
    p.add_argument("--out", required=True, help="model output path")
    p.set_defaults(func=cmd_train_ngram)

    p = sub.add_parser("train-lm", help="train a neural model or a config sweep")
    p.add_argument("--config", help="JSON model config or experiment document")
    p.add_argument("--train", help="token file (single run)")
    p.add_argument("--valid", help="token file (single run)")
    p.add_argument("--vocab", help="vocabulary TSV (single run)")
    p.add_argument("--out", help="checkpoint path (single run)")
    p.add_argument("--seeds", type=_int_list,
                   help="override the experiment seed list, e.g. 0,1,2")
    p.add_argument("--quiet", action="store_true",
                   help="suppress per-epoch progress lines")
    p.add_argument("--architecture", choices=("lstm", "transformer"))
    p.add_argument("--layers", type=int)
    p.add_argument("--hidden", type=int)
    p.add_argument("--embedding", type=int)
    p.add_argument("--heads", type=int)
    p.add_argument("--context", type=int)
    p.add_argument("--dropout", type=float)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.add_argument("--bptt", type=int)
    p.add_argument("--clip", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--anneal", type=float)
    p.add_argument("--dtype", choices=("float64", "float32"))
    p.set_defaults(func=cmd_train_lm)

    p = sub.add_parser("eval", help="score a dataset under a saved model")
    p.add_argument("--model", required=True, help="model checkpoint")
    p.add_argument("--protocol", required=True, choices=PROTOCOLS)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True,
                   help="output base path; writes BASE.json and BASE.csv")
    p.add_argument("--metric", choices=("perplexity", "slor"),
                   default="perplexity")
    p.add_argument("--unigram-model", dest="unigram_model",
                   help="order-1 model for the slor baseline")
    p.add_argument("--grammar",
                   help="grammar for pair re-annotation (question-formation)")
    p.add_argument("--free-running", action="store_true", dest="free_running",
                   help="decode full questions greedily instead of "
                        "teacher forcing")
    p.add_argument("--model-id", dest="model_id",
                   help="label in reports (default: checkpoint stem)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("generate-text", help="sample text from a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--length", type=int, default=20)
    p.add_argument("--prefix", default="", help="space-joined prompt tokens")
    p.add_argument("--temperature", type=float, default=1.0)
    p.set_defaults(func=cmd_generate_text)

    p = sub.add_parser("report", help="aggregate evaluation reports across seeds")
    p.add_argument("--run-dir", required=True, dest="run_dir")
    p.add_argument("--out", required=True,
                   help="output base path; writes BASE.json and BASE.csv")
    p.add_argument("--protocol", choices=PROTOCOLS,
                   help="aggregate only this protocol")
    p.add_argument("--expect-seeds", dest="expect_seeds",
                   help="comma-separated seeds that must all be present")
    p.add_argument("--allow-partial", action="store_true", dest="allow_partial")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "func", None) is None:
            parser.print_usage(sys.stderr)
            return EXIT_USAGE
        return args.func(args)
    except SystemExit as exc:  # argparse --help
        return EXIT_OK if not exc.code else EXIT_USAGE
    except UsageError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except KeyboardInterrupt:
        print("interrupted", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as err:  # pragma: no cover - defensive
        print(f"internal error: {type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
