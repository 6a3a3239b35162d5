"""Walkthrough: the full pipeline, miniature scale, driven via the CLI.

Generates a small corpus of declarative+question pair lines, preprocesses
it, trains a 5-gram and a small LSTM, evaluates both under all four
protocols, and aggregates the reports — the same command sequence a real
experiment uses, shrunk to run in about a minute. Outputs land in
``demo_run/`` next to this script.
"""

import json
import shutil
import warnings
from pathlib import Path

from auxinv import cli
from auxinv.datasets import sample_annotations
from auxinv.grammar import bundled_grammar
from auxinv.transform import make_pair, selectional_filter

ROOT = Path(__file__).resolve().parent / "demo_run"


def run(*argv):
    print("  $ auxinv " + " ".join(argv))
    rc = cli.main(list(argv))
    if rc != 0:
        raise SystemExit(f"command failed with exit code {rc}")


def main():
    if ROOT.exists():
        shutil.rmtree(ROOT)
    raw = ROOT / "raw"
    raw.mkdir(parents=True)

    print("writing raw corpus...")
    g = bundled_grammar("prepose_delete")
    anns, _ = sample_annotations(g, seed=3, count=3_000,
                                 predicate=selectional_filter)
    lines = [make_pair(a).text() for a in anns]
    for i in range(3):
        (raw / f"doc{i}.txt").write_text(
            "\n".join(lines[i::3]) + "\n", encoding="utf-8")
    print(f"  {len(lines)} pair lines, "
          f"{sum(len(l.split()) for l in lines)} tokens")

    corpus = ROOT / "corpus"
    models = ROOT / "models"
    data = ROOT / "data"
    reports = ROOT / "reports"
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        run("preprocess", "--input", str(raw), "--out", str(corpus),
            "--min-count", "1", "--seed", "0")
        run("train-ngram", "--train", str(corpus / "train.txt"),
            "--order", "5", "--vocab", str(corpus / "vocab.tsv"),
            "--out", str(models / "kn5.ckpt"))
        run("train-lm", "--train", str(corpus / "train.txt"),
            "--valid", str(corpus / "valid.txt"),
            "--vocab", str(corpus / "vocab.tsv"),
            "--architecture", "lstm", "--hidden", "32", "--embedding", "32",
            "--epochs", "2", "--quiet",
            "--out", str(models / "lstm.ckpt"))
        run("gen-data", "--grammar", "prepose_delete", "--kind", "six-tuple",
            "--count", "100", "--seed", "9", "--out", str(data / "six.tsv"))
        run("gen-data", "--grammar", "first_neq_main", "--kind", "move-one",
            "--count", "80", "--seed", "9", "--out", str(data / "move.tsv"))
        run("gen-data", "--grammar", "first_neq_main", "--kind", "pairs-neq",
            "--count", "100", "--seed", "9", "--out", str(data / "pairs.txt"))
        for mid in ("kn5", "lstm"):
            out = reports / mid
            ckpt = models / f"{mid}.ckpt"
            run("eval", "--model", str(ckpt), "--protocol", "six-way",
                "--dataset", str(data / "six.tsv"), "--model-id", mid,
                "--out", str(out / "six-way"))
            run("eval", "--model", str(ckpt), "--protocol", "minimal-pair",
                "--dataset", str(data / "move.tsv"), "--model-id", mid,
                "--out", str(out / "minimal-pair"))
            run("eval", "--model", str(ckpt), "--protocol", "question-formation",
                "--dataset", str(data / "pairs.txt"),
                "--grammar", "first_neq_main", "--model-id", mid,
                "--out", str(out / "question-formation"))
            run("eval", "--model", str(ckpt), "--protocol", "perplexity",
                "--dataset", str(corpus / "test.txt"), "--model-id", mid,
                "--out", str(out / "perplexity"))
            run("report", "--run-dir", str(out),
                "--out", str(ROOT / f"aggregate-{mid}"))

    print("\nheadline metrics:")
    for mid in ("kn5", "lstm"):
        ppl = json.loads((reports / mid / "perplexity.json").read_text())
        qf = json.loads((reports / mid / "question-formation.json").read_text())
        print(f"  {mid}: test perplexity "
              f"{ppl['metrics']['perplexity']:.2f}; first-word accuracy "
              f"{qf['metrics']['first_word_accuracy']:.3f}; rule rates "
              f"linear {qf['metrics']['linear_rule_rate']:.3f} / "
              f"hierarchical {qf['metrics']['hierarchical_rule_rate']:.3f}")
    print(f"\nartifacts under {ROOT}")


if __name__ == "__main__":
    main()
