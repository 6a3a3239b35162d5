"""Acceptance gate: one test per release criterion, run with ``pytest -v``.

Each test prints a one-line verdict (visible under ``-s``) and enforces the
criterion with plain asserts, so the ``-v`` listing reads as a pass/fail
checklist.  The criteria, in order:

 1. golden strings for the six-way candidate builder and pair builder;
 2. generated sentences are recognized, and sampling support equals
    exhaustive enumeration on reduced-vocabulary grammars;
 3. the hierarchical and linear question rules disagree on token 0 exactly
    when the first and main auxiliaries differ in surface form;
 4. the interpolated Kneser-Ney model matches a brute-force oracle and
    normalizes per context;
 5. autodiff gradients match finite differences for both architectures, and
    logits are causal;
 6. both architectures train to the analytic entropy rate of a known
    Markov source and memorize a zero-entropy corpus;
 7. the scripted end-to-end pipeline (corpus, training, all four
    evaluation protocols, reports) completes with coherent metrics;
 8. non-gating diagnostic: an n-gram trained purely on main-auxiliary
    questions prefers them on held-out six-tuples;
 9. optional: 5-gram perplexity on a user-supplied child-directed corpus.

Criteria 1-6 are self-contained; 7 and 8 share one scripted pipeline run.
Criterion 9 is skipped unless a corpus directory is supplied (see README).
"""

import json
import math
import os
import random
import time
import warnings
from pathlib import Path

import numpy as np
import pytest

from auxinv import cli
from auxinv.corpus import EOS, read_token_file
from auxinv.datasets import read_six_tuple_file, sample_annotations
from auxinv.grammar import (
    BUNDLED,
    bundled_grammar,
    enumerate_language,
    generate,
    parse_grammar,
    recognize,
    restrict_lexicon,
)
from auxinv.neural import (
    NeuralLM,
    NeuralLMConfig,
    encode_stream,
    evaluate_stream,
    train_lm,
)
from auxinv.neural import tensor as T
from auxinv.ngram import NGramModel, closed_vocab, train_ngram
from auxinv.scoring import forced_choice_six
from auxinv.transform import (
    BARE,
    PROG,
    SIX_WAY_ORDER,
    annotate_tokens,
    build_six_tuple,
    hierarchical_question,
    linear_question,
    make_pair,
    selectional_filter,
)

from test_ngram import Oracle, _contexts_of, _random_corpus
from test_neural import VOCAB, finite_diff, rel_err, small_config
from test_transform import DOG_DECL, FIG_FIXTURE, SIX_GOLDEN, manual


def _verdict(num, name, ok, detail=""):
    badge = "PASS" if ok else "FAIL"
    print(f"[criterion {num}] {badge} {name}: {detail}")


# -- 1: golden strings ------------------------------------------------------


def test_criterion_01_golden_strings():
    t0 = time.perf_counter()
    dog = annotate_tokens(DOG_DECL, parse_grammar(FIG_FIXTURE))
    six = [c.text() for c in build_six_tuple(dog)]
    want = [s for _, _, s in SIX_GOLDEN]

    single = make_pair(manual("you can spell your name .", 1, 1, BARE, BARE))
    nested = make_pair(manual("a boy who is playing can try .", 3, 5, PROG, BARE))
    pair_ok = (
        single.text() == "you can spell your name . can you spell your name ?"
        and nested.text()
        == "a boy who is playing can try . can a boy who is playing try ?"
    )
    elapsed = time.perf_counter() - t0
    _verdict(1, "golden strings", six == want and pair_ok,
             f"6 candidates + 2 pairs byte-exact in {elapsed:.3f}s")
    assert six == want
    assert pair_ok
    assert elapsed < 1.0


# -- 2: grammar fidelity ----------------------------------------------------


def test_criterion_02_grammar_fidelity():
    t0 = time.perf_counter()
    sizes = {}
    for name in BUNDLED:
        g = bundled_grammar(name)
        sentences = generate(g, seed=7, count=10_000)
        assert len(sentences) == 10_000
        assert all(recognize(g, toks) > 0 for toks, _ in sentences), name

        reduced = restrict_lexicon(g, keep=1)
        language = enumerate_language(reduced, max_depth=30)
        support = {
            tuple(toks)
            for toks, _ in generate(
                reduced, seed=11, count=len(language), dedupe=True
            )
        }
        assert support == language, name
        sizes[name] = len(language)
    elapsed = time.perf_counter() - t0
    _verdict(2, "grammar fidelity", elapsed < 120,
             f"3x10000 sentences recognized; reduced languages {sizes} "
             f"match enumeration; {elapsed:.1f}s")
    assert elapsed < 120


# -- 3: rule disambiguation -------------------------------------------------


def test_criterion_03_rule_disambiguation():
    neq = bundled_grammar("first_neq_main")
    distinct, _ = sample_annotations(
        neq, seed=5, count=10_000,
        predicate=lambda a: a.first_aux != a.main_aux,
    )
    n_differ = sum(
        hierarchical_question(a)[0] != linear_question(a)[0] for a in distinct
    )

    eq = bundled_grammar("first_eq_main")
    same, _ = sample_annotations(eq, seed=5, count=10_000)
    n_identical = sum(
        hierarchical_question(a) == linear_question(a) for a in same
    )
    _verdict(3, "rule disambiguation",
             n_differ == 10_000 and n_identical == 10_000,
             f"token 0 differs on {n_differ}/10000 distinct-auxiliary items; "
             f"outputs identical on {n_identical}/10000 shared-auxiliary items")
    assert n_differ == 10_000
    assert n_identical == 10_000


# -- 4: Kneser-Ney oracle ---------------------------------------------------


@pytest.mark.filterwarnings("ignore::UserWarning")
def test_criterion_04_kneser_ney_oracle():
    worst = 0.0
    for seed in range(5):
        utterances = _random_corpus(seed)
        assert sum(len(u) for u in utterances) <= 200
        order = [1, 2, 3, 2, 3][seed]
        model = train_ngram(utterances, order)
        oracle = Oracle(utterances, order, len(model.vocab))
        for ctx in _contexts_of(utterances):
            for tok in model.vocab.id_to_token:
                got = math.exp(model.logprob(list(ctx), tok))
                worst = max(worst, abs(got - oracle.prob(list(ctx), tok)))
    assert worst < 1e-9

    # per-context normalization at desk scale
    g = bundled_grammar("prepose_delete")
    sentences = [toks for toks, _ in generate(g, seed=3, count=2_000)]
    model = train_ngram(sentences, order=5)
    rng = random.Random(0)
    worst_total = 0.0
    for _ in range(100):
        s = rng.choice(sentences)
        i = rng.randrange(len(s) + 1)
        ctx = s[max(0, i - 4):i]
        total = sum(
            math.exp(model.logprob(ctx, tok)) for tok in model.vocab.id_to_token
        )
        worst_total = max(worst_total, abs(total - 1.0))
    _verdict(4, "Kneser-Ney oracle", worst < 1e-9 and worst_total < 1e-9,
             f"max |model - oracle| {worst:.2e} over 5 toy corpora; "
             f"max |sum - 1| {worst_total:.2e} over 100 contexts")
    assert worst_total < 1e-9


# -- 5: gradients and causality ---------------------------------------------


def test_criterion_05_gradients_and_causality():
    worst = {}
    for arch in ("lstm", "transformer"):
        config = small_config(arch)
        assert config.hidden == 8 and config.layers == 2
        assert config.dtype == "float64"
        model = NeuralLM(config, VOCAB)
        rng = np.random.default_rng(0)
        for p in model.parameters():
            p.data[:] = rng.normal(0.0, 0.4, size=p.shape)
        ids = rng.integers(0, len(VOCAB), size=(2, 5))
        targets = rng.integers(0, len(VOCAB), size=10)

        def loss_value():
            logits, _ = model.forward(ids, train=False)
            flat = T.reshape(logits, (10, len(VOCAB)))
            loss, _ = T.softmax_cross_entropy(flat, targets)
            return float(loss.data)

        logits, _ = model.forward(ids, train=False)
        flat = T.reshape(logits, (10, len(VOCAB)))
        loss, _ = T.softmax_cross_entropy(flat, targets)
        model.zero_grad()
        loss.backward()
        worst[arch] = max(
            rel_err(model.params[name].grad, finite_diff(loss_value, model.params[name].data))
            for name in sorted(model.params)
        )
        assert worst[arch] < 1e-3, arch

        # causality: perturbing token t leaves all logits before t unchanged
        ids = rng.integers(0, len(VOCAB), size=(1, 9))
        base, _ = model.forward(ids, train=False)
        for t in range(1, 9):
            changed = ids.copy()
            changed[0, t] = (changed[0, t] + 1) % len(VOCAB)
            out, _ = model.forward(changed, train=False)
            assert np.array_equal(base.data[0, :t], out.data[0, :t]), (arch, t)
    _verdict(5, "gradients and causality", True,
             "max relative error "
             + ", ".join(f"{a} {e:.2e}" for a, e in worst.items())
             + "; past logits bit-identical under future perturbation")


# -- 6: trainability --------------------------------------------------------


def _markov_utterances(n_tokens, seed):
    """Sample the six-state circulant chain; state 5 closes an utterance.

    Every chain step emits exactly one stream symbol (a word for states
    0-4, the utterance end for state 5), so the encoded stream including
    end-of-sentence tokens is exactly a sample path of the chain.
    """
    rng = np.random.default_rng(seed)
    shifts = rng.choice((1, 2, 3), size=n_tokens + 256, p=(0.5, 0.3, 0.2))
    states = np.cumsum(shifts) % 6
    bounds = np.flatnonzero(states == 5)
    end = bounds[np.searchsorted(bounds, n_tokens - 1)]
    names = ("a", "b", "c", "d", "e")
    utterances, start = [], 0
    for b in bounds[bounds <= end]:
        utterances.append([names[s] for s in states[start:b]])
        start = b + 1
    return utterances, int(end) + 1


def test_criterion_06_trainability():
    t0 = time.perf_counter()
    P = np.zeros((6, 6))
    for i in range(6):
        P[i, (i + 1) % 6] = 0.5
        P[i, (i + 2) % 6] = 0.3
        P[i, (i + 3) % 6] = 0.2
    pi = np.linalg.matrix_power(P.T, 200)[:, 0]
    assert np.allclose(pi, 1.0 / 6.0)
    logs = np.where(P > 0, np.log(np.where(P > 0, P, 1.0)), 0.0)
    entropy = float(-(pi[:, None] * P * logs).sum())
    target = math.exp(entropy)

    train_utts, n_train = _markov_utterances(500_000, seed=0)
    valid_utts, _ = _markov_utterances(25_000, seed=1)
    assert n_train >= 500_000
    vocab = closed_vocab(["a", "b", "c", "d", "e", EOS])
    train_stream = encode_stream(train_utts, vocab)
    valid_stream = encode_stream(valid_utts, vocab)
    assert len(train_stream) == n_train

    reached = {}
    for arch in ("lstm", "transformer"):
        config = NeuralLMConfig(
            architecture=arch, layers=2, hidden=32, embedding=32, heads=2,
            context=64, dropout=0.0, epochs=5, seed=0, dtype="float64",
        )
        model = train_lm(config, vocab, train_stream, valid_stream)
        reached[arch] = evaluate_stream(model, valid_stream)
        assert 0.9 * target <= reached[arch] <= 1.1 * target, (arch, reached)

    zero_vocab = closed_vocab(["a", "b", "c", EOS])
    zero_train = encode_stream([["a", "b", "c"]] * 2000, zero_vocab)
    zero_valid = encode_stream([["a", "b", "c"]] * 400, zero_vocab)
    memorized = {}
    for arch in ("lstm", "transformer"):
        config = NeuralLMConfig(
            architecture=arch, layers=2, hidden=32, embedding=32, heads=2,
            context=64, dropout=0.0, batch_size=8, bptt=16, epochs=15,
            seed=0, dtype="float64",
        )
        model = train_lm(config, zero_vocab, zero_train, zero_valid)
        memorized[arch] = evaluate_stream(model, zero_valid)
        assert abs(memorized[arch] - 1.0) <= 0.01, (arch, memorized)

    elapsed = time.perf_counter() - t0
    _verdict(6, "trainability", elapsed < 900,
             f"Markov source perplexity target {target:.4f}, reached "
             + ", ".join(f"{a} {p:.4f}" for a, p in reached.items())
             + "; zero-entropy "
             + ", ".join(f"{a} {p:.4f}" for a, p in memorized.items())
             + f"; {elapsed:.0f}s")
    assert elapsed < 900


# -- 7 and 8: scripted pipeline ---------------------------------------------

MODEL_IDS = ("kn5", "lstm", "transformer")
DIAG_TRAIN_COUNT = 100_000
DIAG_ORDER = 7


def _run(argv):
    rc = cli.main(argv)
    assert rc == 0, argv
    return rc


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """Scripted run: corpus, preprocessing, three models, four evaluation
    protocols, per-model aggregate reports.  Shared by criteria 7 and 8."""
    root = tmp_path_factory.mktemp("pipeline")
    raw = root / "raw"
    raw.mkdir()

    grammar = bundled_grammar("prepose_delete")
    anns, _ = sample_annotations(
        grammar, seed=17, count=23_000, predicate=selectional_filter
    )
    lines = [" ".join(make_pair(a).concatenated) for a in anns]
    total_tokens = sum(len(l.split()) for l in lines)
    per_doc = len(lines) // 10
    for i in range(10):
        chunk = lines[i * per_doc:(i + 1) * per_doc] if i < 9 else lines[9 * per_doc:]
        (raw / f"doc{i:02d}.txt").write_text("\n".join(chunk) + "\n", encoding="utf-8")

    corpus = root / "corpus"
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        _run(["preprocess", "--input", str(raw), "--out", str(corpus),
              "--min-count", "2", "--seed", "0"])

        models = root / "models"
        models.mkdir()
        _run(["train-ngram", "--train", str(corpus / "train.txt"),
              "--order", "5", "--vocab", str(corpus / "vocab.tsv"),
              "--valid", str(corpus / "valid.txt"),
              "--out", str(models / "kn5.ckpt")])

        experiment = {
            "corpus_dir": str(corpus),
            "output_dir": str(models),
            "seeds": [0],
            "models": [
                {"name": "lstm", "architecture": "lstm", "layers": 2,
                 "hidden": 32, "embedding": 32, "epochs": 2},
                {"name": "transformer", "architecture": "transformer",
                 "layers": 2, "hidden": 32, "embedding": 32, "heads": 2,
                 "context": 64, "epochs": 2},
            ],
        }
        config_path = root / "experiment.json"
        config_path.write_text(json.dumps(experiment), encoding="utf-8")
        _run(["train-lm", "--config", str(config_path), "--quiet"])

        data = root / "data"
        data.mkdir()
        _run(["gen-data", "--grammar", "prepose_delete", "--kind", "six-tuple",
              "--count", "300", "--seed", "23", "--out", str(data / "six.tsv")])
        _run(["gen-data", "--grammar", "first_neq_main", "--kind", "move-one",
              "--count", "200", "--seed", "29", "--out", str(data / "move.tsv")])
        _run(["gen-data", "--grammar", "first_neq_main", "--kind", "pairs-neq",
              "--count", "300", "--seed", "31", "--out", str(data / "pairs_neq.txt")])
        _run(["gen-data", "--grammar", "first_eq_main", "--kind", "pairs-eq",
              "--count", "300", "--seed", "37", "--out", str(data / "pairs_eq.txt")])

        checkpoints = {
            "kn5": models / "kn5.ckpt",
            "lstm": models / "lstm-seed0.ckpt",
            "transformer": models / "transformer-seed0.ckpt",
        }
        # one run directory per (model, dataset suite): the aggregator
        # refuses two same-seed reports under one protocol in a directory
        reports = root / "reports"
        for mid, ckpt in checkpoints.items():
            out = reports / mid
            _run(["eval", "--model", str(ckpt), "--protocol", "six-way",
                  "--dataset", str(data / "six.tsv"), "--model-id", mid,
                  "--out", str(out / "six-way")])
            _run(["eval", "--model", str(ckpt), "--protocol", "minimal-pair",
                  "--dataset", str(data / "move.tsv"), "--model-id", mid,
                  "--out", str(out / "minimal-pair")])
            _run(["eval", "--model", str(ckpt), "--protocol", "question-formation",
                  "--dataset", str(data / "pairs_neq.txt"),
                  "--grammar", "first_neq_main", "--model-id", mid,
                  "--out", str(out / "question-formation")])
            _run(["eval", "--model", str(ckpt), "--protocol", "perplexity",
                  "--dataset", str(corpus / "test.txt"), "--model-id", mid,
                  "--out", str(out / "perplexity")])
            _run(["eval", "--model", str(ckpt), "--protocol", "question-formation",
                  "--dataset", str(data / "pairs_eq.txt"),
                  "--grammar", "first_eq_main", "--model-id", mid,
                  "--out", str(reports / f"{mid}-eq" / "question-formation")])

        aggregates = root / "aggregates"
        aggregates.mkdir()
        for mid in MODEL_IDS:
            _run(["report", "--run-dir", str(reports / mid),
                  "--out", str(aggregates / mid)])

    return {
        "root": root,
        "corpus": corpus,
        "reports": reports,
        "aggregates": aggregates,
        "six_path": data / "six.tsv",
        "total_tokens": total_tokens,
    }


def _report(pipeline, run, stem):
    path = pipeline["reports"] / run / f"{stem}.json"
    return json.loads(path.read_text(encoding="utf-8"))


@pytest.mark.filterwarnings("ignore::UserWarning")
def test_criterion_07_end_to_end_pipeline(pipeline):
    assert pipeline["total_tokens"] >= 500_000

    worst_sum = 0.0
    for mid in MODEL_IDS:
        metrics = _report(pipeline, mid, "six-way")["metrics"]
        assert len(metrics["proportions"]) == 6
        worst_sum = max(worst_sum, abs(sum(metrics["proportions"].values()) - 1.0))
    assert worst_sum <= 1e-9

    for run in [m for mid in MODEL_IDS for m in (mid, f"{mid}-eq")]:
        metrics = _report(pipeline, run, "question-formation")["metrics"]
        assert metrics["first_word_accuracy"] >= metrics["full_question_accuracy"], run

    eq_rates = {}
    for mid in MODEL_IDS:
        metrics = _report(pipeline, f"{mid}-eq", "question-formation")["metrics"]
        eq_rates[mid] = (metrics["linear_rule_rate"], metrics["hierarchical_rule_rate"])
        assert metrics["linear_rule_rate"] == metrics["hierarchical_rule_rate"], mid

    for mid in MODEL_IDS:
        blob = json.loads(
            (pipeline["aggregates"] / f"{mid}.json").read_text(encoding="utf-8")
        )
        assert blob["aggregated"] is True
        assert set(blob["protocols"]) == {
            "six-way", "minimal-pair", "question-formation", "perplexity"
        }

    _verdict(7, "end-to-end pipeline", True,
             f"{pipeline['total_tokens']} tokens; 3 models x 4 protocols; "
             f"max |proportions - 1| {worst_sum:.1e}; shared-auxiliary rule "
             "rates equal: "
             + ", ".join(f"{m} {a:.4f}" for m, (a, _) in eq_rates.items()))


@pytest.mark.filterwarnings("ignore::UserWarning")
def test_criterion_08_hierarchical_preference_diagnostic(pipeline):
    grammar = bundled_grammar("prepose_delete")
    anns, _ = sample_annotations(
        grammar, seed=11, count=DIAG_TRAIN_COUNT, predicate=selectional_filter
    )
    questions = [list(build_six_tuple(a)[4].tokens) for a in anns]
    seen = {" ".join(a.tokens) for a in anns}
    model = train_ngram(questions, order=DIAG_ORDER)

    target = SIX_WAY_ORDER[4]
    held = [
        six for decl, six in read_six_tuple_file(pipeline["six_path"])
        if " ".join(decl) not in seen
    ]
    assert len(held) >= 200
    hits = sum(forced_choice_six(model, six)[0] == target for six in held)
    rate = hits / len(held)

    ok = rate > 0.90
    _verdict(8, "hierarchical preference diagnostic (non-gating)", ok,
             f"main-auxiliary questions selected on {rate:.4f} of "
             f"{len(held)} held-out six-tuples "
             f"(trained on {DIAG_TRAIN_COUNT} questions, order {DIAG_ORDER})")
    if not ok:
        warnings.warn(
            "diagnostic preference rate "
            f"{rate:.4f} did not exceed 0.90; the check is reported but "
            "not enforced", stacklevel=1,
        )


# -- 9: optional full-corpus check ------------------------------------------


def test_criterion_09_full_corpus_perplexity(tmp_path):
    default = Path(__file__).resolve().parent.parent / "data" / "childes"
    root = Path(os.environ.get("AUXINV_CHILDES_DIR", default))
    if not root.is_dir():
        pytest.skip(
            "optional check: supply a corpus directory at data/childes or "
            "$AUXINV_CHILDES_DIR"
        )
    corpus = tmp_path / "corpus"
    _run(["preprocess", "--input", str(root), "--out", str(corpus), "--seed", "0"])
    out = tmp_path / "kn5.ckpt"
    _run(["train-ngram", "--train", str(corpus / "train.txt"),
          "--order", "5", "--vocab", str(corpus / "vocab.tsv"),
          "--out", str(out)])
    model = NGramModel.from_file(out)
    test_utts = read_token_file(corpus / "test.txt")
    ppl = model.perplexity(test_utts, include_eos=True)
    _verdict(9, "full-corpus 5-gram perplexity", 20.0 <= ppl <= 30.0,
             f"test perplexity {ppl:.2f}")
    assert 20.0 <= ppl <= 30.0
