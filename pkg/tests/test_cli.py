import json

import numpy as np
import pytest

from factkit.cli import main
from factkit.dataio import read_facts, read_split, write_facts
from factkit.embeddings import EmbeddingMatrix, load_embeddings, save_embeddings
from factkit.taxonomy import DIMENSIONS, FactRecord, LabelSet

from embed_server import MockEmbedServer
from synth import synthetic_dataset

FAST_CONFIG = {
    "seeds": [42, 123],
    "train": {
        "learning_rate": 0.01,
        "batch_size": 32,
        "max_epochs": 10,
        "patience": 10,
        "hidden": None,
        "dropout": 0.1,
        "weight_decay": 0.0,
    },
    "baseline": {"epochs": 60, "lr": 2.0, "l2": 1e-4},
}


@pytest.fixture()
def workspace(tmp_path):
    facts, emb = synthetic_dataset(n_facts=200, invalid_count=60)
    facts_path = tmp_path / "facts.jsonl"
    write_facts(facts_path, facts)
    emb_path = tmp_path / "facts.emb"
    save_embeddings(emb_path, emb)
    config_path = tmp_path / "config.json"
    config_path.write_text(json.dumps(FAST_CONFIG))
    return tmp_path, facts_path, emb_path, config_path


def run(*argv):
    return main([str(a) for a in argv])


def test_unknown_subcommand_usage_error(capsys):
    with pytest.raises(SystemExit) as excinfo:
        run("frobnicate")
    assert excinfo.value.code == 2


def test_canon_writes_facts_and_exclusions(tmp_path):
    raw_path = tmp_path / "raw.jsonl"
    rows = [
        {
            "id": "r1",
            "text": "I love pizza.",
            "source": "MSC",
            "annotation": {
                "main_category": "Preferences",
                "time": "Present",
                "referent": "Self",
                "duration": ["Long-term"],
                "context_sufficient": "Yes",
                "broken": "No",
                "broken_reason": "None",
                "followup": "None",
            },
        },
        {
            "id": "r2",
            "text": "The weather is nice.",
            "source": "MSC",
            "annotation": {"broken": "Yes", "broken_reason": "No fact"},
        },
        {
            "id": "r3",
            "text": "I jog, long ago and now.",
            "source": "MSC",
            "annotation": {
                "main_category": "Routine activities",
                "time": "Present",
                "referent": "Self",
                "duration": ["Short-term", "Long-term"],
                "context_sufficient": "Yes",
                "broken": "No",
                "broken_reason": "None",
                "followup": "None",
            },
        },
    ]
    raw_path.write_text("".join(json.dumps(r) + "\n" for r in rows))
    out = tmp_path / "facts.jsonl"
    assert run("canon", "--raw", raw_path, "--out", out) == 0
    facts = read_facts(out)
    assert len(facts) == 3
    assert facts[0].labels.main_category == "Preferences"
    assert facts[1].labels.invalidity_reason == "No Fact"
    assert facts[2].excluded and facts[2].exclusion_reason == "dual-duration"
    exclusions = (tmp_path / "facts.jsonl.exclusions.jsonl").read_text().splitlines()
    assert json.loads(exclusions[0])["id"] == "r3"
    manifest = json.loads((tmp_path / "facts.jsonl.manifest.json").read_text())
    assert manifest["command"] == "canon"
    assert str(raw_path) in manifest["inputs"]


def test_canon_bad_enum_exit_code(tmp_path):
    raw_path = tmp_path / "raw.jsonl"
    raw_path.write_text(
        json.dumps(
            {"id": "r1", "text": "x", "annotation": {"main_category": "Sports"}}
        )
        + "\n"
    )
    code = run("canon", "--raw", raw_path, "--out", tmp_path / "facts.jsonl")
    assert code == 4


def test_split_command(workspace):
    tmp_path, facts_path, _, config_path = workspace
    out = tmp_path / "split.txt"
    assert run("--config", config_path, "split", "--facts", facts_path, "--out", out, "--seed", "42") == 0
    assignment, spec = read_split(out)
    assert spec.seed == 42
    total = len(assignment.train) + len(assignment.val) + len(assignment.test)
    assert total == 200
    assert abs(len(assignment.train) - 0.7 * total) <= 10  # strata rounding


def test_sample_command(workspace):
    tmp_path, facts_path, emb_path, config_path = workspace
    out = tmp_path / "sampled.jsonl"
    code = run(
        "sample",
        "--facts", facts_path,
        "--embeddings", emb_path,
        "--out", out,
        "--k", "10",
        "--cap", "3",
        "--seed", "1",
    )
    assert code == 0
    sampled = read_facts(out)
    assert 10 <= len(sampled) <= 30
    source_ids = {f.id for f in read_facts(facts_path)}
    assert all(f.id in source_ids for f in sampled)


def test_embed_fetch_command(workspace):
    tmp_path, facts_path, _, _ = workspace
    out = tmp_path / "fetched.emb"
    with MockEmbedServer(mode="hash", dim=5) as server:
        code = run(
            "embed-fetch",
            "--facts", facts_path,
            "--endpoint", server.url,
            "--out", out,
            "--batch-size", "16",
        )
    assert code == 0
    matrix = load_embeddings(out)
    assert matrix.dim == 5
    assert len(matrix) == 200
    assert matrix.row_ids[0] == "s0000"


def test_train_eval_predict_analyze_pipeline(workspace):
    tmp_path, facts_path, emb_path, config_path = workspace
    out_dir = tmp_path / "run"
    code = run(
        "--config", config_path,
        "train",
        "--facts", facts_path,
        "--embeddings", emb_path,
        "--out-dir", out_dir,
    )
    assert code == 0
    assert (out_dir / "model-seed42.ckpt").exists()
    assert (out_dir / "model-seed123.ckpt").exists()
    metrics_text = (out_dir / "metrics.txt").read_text()
    assert "overall_macro_f1.mean=" in metrics_text
    mean = float(
        [l for l in metrics_text.splitlines() if l.startswith("overall_macro_f1.mean=")][0]
        .split("=")[1]
    )
    assert mean > 0.9

    # eval one checkpoint on its split's test ids
    report_path = tmp_path / "eval.txt"
    code = run(
        "eval",
        "--model", out_dir / "model-seed42.ckpt",
        "--facts", facts_path,
        "--embeddings", emb_path,
        "--split", out_dir / "split-seed42.txt",
        "--out", report_path,
    )
    assert code == 0
    assert "overall_macro_f1.mean=" in report_path.read_text()

    # predict the corpus
    pred_path = tmp_path / "pred.jsonl"
    code = run(
        "predict",
        "--model", out_dir / "model-seed42.ckpt",
        "--embeddings", emb_path,
        "--out", pred_path,
    )
    assert code == 0
    lines = [json.loads(l) for l in pred_path.read_text().splitlines()]
    assert len(lines) == 200
    assert set(lines[0]["labels"]) == {d.value for d in DIMENSIONS}
    assert all(0.0 <= c <= 1.0 for c in lines[0]["confidence"].values())

    # analyze with both checkpoints and the leakage audit against train facts
    report = tmp_path / "distribution.txt"
    code = run(
        "analyze",
        "--models", out_dir / "model-seed42.ckpt", out_dir / "model-seed123.ckpt",
        "--corpus", facts_path,
        "--embeddings", emb_path,
        "--train-facts", facts_path,
        "--out", report,
    )
    assert code == 0
    text = report.read_text()
    assert "overlap_fraction=1.0000" in text
    assert "fully overlaps" in text


def test_train_rerun_is_byte_identical(workspace):
    tmp_path, facts_path, emb_path, config_path = workspace
    first = tmp_path / "runA"
    second = tmp_path / "runB"
    for out_dir in (first, second):
        code = run(
            "--config", config_path,
            "train",
            "--facts", facts_path,
            "--embeddings", emb_path,
            "--out-dir", out_dir,
            "--seeds", "42",
        )
        assert code == 0
    assert (first / "model-seed42.ckpt").read_bytes() == (
        second / "model-seed42.ckpt"
    ).read_bytes()
    assert (first / "metrics.txt").read_bytes() == (second / "metrics.txt").read_bytes()
    assert (first / "split-seed42.txt").read_bytes() == (
        second / "split-seed42.txt"
    ).read_bytes()


def test_train_with_inverse_frequency_weighting(workspace):
    tmp_path, facts_path, emb_path, _ = workspace
    config = json.loads(json.dumps(FAST_CONFIG))
    config["train"]["label_weighting"] = "inverse-frequency"
    config["seeds"] = [42]
    config_path = tmp_path / "weighted.json"
    config_path.write_text(json.dumps(config))
    out_dir = tmp_path / "weighted-run"
    code = run(
        "--config", config_path,
        "train",
        "--facts", facts_path,
        "--embeddings", emb_path,
        "--out-dir", out_dir,
    )
    assert code == 0
    from factkit.model import load_model

    model = load_model(out_dir / "model-seed42.ckpt")
    assert model.label_weights is not None
    # rare labels carry larger weights than frequent ones
    followup = list(model.category_names).index("followup")
    weights = model.label_weights[followup]
    assert weights[0] > weights[2]  # "Yes" rarer than "None"


def test_baseline_command(tmp_path):
    # token-signal texts the TF-IDF baseline can learn
    facts, _ = synthetic_dataset(n_facts=120, invalid_count=36)
    for fact in facts:
        tokens = [f"{d.value}_{fact.labels.get(d).replace(' ', '')}" for d in DIMENSIONS]
        fact.text = " ".join(tokens)
    facts_path = tmp_path / "facts.jsonl"
    write_facts(facts_path, facts)
    config_path = tmp_path / "config.json"
    config = dict(FAST_CONFIG)
    config["baseline"] = {"epochs": 80, "lr": 2.0, "l2": 1e-4}
    config_path.write_text(json.dumps(config))
    out_dir = tmp_path / "base"
    code = run(
        "--config", config_path,
        "baseline",
        "--facts", facts_path,
        "--out-dir", out_dir,
        "--seeds", "42", "123",
    )
    assert code == 0
    text = (out_dir / "baseline-metrics.txt").read_text()
    mean = float(
        [l for l in text.splitlines() if l.startswith("overall_macro_f1.mean=")][0].split("=")[1]
    )
    assert mean > 0.8


def test_agree_command(tmp_path):
    facts, _ = synthetic_dataset(n_facts=40, invalid_count=12)
    rater_a = tmp_path / "a.jsonl"
    write_facts(rater_a, facts)
    # second rater: copy with a few flipped validity labels
    flipped = []
    for i, fact in enumerate(facts):
        labels = fact.labels
        if i % 10 == 0:
            labels = LabelSet.invalid("Opinion") if labels.validity == "Valid" else labels
        flipped.append(
            FactRecord(id=fact.id, text=fact.text, labels=labels)
        )
    rater_b = tmp_path / "b.jsonl"
    write_facts(rater_b, flipped)
    out = tmp_path / "agreement.txt"
    code = run("agree", "--labels", rater_a, rater_b, "--out", out)
    assert code == 0
    text = out.read_text()
    assert "main_category" in text
    assert "average" in text
    assert "aligned units: 40" in text


def test_agree_needs_two_files(tmp_path):
    facts, _ = synthetic_dataset(n_facts=10, invalid_count=3)
    path = tmp_path / "a.jsonl"
    write_facts(path, facts)
    code = run("agree", "--labels", path, "--out", tmp_path / "x.txt")
    assert code == 3


def test_missing_embedding_file_exit_code(workspace):
    tmp_path, facts_path, _, _ = workspace
    bad = tmp_path / "bad.emb"
    bad.write_bytes(b"NOPE" + b"\x00" * 32)
    code = run(
        "sample",
        "--facts", facts_path,
        "--embeddings", bad,
        "--out", tmp_path / "s.jsonl",
    )
    assert code == 5


def test_config_error_exit_code(workspace, tmp_path):
    _, facts_path, _, _ = workspace
    bad_config = tmp_path / "bad.json"
    bad_config.write_text("{not json")
    code = run("--config", bad_config, "split", "--facts", facts_path, "--out", tmp_path / "s.txt")
    assert code == 3
