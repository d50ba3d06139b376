"""CLI workflows end to end through main()."""

import hashlib
import json
from pathlib import Path

import pytest

from troubleshooter.cli import main
from troubleshooter.corpus import export_jsonl
from troubleshooter.evaluation import GroundTruthSpec, generate_synthetic


@pytest.fixture(scope="module")
def corpus_file(tmp_path_factory) -> Path:
    spec = GroundTruthSpec(z_size=2, c_size=3, o_size=3, s_size=4, seed=41, n_environments=2)
    corpus, _ = generate_synthetic(spec, 100)
    path = tmp_path_factory.mktemp("data") / "records.jsonl"
    path.write_text(export_jsonl(corpus), encoding="utf-8")
    return path


@pytest.fixture(scope="module")
def trained_model(tmp_path_factory, corpus_file) -> Path:
    out = tmp_path_factory.mktemp("model") / "model.json"
    code = main(["train", "--data", str(corpus_file), "--out", str(out), "--seed", "5"])
    assert code == 0
    return out


def test_train_creates_artifact(trained_model):
    assert trained_model.exists()
    doc = json.loads(trained_model.read_text())
    assert doc["schema_version"] == 1


def test_train_prints_report_and_summary(tmp_path, corpus_file, capsys):
    out = tmp_path / "m.json"
    assert main(["train", "--data", str(corpus_file), "--out", str(out)]) == 0
    printed = capsys.readouterr().out
    assert "ingest report" in printed
    assert "valid: 100" in printed
    assert "domains:" in printed


def test_train_unreadable_path(tmp_path, capsys):
    missing = tmp_path / "nope.jsonl"
    code = main(["train", "--data", str(missing), "--out", str(tmp_path / "m.json")])
    assert code != 0
    err = capsys.readouterr().err
    assert "ingest" in err
    assert "nope.jsonl" in err


def test_train_deterministic_artifacts(tmp_path, corpus_file):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["train", "--data", str(corpus_file), "--out", str(a), "--seed", "9"]) == 0
    assert main(["train", "--data", str(corpus_file), "--out", str(b), "--seed", "9"]) == 0
    assert hashlib.sha256(a.read_bytes()).hexdigest() == hashlib.sha256(b.read_bytes()).hexdigest()


def test_diagnose_table_rows(trained_model, capsys):
    code = main(["diagnose", "obs1kw1 obs1kw2", "--model", str(trained_model), "--top-k", "3"])
    assert code == 0
    printed = capsys.readouterr().out
    assert "Potential Root Cause" in printed
    # header line + title + 3 entries
    rows = [line for line in printed.splitlines() if line.startswith("cause")]
    assert len(rows) == 3


def test_diagnose_json(trained_model, capsys):
    code = main(["diagnose", "obs1kw1 obs1kw2", "--model", str(trained_model),
                 "--top-k", "5", "--json"])
    assert code == 0
    body = json.loads(capsys.readouterr().out)
    assert body["variable"] == "cause"
    assert len(body["entries"]) == 3  # domain smaller than top-k
    probs = [e["probability"] for e in body["entries"]]
    assert probs == sorted(probs, reverse=True)


def test_diagnose_missing_model(tmp_path, capsys):
    code = main(["diagnose", "text", "--model", str(tmp_path / "missing.json")])
    assert code != 0
    assert "load model" in capsys.readouterr().err


def test_solve_table(trained_model, capsys):
    code = main(["solve", "obs1kw1 obs1kw2", "--model", str(trained_model), "--top-k", "4"])
    assert code == 0
    printed = capsys.readouterr().out
    assert "Potential Solution" in printed


def test_solve_with_retrieval_and_stub_advisory(trained_model, corpus_file, capsys):
    code = main([
        "solve", "obs1kw1 obs1kw2", "--model", str(trained_model),
        "--data", str(corpus_file), "--k-retrieve", "3", "--generate", "--json",
    ])
    assert code == 0
    body = json.loads(capsys.readouterr().out)
    assert len(body["exemplars"]) <= 3
    assert body["advisory"]["provenance"] == "stub"
    assert len(body["advisory"]["options"]) == len(body["exemplars"])


def test_solve_transport_unknown_env(trained_model, capsys):
    code = main(["solve", "obs1kw1 obs1kw2", "--model", str(trained_model),
                 "--target-env", "envX"])
    assert code != 0
    assert "envX" in capsys.readouterr().err


def test_solve_transport(trained_model, capsys):
    code = main(["solve", "obs1kw1 obs1kw2", "--model", str(trained_model),
                 "--target-env", "env1", "--json"])
    assert code == 0
    body = json.loads(capsys.readouterr().out)
    assert body["variable"] == "solution"


def test_recourse_consistency(trained_model, corpus_file, capsys):
    corpus_rows = [json.loads(line) for line in corpus_file.read_text().splitlines()]
    record = corpus_rows[0]
    code = main([
        "recourse", "--model", str(trained_model), "--data", str(corpus_file),
        "--record-id", record["record_id"], "--alt-text", record["observation"],
        "--seed", "3", "--json",
    ])
    assert code == 0
    body = json.loads(capsys.readouterr().out)
    assert body["entries"][0]["label"] == body["factual_solution"]
    assert body["entries"][0]["probability"] == 1.0


def test_recourse_unknown_record(trained_model, corpus_file, capsys):
    code = main([
        "recourse", "--model", str(trained_model), "--data", str(corpus_file),
        "--record-id", "no-such-id", "--alt-text", "brake",
    ])
    assert code != 0
    assert "no-such-id" in capsys.readouterr().err


def test_evaluate_reports_accuracy(trained_model, corpus_file, capsys):
    code = main(["evaluate", "--model", str(trained_model), "--data", str(corpus_file),
                 "--json"])
    assert code == 0
    body = json.loads(capsys.readouterr().out)
    assert "accuracy" in body
    assert body["n_test"] == 100
    assert body["averaging"] == "macro"


def test_evaluate_split_flag(trained_model, corpus_file, capsys):
    code = main(["evaluate", "--model", str(trained_model), "--data", str(corpus_file),
                 "--train-fraction", "0.8", "--seed", "2", "--json"])
    assert code == 0
    body = json.loads(capsys.readouterr().out)
    assert body["n_test"] < 100


def test_stopwords_override(tmp_path, corpus_file, capsys):
    stopfile = tmp_path / "stop.txt"
    stopfile.write_text("kw1\n# comment\n")
    out = tmp_path / "m.json"
    code = main(["train", "--data", str(corpus_file), "--out", str(out),
                 "--stopwords", str(stopfile)])
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["cleaner"]["stopwords"] == ["kw1"]
