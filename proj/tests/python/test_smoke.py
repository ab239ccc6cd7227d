import json
import os
import pathlib

import pytest

import tweetsift

SOURCE = pathlib.Path(os.environ.get("TWEETSIFT_SOURCE_DIR", pathlib.Path(__file__).resolve().parents[2]))
FIXTURE = SOURCE / "fixtures" / "synthetic"


def test_f1_and_prf_agree():
    assert abs(tweetsift.f1_from(0.9513, 0.8998) - 0.9248) < 5e-5
    pred, gold = [1, 1, 0, 1], [1, 0, 0, 0]
    assert tweetsift.confusion(pred, gold) == {"tp": 1, "fp": 2, "fn": 0, "tn": 1}
    s = tweetsift.prf(pred, gold)
    assert s["precision"] == pytest.approx(1 / 3)
    assert s["f1"] == pytest.approx(0.5)


def test_hard_vote_counts_strict_majority():
    probs = [[0.9], [0.8], [0.7], [0.6], [0.2], [0.5]]
    assert tweetsift.aggregate(probs, "HARD_VOTE", 4) == [1]
    assert tweetsift.aggregate(probs, "HARD_VOTE", 5) == [0]


def test_pseudo_thresholds_are_strict():
    out = tweetsift.pseudo_labels([("a", 0.95), ("b", 0.9), ("c", 0.1), ("d", 0.02), ("e", 0.5)])
    assert out == [("a", 1), ("d", 0)]


def test_preprocess_and_tokenize():
    text = tweetsift.preprocess("Hello   WORLD", "P1")
    assert text == text.lower()
    assert tweetsift.tokenize("a b  c") == ["a", "b", "c"]
    with pytest.raises(tweetsift.UsageError):
        tweetsift.preprocess("x", "P9")


def test_exception_hierarchy():
    assert issubclass(tweetsift.LeakageError, tweetsift.DataError)
    assert issubclass(tweetsift.DataError, tweetsift.Error)
    with pytest.raises(tweetsift.DataError):
        tweetsift.prf([1], [1, 0])
    with pytest.raises(tweetsift.DataError):
        tweetsift.load_config(FIXTURE / "missing.json")


def test_cli_reports_usage_errors():
    code, _, err = tweetsift.cli(["frobnicate"])
    assert code == 1
    assert err


def test_small_pipeline_run(tmp_path):
    members = [
        {"name": "bag_v1", "epochs": 3, "dims": {"d": 8}},
        {"name": "bag_v2", "epochs": 3, "dims": {"d": 8}},
    ]
    overrides = {
        "output_dir": str(tmp_path / "out"),
        "members": members,
        "cv": {"k": 3},
        "aggregation": {"cutoff": 1},
    }
    cfg = tweetsift.load_config(FIXTURE / "config.json", overrides)
    assert [m["name"] for m in cfg["members"]] == ["bag_v1", "bag_v2"]

    r = tweetsift.run_pipeline(FIXTURE / "config.json", overrides)
    assert 0.0 <= r["final"]["f1"] <= 1.0
    assert r["manifest"]["pseudo"]["count"] == r["pseudo_count"]
    manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert manifest["files"] == r["manifest"]["files"]
    preds = (tmp_path / "out" / "predictions.tsv").read_text().splitlines()
    assert len(preds) - 1 == len(r["test_pred"])
