import json

import pytest

import popfrac


def test_split_and_normalize():
    assert popfrac.split_sentences("Are we safe") == ["Are we safe"]
    assert popfrac.split_sentences("One. Two?! Three") == ["One.", "Two?!", "Three"]
    assert popfrac.normalize_text("  The PEOPLE, united! ") == "the people united"


def test_metrics_spot_values():
    m = popfrac.classification_metrics(2, 1, 1, 2)
    assert m["mcc"] == pytest.approx(1 / 3, abs=1e-12)
    assert m["f1"] == pytest.approx(2 / 3, abs=1e-12)
    assert popfrac.auroc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]) == 0.75


def test_stump():
    s = popfrac.fit_stump([0.05, 0.10, 0.30, 0.40], [0, 0, 1, 1], deterministic=True)
    assert s["threshold"] == pytest.approx(0.2)
    with pytest.raises(popfrac.PopfracError):
        popfrac.fit_stump([0.1], [1])


def test_synth_pipeline_evaluate(tmp_path):
    name = popfrac.synth(tmp_path, preset="desk", seed=1)
    result = popfrac.run_pipeline(tmp_path / "corpus.jsonl", tmp_path / "training.csv", corpus_name=name, seed=1)
    assert result["leakage_violations"] == 0
    assert len(result["speeches"]) == 24
    again = popfrac.run_pipeline(tmp_path / "corpus.jsonl", tmp_path / "training.csv", corpus_name=name, seed=1,
                                 workers=2)
    assert json.dumps(result, sort_keys=True) == json.dumps(again, sort_keys=True)

    ev = popfrac.evaluate(result, seed=1)
    assert ev["kind"] == "evaluation"
    assert ev["speakers"]["accuracy"] == 1.0
    files = popfrac.render_report([ev])
    assert files[0][0] == "report.md"
    assert any(name.endswith(".svg") for name, _ in files)


def test_model_roundtrip_and_sparsity(tmp_path):
    popfrac.synth(tmp_path, preset="desk", seed=2)
    popfrac.fit_model(tmp_path / "training.csv", tmp_path / "model", seed=2)
    labels = popfrac.classify(tmp_path / "model", ["Some sentence here.", "Another one."])
    assert len(labels) == 2 and set(labels) <= {"populist", "pluralist", "neutral"}

    assert popfrac.DEFAULT_SPARSITY_COUNTS[0] == 1000
    art = popfrac.sparsity(tmp_path / "training.csv", counts=[20, 10], seed=3)
    assert [r["count"] for r in art["rows"]] == [20, 10]
    with pytest.raises(popfrac.PopfracError):
        popfrac.sparsity(tmp_path / "training.csv", counts=[5000])


def test_missing_file_is_reported(tmp_path):
    with pytest.raises(popfrac.PopfracError, match="not found"):
        popfrac.fit_model(tmp_path / "none.csv", tmp_path / "m")
