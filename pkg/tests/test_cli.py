import json

import pytest

from concierge.catalog import load_catalog
from concierge.cli import main


@pytest.fixture(scope="module")
def artifacts(tmp_path_factory):
    """A small end-to-end CLI run: fixture -> index -> train everything."""
    root = tmp_path_factory.mktemp("cli")
    catalog = root / "catalog.jsonl"
    datasets = root / "datasets"
    models = root / "models"
    models.mkdir()
    assert main([
        "fixture", "--seed", "3", "--cities", "10", "--hotels", "60",
        "--out", str(catalog), "--datasets", str(datasets),
        "--intent-messages", "400", "--ner-messages", "250", "--queries", "250",
    ]) == 0
    assert main(["index", "--catalog", str(catalog), "--out", str(models / "index.json")]) == 0
    assert main([
        "train-intent", "--data", str(datasets / "intent_train.jsonl"),
        "--out", str(models / "intent.npz"), "--feature-dim", str(2**14), "--epochs", "6",
    ]) == 0
    assert main([
        "train-ner", "--data", str(datasets / "ner_train.jsonl"),
        "--catalog", str(catalog), "--out", str(models / "tagger.json"),
    ]) == 0
    assert main([
        "train-ner", "--data", str(datasets / "ner_train.jsonl"), "--mode", "separate",
        "--catalog", str(catalog), "--out", str(models / "tagger_separate.json"),
    ]) == 0
    assert main([
        "train-ranker", "--data", str(datasets / "ir_train.jsonl"),
        "--catalog", str(catalog), "--index", str(models / "index.json"),
        "--out", str(models / "ranker.json"), "--epochs", "60",
    ]) == 0
    return root, catalog, datasets, models


class TestFixtureCommand:
    def test_catalog_loads(self, artifacts):
        _, catalog_path, datasets, _ = artifacts
        catalog = load_catalog(catalog_path)
        assert len(catalog) == 70
        for name in (
            "intent_train.jsonl", "intent_eval.jsonl", "ner_train.jsonl",
            "ner_eval.jsonl", "ir_train.jsonl", "ir_eval.jsonl",
        ):
            assert (datasets / name).exists()


class TestEvalCommand:
    def test_report_and_json(self, artifacts, capsys):
        root, catalog, datasets, models = artifacts
        code = main([
            "eval", "--catalog", str(catalog), "--models", str(models),
            "--intent-data", str(datasets / "intent_eval.jsonl"),
            "--ner-data", str(datasets / "ner_eval.jsonl"),
            "--ir-data", str(datasets / "ir_eval.jsonl"),
            "--json",
        ])
        out = capsys.readouterr().out
        assert code == 0
        assert "Intent classification" in out
        assert "unigram baseline" in out and "learned ranker" in out
        report = json.loads(out.strip().splitlines()[-1])
        assert set(report) >= {"intent", "ner", "ir"}
        assert report["ir"]["learned_top1"] >= report["ir"]["baseline_top1"]

    def test_nothing_to_do_is_usage_error(self, artifacts, capsys):
        root, catalog, _, models = artifacts
        assert main(["eval", "--catalog", str(catalog), "--models", str(models)]) == 1


class TestExitCodes:
    def test_bad_usage_is_1(self):
        assert main(["no-such-command"]) == 1
        assert main([]) == 1

    def test_missing_file_is_2(self, tmp_path):
        assert main(["index", "--catalog", str(tmp_path / "none.jsonl"), "--out", str(tmp_path / "i.json")]) == 2

    def test_malformed_data_is_2(self, tmp_path):
        bad = tmp_path / "bad.jsonl"
        bad.write_text("{broken\n")
        assert main(["index", "--catalog", str(bad), "--out", str(tmp_path / "i.json")]) == 2

    def test_help_is_0(self):
        assert main(["--help"]) == 0
