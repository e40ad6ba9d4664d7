import json
import logging
from pathlib import Path

import pytest

from semshift import cli
from semshift.cli import EXIT_CONFIG, EXIT_MISSING, EXIT_OK, main

CONFIG = Path(__file__).resolve().parents[1] / "configs" / "synthetic.conf"


def args(out, *extra):
    return ["--config", str(CONFIG), "--paths.output", str(out), "--deterministic", "--seed", "7", *extra]


@pytest.fixture(scope="module")
def finished(tmp_path_factory):
    out = tmp_path_factory.mktemp("runs")
    assert main(["all", *args(out)]) == EXIT_OK
    return out / "synthetic"


def test_all_writes_complete_tree(finished):
    for rel in (
        "metrics/T1_T2.metrics.tsv",
        "metrics/T1_T2.baselines.tsv",
        "classify/T1_T2.classification.tsv",
        "drift/T1_T2.drift.csv",
        "align/T1_T2.alignment.txt",
        "models/T1.model.txt",
        "clusters/objects.tsv",
        "annotate/T1/annotation_pairs.tsv",
        "annotate/T1/annotation_key.tsv",
        "report/report.md",
        "report/projection.csv",
        "synth/ground_truth.tsv",
    ):
        assert (finished / rel).is_file(), rel
    labels = (finished / "classify/T1_T2.classification.tsv").read_text().splitlines()
    assert len(labels) == 1 + 6
    assert "## T1 to T2" in (finished / "report/report.md").read_text()
    head, *rows = (finished / "report/projection.csv").read_text().splitlines()
    assert head == "period,concept,term,x,y" and rows


def test_rerun_is_a_stamp_hit(finished, caplog):
    models = finished / "models" / "T1.model.txt"
    before = models.stat().st_mtime_ns
    with caplog.at_level(logging.INFO, logger="semshift"):
        assert main(["train", *args(finished.parent)]) == EXIT_OK
    assert "stamp hit: train" in caplog.text
    assert models.stat().st_mtime_ns == before


def test_changed_parameter_reruns_only_that_stage(finished, caplog):
    with caplog.at_level(logging.INFO, logger="semshift"):
        assert main(["classify", *args(finished.parent, "--patterns.high", "1.5")]) == EXIT_OK
    assert "running classify" in caplog.text
    stamp = json.loads((finished / ".stamps" / "classify.json").read_text())
    assert stamp["stage"] == "classify" and stamp["outputs"]
    # put the default thresholds back for the other tests
    assert main(["classify", *args(finished.parent)]) == EXIT_OK


def test_stale_output_is_rebuilt(finished, caplog):
    target = finished / "drift" / "T1_T2.drift.csv"
    original = target.read_bytes()
    target.write_text("tampered\n")
    with caplog.at_level(logging.INFO, logger="semshift"):
        assert main(["drift", *args(finished.parent)]) == EXIT_OK
    assert "running drift" in caplog.text
    assert target.read_bytes() == original


def test_metrics_before_train_is_missing_input(tmp_path, capsys):
    assert main(["metrics", *args(tmp_path)]) == EXIT_MISSING
    err = capsys.readouterr().err
    assert "missing upstream input" in err and "models" in err
    assert main(["train", *args(tmp_path)]) == EXIT_MISSING


@pytest.mark.parametrize(
    "argv",
    [
        ["train", "--embedding.dim", "lots"],
        ["train", "--no.such.key", "1"],
        ["train", "--embedding.dim"],
        ["sideways"],
        ["train", "--config", "/nonexistent.conf"],
        ["train", "--input.kind", "records"],
    ],
)
def test_config_errors_exit_3(argv, tmp_path):
    assert main(argv + ["--paths.output", str(tmp_path)]) == EXIT_CONFIG


def test_equals_form_overrides():
    _, overrides = cli.parse_args(["train", "--embedding.dim=20", "--workers", "3"])
    assert overrides == {"embedding.dim": "20", "run.workers": "3"}


def test_records_input_preprocess(tmp_path):
    lines = [
        json.dumps({"id": str(i), "body": f"The cats were running near http://x.org rivers {i}", "created_utc": ts})
        for i, ts in enumerate([1356998400, 1356998400, 1450000000, 1600000000])
    ]
    (tmp_path / "comments.jsonl").write_text("\n".join(lines) + "\n")
    conf = tmp_path / "run.conf"
    conf.write_text("paths.input = comments.jsonl\npaths.output = out\ncorpus.periods = T1:2012-2014, T2:2015-2019\n")
    assert main(["preprocess", "--config", str(conf)]) == EXIT_OK
    corpus = tmp_path / "out" / "default" / "corpus"
    summary = (corpus / "summary.tsv").read_text()
    assert "T1.documents\t2" in summary and "T2.documents\t1" in summary and "out_of_range\t1" in summary
    assert "http" not in (corpus / "T1.tokens.txt").read_text()
