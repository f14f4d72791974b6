import csv
import json

import numpy as np
import pytest

from timecf.cli import RunConfig, main
from timecf.core import InputError
from timecf.ingest import SyntheticSpec, make_synthetic_bump, parse_ucr_file, stratified_split

FAST = {
    "dataset": {"synthetic": {"n_per_class": 8, "length": 24, "bump_interval": [8, 6]}},
    "rst": {"max_candidates": 40, "n_keep": 6},
    "timegan": {"hidden_dim": 4, "iters_embed": 5, "iters_supervised": 5, "iters_joint": 5, "batch_size": 8},
    "m_fakes": 8,
    "classifier_hyper": {"epochs": 3},
}


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps(FAST))
    return path


def run(config_file, out, command, *extra):
    return main([command, "--config", str(config_file), "--out", str(out), *extra])


def test_synth_default_writes_sixty_train_rows(tmp_path):
    out = tmp_path / "synth"
    assert main(["synth", "--out", str(out)]) == 0
    train = parse_ucr_file(out / "synthetic_TRAIN.tsv")
    test = parse_ucr_file(out / "synthetic_TEST.tsv")
    assert len(train) == 60 and len(test) == 20
    echo = json.loads((out / "synth_config.json").read_text())["config"]
    assert echo["dataset"]["synthetic"]["n_per_class"] == 40


def test_synth_roundtrip_and_determinism(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["synth", "--out", str(a), "--seed", "3"]) == 0
    assert main(["synth", "--out", str(b), "--seed", "3"]) == 0
    assert (a / "synthetic_TRAIN.tsv").read_bytes() == (b / "synthetic_TRAIN.tsv").read_bytes()
    train, _ = stratified_split(make_synthetic_bump(SyntheticSpec(seed=3)), 0.25, seed=3)
    parsed = parse_ucr_file(a / "synthetic_TRAIN.tsv")
    assert np.array_equal(parsed.X, train.X) and np.array_equal(parsed.y, train.y)


def test_explain_nun_success(tmp_path, config_file):
    out = tmp_path / "nun"
    assert run(config_file, out, "explain", "--method", "nun", "--instance", "2") == 0
    report = json.loads((out / "report.json").read_text())
    assert report["explained"] and report["method"] == "nun"
    assert report["config"]["instance"] == 2
    svg = (out / "plot.svg").read_text()
    assert svg.count("<polyline") == 2
    assert svg.count("<line") == 2


def test_explain_timecf_writes_both_files(tmp_path, config_file):
    out = tmp_path / "tcf"
    code = run(config_file, out, "explain", "--instance", "0")
    assert code in (0, 2)
    report = json.loads((out / "report.json").read_text())
    assert report["explained"] == (code == 0)
    assert report["config"]["timegan"]["iters_joint"] == 5
    assert (out / "plot.svg").exists()


def test_explain_constant_classifier_exits_2(tmp_path, config_file):
    out = tmp_path / "const"
    assert run(config_file, out, "explain", "--classifier", "constant") == 2
    report = json.loads((out / "report.json").read_text())
    assert report["explained"] is False
    assert report["counterfactuals"] == []
    assert (out / "plot.svg").read_text().count("<polyline") == 1


def test_bad_config_exits_1(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"dataset": {"synthetic": {}, "ucr": {}}}))
    assert main(["explain", "--config", str(bad), "--out", str(tmp_path / "x")]) == 1
    assert "error" in capsys.readouterr().err
    bad.write_text("{not json")
    assert main(["explain", "--config", str(bad)]) == 1


def test_unknown_flag_and_instance_out_of_range_exit_1(tmp_path, config_file):
    assert main(["explain", "--bogus"]) == 1
    assert run(config_file, tmp_path / "o", "explain", "--instance", "999") == 1


def test_flags_override_config(config_file):
    from timecf.cli import build_parser, resolve_config
    raw = json.loads(config_file.read_text())
    raw["seed"] = 5
    raw["timegan"]["seed"] = 11
    config_file.write_text(json.dumps(raw))
    args = build_parser().parse_args(["explain", "--config", str(config_file), "--seed", "7",
                                      "--classifier", "cnn"])
    cfg = resolve_config(args)
    assert cfg.seed == 7 and cfg.classifier == "cnn"
    assert cfg.timegan_config().seed == 7
    assert cfg.rst_config().seed == 7


def test_run_config_validation():
    with pytest.raises(InputError):
        RunConfig(dataset={})
    with pytest.raises(InputError):
        RunConfig(classifier="svm")
    with pytest.raises(InputError):
        RunConfig(timegan={"nope": 1})


def test_benchmark_outputs(tmp_path, config_file):
    out = tmp_path / "bench"
    assert run(config_file, out, "benchmark") == 0
    metrics = json.loads((out / "metrics.json").read_text())
    assert metrics["config"]["m_fakes"] == 8
    for name in ("closeness", "sensibility", "plausibility", "sparsity"):
        raw = (out / f"{name}.csv").read_bytes()
        assert b"\r\n" in raw
        rows = list(csv.reader(raw.decode().splitlines()))
        assert rows[0] == ["dataset", "classifier", "method", "value"]
        assert len(rows) - 1 == 1 * 2 * 2
        assert (out / f"{name}.png").read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
    assert "sensibility" in (out / "table.txt").read_text()
    first = (out / "metrics.json").read_bytes()
    assert run(config_file, out, "benchmark") == 0
    assert (out / "metrics.json").read_bytes() == first


def test_extract_shapelets_and_train_gan(tmp_path, config_file):
    out = tmp_path / "parts"
    assert run(config_file, out, "extract-shapelets") == 0
    shapelets = json.loads((out / "shapelets.json").read_text())["shapelets"]
    assert 1 <= len(shapelets) <= 6
    assert run(config_file, out, "train-gan", "--label", "1") == 0
    gan = json.loads((out / "gan.json").read_text())
    assert gan["excluded_label"] == 1
    assert len(gan["fakes"]) == 8 and len(gan["fakes"][0]) == 24
    from timecf.timegan import TimeGanModel
    assert TimeGanModel.load(out / "gan.tcf").seq_len == 24
