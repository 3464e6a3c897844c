"""Command-line surface: subcommand wiring, exit codes, artifact determinism,
and the help/docs consistency check."""

import json
import os
from pathlib import Path

import pytest

from flowlens.cli import build_parser, main
from flowlens.dataset import read_feature_csv, read_labeled_csv

REPO_ROOT = Path(__file__).resolve().parents[1]


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """One small synth -> extract -> label -> train run shared by the tests."""
    root = tmp_path_factory.mktemp("cli")
    assert main(["synth", "--out-dir", str(root), "--seed", "11",
                 "--benign-http", "12", "--benign-dns", "6",
                 "--flood-flows", "10", "--dos-flows", "4"]) == 0
    pcap = root / "synth.pcap"
    events = root / "ground_truth.csv"
    features = {}
    labeled = {}
    for schema in ("netflow_v2", "cic"):
        features[schema] = root / f"features_{schema}.csv"
        assert main(["extract", "--pcap", str(pcap), "--schema", schema,
                     "--out", str(features[schema]), "--seed", "11"]) == 0
        labeled[schema] = root / f"labeled_{schema}.csv"
        assert main(["label", "--features", str(features[schema]),
                     "--events", str(events), "--out", str(labeled[schema]),
                     "--seed", "11"]) == 0
    model = root / "model_rf.json"
    assert main(["train", "--data", str(labeled["netflow_v2"]), "--model", "rf",
                 "--out", str(model), "--seed", "11", "--trees", "10",
                 "--max-depth", "6"]) == 0
    return {"root": root, "pcap": pcap, "events": events, "features": features,
            "labeled": labeled, "model": model}


def test_extract_same_flows_under_both_schemas(pipeline):
    nf, _ = read_feature_csv(pipeline["features"]["netflow_v2"])
    cic, _ = read_feature_csv(pipeline["features"]["cic"])
    assert len(nf.rows) == len(cic.rows) > 0
    assert nf.schema.column_names != cic.schema.column_names


def test_empty_pcap_gives_header_only_csv(tmp_path):
    import struct

    empty = tmp_path / "empty.pcap"
    empty.write_bytes(struct.pack("<IHHiIII", 0xA1B2C3D4, 2, 4, 0, 0, 65535, 1))
    out = tmp_path / "empty.csv"
    assert main(["extract", "--pcap", str(empty), "--schema", "cic",
                 "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("#")
    assert len(lines) == 2  # provenance + header only


def test_unreadable_pcap_exits_2(tmp_path):
    assert main(["extract", "--pcap", str(tmp_path / "missing.pcap"),
                 "--schema", "cic", "--out", str(tmp_path / "x.csv")]) == 2
    bad = tmp_path / "bad.pcap"
    bad.write_bytes(b"not a capture at all....")
    assert main(["extract", "--pcap", str(bad), "--schema", "cic",
                 "--out", str(tmp_path / "x.csv")]) == 2


def test_eval_missing_model_path_exits_2(pipeline, tmp_path):
    assert main(["eval", "--data", str(pipeline["labeled"]["netflow_v2"]),
                 "--model-file", str(tmp_path / "nope.json"),
                 "--out-dir", str(tmp_path)]) == 2


def test_eval_without_model_arguments_exits_2(pipeline, tmp_path):
    assert main(["eval", "--data", str(pipeline["labeled"]["netflow_v2"]),
                 "--out-dir", str(tmp_path)]) == 2


def test_fingerprint_mismatch_exits_3(pipeline, tmp_path):
    # model trained on the netflow schema, data labeled under the cic schema
    assert main(["explain", "--data", str(pipeline["labeled"]["cic"]),
                 "--model-file", str(pipeline["model"]),
                 "--out-dir", str(tmp_path)]) == 3
    assert main(["eval", "--data", str(pipeline["labeled"]["cic"]),
                 "--model-file", str(pipeline["model"]),
                 "--out-dir", str(tmp_path)]) == 3


def test_saved_model_eval_runs(pipeline, tmp_path):
    assert main(["eval", "--data", str(pipeline["labeled"]["netflow_v2"]),
                 "--model-file", str(pipeline["model"]),
                 "--out-dir", str(tmp_path), "--timing-rows", "16",
                 "--timing-repeats", "1", "--seed", "11"]) == 0
    report = next(tmp_path.glob("*_saved_report.csv"))
    assert "rf" in report.name


def test_rerun_artifacts_byte_identical(pipeline, tmp_path):
    out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
    for out in (out1, out2):
        assert main(["extract", "--pcap", str(pipeline["pcap"]), "--schema",
                     "netflow_v2", "--out", str(out), "--seed", "11"]) == 0
    assert out1.read_bytes() == out2.read_bytes()

    # labeling and training are deterministic too
    lab1, lab2 = tmp_path / "l1.csv", tmp_path / "l2.csv"
    for lab in (lab1, lab2):
        assert main(["label", "--features", str(out1), "--events",
                     str(pipeline["events"]), "--out", str(lab), "--seed", "11"]) == 0
    assert lab1.read_bytes() == lab2.read_bytes()

    m1, m2 = tmp_path / "m1.json", tmp_path / "m2.json"
    for m in (m1, m2):
        assert main(["train", "--data", str(lab1), "--model", "rf", "--out",
                     str(m), "--seed", "11", "--trees", "5"]) == 0
    assert m1.read_bytes() == m2.read_bytes()


def test_explain_and_report_pipeline(pipeline, tmp_path):
    out = tmp_path / "explain"
    assert main(["explain", "--data", str(pipeline["labeled"]["netflow_v2"]),
                 "--model-file", str(pipeline["model"]), "--samples", "6",
                 "--background", "8", "--out-dir", str(out), "--seed", "11"]) == 0
    ranking = next(out.glob("*_ranking.csv"))
    dumps = next(out.glob("*_explanations.jsonl"))
    lines = dumps.read_text().splitlines()
    head = json.loads(lines[0])
    assert "meta" in head
    sample = json.loads(lines[1])
    assert {"phi", "base", "prediction", "method", "seed"} <= set(sample)
    assert sample["method"] == "tree"
    # efficiency holds on the dumped numbers
    assert abs(sample["base"] + sum(sample["phi"]) - sample["prediction"]) < 1e-6

    report_dir = tmp_path / "reports"
    assert main(["eval", "--data", str(pipeline["labeled"]["netflow_v2"]),
                 "--model", "rf", "--trees", "10", "--folds", "3",
                 "--out-dir", str(report_dir), "--timing-rows", "8",
                 "--timing-repeats", "1", "--seed", "11"]) == 0
    report_csv = next(report_dir.glob("*_rf_report.csv"))
    render_dir = tmp_path / "render"
    assert main(["report", "--reports", str(report_csv), "--rankings",
                 str(ranking), "--out-dir", str(render_dir), "--seed", "11"]) == 0
    assert (render_dir / "metrics_table.txt").exists()
    assert (render_dir / "f1_rf.svg").exists()
    svgs = list(render_dir.glob("*_top20.svg"))
    assert len(svgs) == 1

    # rendering twice is byte-identical
    render2 = tmp_path / "render2"
    assert main(["report", "--reports", str(report_csv), "--rankings",
                 str(ranking), "--out-dir", str(render2), "--seed", "11"]) == 0
    assert (render2 / "f1_rf.svg").read_bytes() == (render_dir / "f1_rf.svg").read_bytes()


def test_report_without_inputs_exits_2(tmp_path):
    assert main(["report", "--out-dir", str(tmp_path)]) == 2


def test_config_file_supplies_defaults(pipeline, tmp_path):
    config = tmp_path / "run.conf"
    config.write_text("idle_timeout=15\nseed=11\n")
    out = tmp_path / "via_config.csv"
    assert main(["extract", "--pcap", str(pipeline["pcap"]), "--schema",
                 "netflow_v2", "--out", str(out), "--config", str(config)]) == 0
    direct = tmp_path / "direct.csv"
    assert main(["extract", "--pcap", str(pipeline["pcap"]), "--schema",
                 "netflow_v2", "--out", str(direct), "--seed", "11",
                 "--idle-timeout", "15"]) == 0
    # same effective settings -> same rows (provenance hashes include config)
    nf1, _ = read_feature_csv(out)
    nf2, _ = read_feature_csv(direct)
    assert nf1.rows == nf2.rows


def test_seed_env_var_used_as_default(pipeline, tmp_path, monkeypatch):
    monkeypatch.setenv("FLOWLENS_SEED", "11")
    out_env = tmp_path / "env.csv"
    assert main(["extract", "--pcap", str(pipeline["pcap"]), "--schema",
                 "netflow_v2", "--out", str(out_env)]) == 0
    _, meta = read_feature_csv(out_env)
    assert meta["seed"] == "11"
    monkeypatch.setenv("FLOWLENS_SEED", "99")
    out_flag = tmp_path / "flag.csv"
    assert main(["extract", "--pcap", str(pipeline["pcap"]), "--schema",
                 "netflow_v2", "--out", str(out_flag), "--seed", "11"]) == 0
    _, meta = read_feature_csv(out_flag)
    assert meta["seed"] == "11"  # explicit flag beats the environment


def test_labeled_csv_has_label_and_attack_columns(pipeline):
    ds, _ = read_labeled_csv(pipeline["labeled"]["netflow_v2"])
    assert set(ds.labels) == {0, 1}
    assert "Benign" in ds.categories


def _subcommands():
    parser = build_parser()
    return parser._subparsers._group_actions[0].choices.items()


def test_every_cli_flag_documented_in_readme():
    readme = (REPO_ROOT / "README.md").read_text(encoding="utf-8")
    for name, sub in _subcommands():
        assert name in readme
        for action in sub._actions:
            for opt in action.option_strings:
                if opt.startswith("--"):
                    assert opt in readme, f"{name} flag {opt} missing from README"


def test_every_cli_flag_appears_in_help():
    for name, sub in _subcommands():
        text = sub.format_help()
        for action in sub._actions:
            for opt in action.option_strings:
                if opt.startswith("--"):
                    assert opt in text
