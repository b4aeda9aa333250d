import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from flowlens.cli import main

COHORT_TOML = """
n_devices = 6
seed = 42
start = 2025-05-01T00:00:00Z
end = 2025-05-06T00:00:00Z
base_rate_per_hour = 3.0
"""

BUNDLE_FILES = ["shares.json", "usage_table.csv", "heatmap.csv", "heatmap.svg",
                "daily.csv", "daily.svg", "hours.csv", "hours.svg",
                "sessions.csv", "run_manifest.json"]


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def demo_log(tmp_path, runner):
    cfg = tmp_path / "cohort.toml"
    cfg.write_text(COHORT_TOML)
    out = tmp_path / "demo.flows.csv"
    res = runner.invoke(main, ["simulate", "--config", str(cfg), "--out", str(out)])
    assert res.exit_code == 0, res.output
    return out


def test_simulate_writes_flow_log(demo_log):
    head = demo_log.read_text().splitlines()
    assert head[0] == "timestamp,device_ip,hostname,up_bytes,down_bytes"
    assert len(head) > 100


def test_simulate_seed_override_changes_output(tmp_path, runner, demo_log):
    cfg = tmp_path / "cohort.toml"
    out2 = tmp_path / "demo2.flows.csv"
    res = runner.invoke(main, ["simulate", "--config", str(cfg),
                               "--out", str(out2), "--seed", "43"])
    assert res.exit_code == 0
    assert out2.read_bytes() != demo_log.read_bytes()


def test_simulate_missing_config_exit3(tmp_path, runner):
    res = runner.invoke(main, ["simulate", "--config", str(tmp_path / "nope.toml"),
                               "--out", str(tmp_path / "x.csv")])
    assert res.exit_code == 3


def test_analyze_writes_full_bundle(tmp_path, runner, demo_log):
    out = tmp_path / "report"
    res = runner.invoke(main, ["analyze", "--input", str(demo_log),
                               "--out", str(out)])
    assert res.exit_code == 0, res.output
    for name in BUNDLE_FILES:
        assert (out / name).exists(), name
    shares = json.loads((out / "shares.json").read_text())
    assert shares["total_flows"] > 0
    manifest = json.loads((out / "run_manifest.json").read_text())
    assert manifest["config"]["gap_minutes"] == 5.0
    assert len(manifest["inputs"]) == 1
    assert len(manifest["inputs"][0]["sha256"]) == 64


def test_analyze_reproducible_csv_outputs(tmp_path, runner, demo_log):
    out1, out2 = tmp_path / "r1", tmp_path / "r2"
    for out in (out1, out2):
        res = runner.invoke(main, ["analyze", "--input", str(demo_log),
                                   "--out", str(out)])
        assert res.exit_code == 0
    for name in BUNDLE_FILES:
        if name.endswith((".csv", ".json")):
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes(), name


def test_gap_sensitivity_monotone_session_counts(tmp_path, runner, demo_log):
    counts = {}
    for gap in (3, 5, 10):
        out = tmp_path / f"gap{gap}"
        res = runner.invoke(main, ["analyze", "--input", str(demo_log),
                                   "--out", str(out), "--gap", str(gap)])
        assert res.exit_code == 0
        counts[gap] = len((out / "sessions.csv").read_text().splitlines()) - 1
    assert counts[3] >= counts[5] >= counts[10]


def test_analyze_missing_catalog_exit3(tmp_path, runner, demo_log):
    res = runner.invoke(main, ["analyze", "--input", str(demo_log),
                               "--catalog", str(tmp_path / "missing.csv"),
                               "--out", str(tmp_path / "o")])
    assert res.exit_code == 3
    assert "CatalogNotFound" in res.output


def test_analyze_missing_input_exit2(tmp_path, runner):
    res = runner.invoke(main, ["analyze", "--input", str(tmp_path / "nope.csv"),
                               "--out", str(tmp_path / "o")])
    assert res.exit_code == 2


def test_analyze_bad_gap_exit3(tmp_path, runner, demo_log):
    res = runner.invoke(main, ["analyze", "--input", str(demo_log),
                               "--gap", "0", "--out", str(tmp_path / "o")])
    assert res.exit_code == 3


def test_validate_table_reports_residuals(tmp_path, runner):
    table = tmp_path / "usage.csv"
    table.write_text(
        "device_ip,chatgpt,claude,copilot,deepseek,gemini,perplexity,claimed_total\n"
        "10.7.0.146,915,294,252,183,47064,0,1644\n"
        "10.7.0.123,15371,0,3,0,80531,0,15383\n"
        "10.7.0.199,4,0,4538,98,38036,0,4687\n"
        "10.7.0.206,6439,0,24,37,35429,0,6507\n")
    res = runner.invoke(main, ["validate-table", str(table)])
    assert res.exit_code == 1  # inconsistencies present
    assert "10.7.0.146: ok (1644)" in res.output
    assert "residual=9" in res.output
    assert "residual=47" in res.output
    assert "residual=7" in res.output


def test_validate_table_all_consistent(tmp_path, runner):
    table = tmp_path / "usage.csv"
    table.write_text("device_ip,chatgpt,gemini,claimed_total\n"
                     "10.7.0.1,10,99,10\n")
    res = runner.invoke(main, ["validate-table", str(table)])
    assert res.exit_code == 0
