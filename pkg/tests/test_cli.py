import csv
import json

import pytest

from decumulation.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_plan_from_gamma(capsys):
    code, out, _ = run(capsys, "plan", "--gamma", "0.00415", "--format", "json")
    assert code == 0
    row = json.loads(out)[0]
    assert row["cw"] == pytest.approx(0.0053464, abs=1e-7)
    assert row["cw"] * row["expected_w_over_c"] == pytest.approx(1.0)


def test_plan_perpetual(capsys):
    code, out, _ = run(capsys, "plan", "--gamma", "0.004", "--t", "perpetual", "--format", "json")
    assert code == 0 and json.loads(out)[0]["cw"] == 0.004


def test_plan_from_moments_fourth_order(capsys):
    code, out, _ = run(
        capsys, "plan", "--mean", "0.082", "--variance", "0.029", "--skewness", "0",
        "--kurtosis", "3", "--s", "0.029", "--t", "30", "--order", "4", "--format", "csv",
    )
    assert code == 0
    row = next(csv.DictReader(out.splitlines()))
    assert float(row["gamma"]) == pytest.approx(0.023675, abs=1e-6)


def test_plan_missing_higher_moments_is_validation_error(capsys):
    code, _, err = run(capsys, "plan", "--mean", "0.01", "--variance", "0.002", "--order", "4")
    assert code == 4 and "kurtosis" in err.lower() or "skew" in err.lower()


def test_leverage_free(capsys):
    code, out, _ = run(capsys, "leverage", "--mean", "0.082", "--variance", "0.029",
                       "--cost", "none", "--s", "0.029", "--t", "30", "--format", "json")
    assert code == 0
    row = json.loads(out)[0]
    assert row["l"] == pytest.approx(1.34016, abs=1e-5)
    assert row["gamma"] == pytest.approx(0.024595, abs=1e-6)


def test_leverage_explicit_cost(capsys):
    code, out, _ = run(capsys, "leverage", "--mean", "0.00823", "--variance", "0.00164",
                       "--cost-mean", "0.0029", "--cost-var", "6.7e-6", "--format", "json")
    assert code == 0 and 1 < json.loads(out)[0]["l"] < 4


def test_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["plan", "--order", "3"])
    assert exc.value.code == 2


def test_missing_data_is_ingest_error(capsys, tmp_path):
    code, _, err = run(capsys, "moments", "--data-dir", str(tmp_path), "--series", "stocks")
    assert code == 3 and "not found" in err


def test_moments_from_data(capsys, synthetic_data):
    code, out, _ = run(capsys, "moments", "--data-dir", str(synthetic_data), "--format", "json")
    assert code == 0
    rows = json.loads(out)
    assert [r["series"] for r in rows][:2] == ["S&P", "GS10 bond"]
    assert len(rows) == 10


def test_moments_from_returns_file(capsys, tmp_path):
    p = tmp_path / "r.csv"
    p.write_text("date,return\n2000-01,0.01\n2000-02,0.01\n2000-03,0.01\n")
    code, out, _ = run(capsys, "moments", "--returns-file", str(p), "--format", "json")
    assert code == 0
    row = json.loads(out)[0]
    assert row["variance"] == 0.0 and row["gamma4"] == pytest.approx(row["gamma2"])


def test_backtest_writes_outputs(capsys, synthetic_data, tmp_path):
    out_dir = tmp_path / "bt"
    code, out, _ = run(
        capsys, "backtest", "--data-dir", str(synthetic_data), "--portfolio", "stocks=0.6,bonds=0.4",
        "--leverage", "1.5", "--cost", "tbill", "--cw", "0.0045", "--out-dir", str(out_dir),
        "--workers", "2", "--format", "json",
    )
    assert code == 0
    summary = json.loads(out)
    assert summary["cohort_count"] == 62
    rows = list(csv.DictReader((out_dir / "trajectories.csv").open()))
    assert len(rows) == 62 * 361
    assert json.loads((out_dir / "report.json").read_text())["cohort_count"] == 62


def test_backtest_levered_needs_cost(capsys, synthetic_data, tmp_path):
    code, _, err = run(capsys, "backtest", "--data-dir", str(synthetic_data), "--leverage", "2",
                       "--cost", "none", "--out-dir", str(tmp_path))
    assert code == 4


def test_config_file_and_override(capsys, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# plan settings\ngamma = 0.004\nt = 120\nformat = json\n")
    code, out, _ = run(capsys, "plan", "--config", str(cfg))
    assert code == 0 and json.loads(out)[0]["t"] == 120
    code, out, _ = run(capsys, "plan", "--config", str(cfg), "--t", "360")
    assert json.loads(out)[0]["t"] == 360


def test_config_unknown_key(capsys, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("colour = blue\n")
    code, _, err = run(capsys, "plan", "--config", str(cfg))
    assert code == 3 and "colour" in err


def test_reproduce_reports_tolerance_failures(capsys, synthetic_data, tmp_path):
    # synthetic data cannot match the published table, so checks fail with exit 5
    code, out, _ = run(capsys, "reproduce", "table1", "--data-dir", str(synthetic_data),
                       "--out-dir", str(tmp_path))
    assert code == 5
    assert "[FAIL]" in out
    checks = json.loads((tmp_path / "table1_checks.json").read_text())
    assert all({"id", "computed", "expected", "passed"} <= set(c) for c in checks)
    assert (tmp_path / "table1.csv").is_file()


def test_reproduce_figure1_writes_panels(capsys, synthetic_data, tmp_path):
    pytest.importorskip("matplotlib")
    code, out, _ = run(capsys, "reproduce", "figure1", "--data-dir", str(synthetic_data),
                       "--out-dir", str(tmp_path), "--svg")
    assert code in (0, 5)
    panels = json.loads((tmp_path / "figure1" / "panels.json").read_text())
    assert len(panels) >= 3
    svg = tmp_path / "figure1" / "figure1.svg"
    first = svg.read_bytes()
    run(capsys, "reproduce", "figure1", "--data-dir", str(synthetic_data), "--out-dir", str(tmp_path), "--svg")
    assert svg.read_bytes() == first


def test_pin_data(capsys, tmp_path, synthetic_data):
    root = tmp_path / "d"
    root.mkdir()
    (root / "tbill.csv").write_bytes((synthetic_data / "tbill.csv").read_bytes())
    code, out, _ = run(capsys, "pin-data", "--data-dir", str(root))
    assert code == 0 and "tbill.csv" in out
    assert "tbill.csv" in json.loads((root / "MANIFEST.json").read_text())["files"]
