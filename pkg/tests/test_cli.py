import json

import pytest

from regcomplex import cli
from regcomplex.cli import ConfigError, main, parse_config


# ------------------------------------------------------------------ parsing

def test_parse_tv_defaults():
    config = parse_config(["tv-deblur", "--size", "64x64", "--seed", "1",
                           "--out", "r.csv"])
    assert config.experiment == "tv-deblur"
    assert config.seed == 1
    assert config.size == (64, 64)
    assert config.values["alpha-rule"] == "half-delta"
    assert config.delta_grid[0] == 1.0


def test_parse_square_size_shorthand():
    config = parse_config(["tv-deblur", "--size", "64", "--seed", "1",
                           "--out", "r.csv"])
    assert config.size == (64, 64)
    with pytest.raises(ConfigError, match="size"):
        parse_config(["tv-deblur", "--size", "big", "--out", "r.csv"])


def test_parse_rejects_n_rule_with_curves():
    with pytest.raises(ConfigError, match="conflicts"):
        parse_config(["tv-deblur", "--out", "r.csv", "--n-rule", "fixed:100",
                      "--curve", "iterated-log"])


def test_parse_grid_must_descend():
    with pytest.raises(ConfigError, match="decreasing"):
        parse_config(["tikhonov", "--out", "r.csv",
                      "--delta-grid", "0.1,0.5,0.01"])
    config = parse_config(["tikhonov", "--out", "r.csv",
                           "--delta-grid", "1,0.5,0.1"])
    assert config.delta_grid == [1.0, 0.5, 0.1]


def test_parse_unknown_config_keys_listed(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("experiment=tikhonov\nfrobnicate=1\ncolor=red\n")
    with pytest.raises(ConfigError, match="color, frobnicate"):
        parse_config(["tikhonov", "--out", "r.csv", "--config", str(cfg)])


def test_parse_flags_override_file(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("seed=5\ndelta-grid=1,0.5\n")
    config = parse_config(["tikhonov", "--out", "r.csv", "--config", str(cfg),
                           "--seed", "9"])
    assert config.seed == 9
    assert config.delta_grid == [1.0, 0.5]


def test_parse_missing_out_is_error():
    with pytest.raises(ConfigError, match="--out"):
        parse_config(["tikhonov"])
    with pytest.raises(ConfigError, match="--report"):
        parse_config(["check-fidelity"])


def test_paper_grid_flag():
    config = parse_config(["tv-deblur", "--out", "r.csv", "--paper-grid"])
    assert len(config.delta_grid) == 18
    assert config.delta_grid[0] == 1.0
    assert config.delta_grid[-1] == 5e-9


# ------------------------------------------------------------------ running

def test_tikhonov_run_writes_csv_and_sidecar(tmp_path):
    out = tmp_path / "tik.csv"
    code = main(["tikhonov", "--size", "6x6", "--seed", "3",
                 "--delta-grid", "1e-1,1e-2,1e-3", "--out", str(out)])
    assert code == 0
    text = out.read_bytes().decode("ascii")
    lines = text.split("\r\n")
    assert lines[0].startswith("delta,")
    assert len([ln for ln in lines if ln]) == 4  # header + 3 rows
    sidecar = json.loads((tmp_path / "tik.csv.json").read_text())
    assert sidecar["error_bounds_hold"] is True
    assert sidecar["backend"] in ("cython", "python")
    assert len(sidecar["measured_deltas"]) > 0


def test_rerun_from_sidecar_is_byte_identical(tmp_path):
    out1 = tmp_path / "a.csv"
    out2 = tmp_path / "b.csv"
    assert main(["tikhonov", "--size", "5x5", "--seed", "7",
                 "--delta-grid", "1e-1,1e-2", "--out", str(out1)]) == 0
    sidecar = str(out1) + ".json"
    assert main(["tikhonov", "--config", sidecar, "--out", str(out2)]) == 0
    a = out1.read_bytes()
    b = out2.read_bytes()
    assert a == b


def test_lasso_run_with_advisory_report(tmp_path):
    out = tmp_path / "lasso.csv"
    report = tmp_path / "report.json"
    code = main(["lasso", "--seed", "2", "--delta-grid", "1e-1,1e-2,1e-3",
                 "--out", str(out), "--report", str(report)])
    assert code == 0
    payload = json.loads(report.read_text())
    assert payload["passed"] is True


def test_lasso_broken_schedule_reports_failure_but_exits_zero(tmp_path):
    out = tmp_path / "lasso.csv"
    report = tmp_path / "report.json"
    code = main(["lasso", "--seed", "2", "--delta-grid", "1e-1,1e-2,1e-3",
                 "--n-rule", "fixed:50", "--alpha-rule", "power:1:1",
                 "--out", str(out), "--report", str(report)])
    assert code == 0  # condition checks advise, they do not gate
    payload = json.loads(report.read_text())
    assert payload["passed"] is False


def test_theorem_check_failure_exits_two(tmp_path, monkeypatch):
    from regcomplex.diagnostics import BoundCheck

    monkeypatch.setattr("regcomplex.experiments.diagnostics.verify_bregman_bound",
                        lambda *a, **k: BoundCheck(lhs=1.0, rhs=0.0, holds=False))
    out = tmp_path / "tik.csv"
    code = main(["tikhonov", "--size", "4x4", "--delta-grid", "1e-1,1e-2",
                 "--out", str(out)])
    assert code == 2


def test_tv_run_with_cap_flags_truncation(tmp_path):
    out = tmp_path / "tv.csv"
    code = main(["tv-deblur", "--size", "16x16", "--seed", "1",
                 "--delta-grid", "1,0.5,0.1,0.05,0.01", "--out", str(out),
                 "--cap-seconds", "1e-9"])
    assert code == 0
    sidecar = json.loads((tmp_path / "tv.csv.json").read_text())
    assert sidecar["truncated"] is True
    header = out.read_bytes().decode("ascii").split("\r\n")[0]
    assert header.startswith("curve,")


def test_tv_run_from_pgm_image(tmp_path):
    from regcomplex.experiments import Phantom, make_phantom
    from regcomplex.pgm import write_pgm

    grid, _ = make_phantom(Phantom("disk", 16, 16))
    img = tmp_path / "disk.pgm"
    write_pgm(img, grid)
    out = tmp_path / "tv.csv"
    code = main(["tv-deblur", "--image", str(img), "--seed", "1",
                 "--delta-grid", "1,0.5", "--out", str(out),
                 "--curve", "iterated-log", "--curve", "fixed:20"])
    assert code == 0
    body = out.read_bytes().decode("ascii")
    assert "fixed_20" in body


def test_check_source_report(tmp_path):
    report = tmp_path / "source.json"
    assert main(["check-source", "--report", str(report)]) == 0
    payload = json.loads(report.read_text())
    assert payload["identity_pair"]["found"] is True
    assert payload["identity_pair"]["strictly_complementary"] is True
    # the row-sum toy's only certificate is (1,1): on the boundary
    assert payload["row_sum_sparse"]["found"] is True
    assert payload["row_sum_sparse"]["strictly_complementary"] is False
    assert payload["row_sum_infeasible"]["found"] is False


def test_check_subreg_report(tmp_path):
    report = tmp_path / "subreg.json"
    assert main(["check-subreg", "--report", str(report)]) == 0
    payload = json.loads(report.read_text())
    assert payload["as_expected"] is True
    assert payload["positive_control"]["passed"] is True
    assert payload["negative_control"]["passed"] is False


def test_check_fidelity_report(tmp_path):
    report = tmp_path / "fid.json"
    assert main(["check-fidelity", "--report", str(report)]) == 0
    payload = json.loads(report.read_text())
    assert payload["as_expected"] is True


def test_operational_error_exits_one(tmp_path):
    assert main(["tv-deblur", "--out", str(tmp_path / "x.csv"),
                 "--image", str(tmp_path / "missing.pgm")]) == 1
    assert main(["tikhonov"]) == 1


def test_csv_floats_roundtrip(tmp_path):
    out = tmp_path / "tik.csv"
    main(["tikhonov", "--size", "4x4", "--delta-grid", "1e-1,1e-2",
          "--out", str(out)])
    lines = out.read_bytes().decode("ascii").strip().split("\r\n")
    header = lines[0].split(",")
    col = header.index("dist_to_truth")
    for line in lines[1:]:
        val = line.split(",")[col]
        assert float(val) == float(format(float(val), ".17g"))
