import csv
import json

import pytest

from cusplab import cli


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def summary(path, command):
    return json.loads((path / f"{command}_summary.json").read_text(encoding="utf-8"))


def test_simulate_example(tmp_path, capsys):
    code, out, _ = run(capsys, "simulate", "--b", "0", "--z0", "2", "--eps", "1e-2", "--out", str(tmp_path))
    assert code == 0
    assert "hit a=1.0" in out
    rows = list(csv.reader((tmp_path / "trajectory.csv").open(encoding="utf-8")))
    assert rows[0] == ["t", "a", "b", "z", "eps"]
    assert abs(float(rows[-1][1]) - 1.0) < 1e-10
    assert float(rows[-1][3]) < 0
    doc = summary(tmp_path, "simulate")
    assert doc["exit_code"] == 0 and doc["config"]["z0"] == 2.0


def test_simulate_is_deterministic(tmp_path, capsys):
    for sub in ("x", "y"):
        run(capsys, "simulate", "--z0", "1.5", "--eps", "2e-2", "--out", str(tmp_path / sub))
    assert (tmp_path / "x" / "trajectory.csv").read_bytes() == (tmp_path / "y" / "trajectory.csv").read_bytes()


def test_simulate_rejects_eps_zero(tmp_path, capsys):
    code, _, err = run(capsys, "simulate", "--z0", "2", "--eps", "0", "--out", str(tmp_path))
    assert code == 2
    assert "eps > 0" in err


def test_simulate_rejects_negative_start(tmp_path, capsys):
    code, _, err = run(capsys, "simulate", "--z0", "-1", "--eps", "1e-2", "--out", str(tmp_path))
    assert code == 2
    assert "z > 0" in err


def test_global_flags_before_and_after_command(tmp_path, capsys):
    code, *_ = run(capsys, "--rtol", "1e-9", "simulate", "--z0", "2", "--out", str(tmp_path / "a"))
    assert code == 0 and summary(tmp_path / "a", "simulate")["config"]["rtol"] == 1e-9
    code, *_ = run(capsys, "simulate", "--z0", "2", "--atol", "1e-11", "--out", str(tmp_path / "b"))
    assert code == 0 and summary(tmp_path / "b", "simulate")["config"]["atol"] == 1e-11


def test_config_file_and_flag_override(tmp_path, capsys):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"z0": 2.0, "eps": 5e-2, "out": str(tmp_path / "o")}), encoding="utf-8")
    code, *_ = run(capsys, "simulate", "--config", str(cfg), "--eps", "2e-2")
    assert code == 0
    assert summary(tmp_path / "o", "simulate")["config"]["eps"] == 2e-2


def test_usage_errors(tmp_path, capsys):
    assert run(capsys)[0] == 2
    assert run(capsys, "bogus")[0] == 2
    assert run(capsys, "simulate", "--eps", "abc")[0] == 2
    assert run(capsys, "verify", "--config", str(tmp_path / "missing.json"))[0] == 2


def test_sweep_default(tmp_path, capsys):
    code, out, _ = run(capsys, "sweep", "--out", str(tmp_path))
    assert code == 0
    assert "decrease monotonically" in out
    header = (tmp_path / "sweep.csv").read_text(encoding="utf-8").splitlines()[0]
    assert header == "b,eps,rate_num,shift_num,target_I,deviation,wall_time"
    meta = json.loads((tmp_path / "sweep.json").read_text(encoding="utf-8"))["meta"]
    assert meta["monotone"] is True and meta["config"]["b"] == 0.0


def test_sweep_with_failed_row_is_flagged(tmp_path, capsys):
    f = tmp_path / "f.txt"
    f.write_text("f1 = 0*(1/(eps - 0.002))\n", encoding="utf-8")
    code, out, err = run(capsys, "sweep", "--system", "expr", "--expr-file", str(f),
                         "--eps-list", "1e-2,5e-3,2e-3", "--out", str(tmp_path))
    assert code == 0
    assert "FAILED" in out and "EvaluationError" in err
    last = (tmp_path / "sweep.csv").read_text(encoding="utf-8").splitlines()[-1]
    assert "nan" in last


def test_sweep_fails_check_when_not_converging(tmp_path, capsys):
    code, out, _ = run(capsys, "sweep", "--system", "origin-flat", "--eps-list", "5e-3,2.5e-3",
                       "--out", str(tmp_path))
    assert code == 1
    assert "do not decrease" in out


def test_unwritable_output(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("", encoding="utf-8")
    code, _, err = run(capsys, "sweep", "--out", str(blocker / "sub"))
    assert code == 2
    assert "not writable" in err


def test_layers(tmp_path, capsys):
    code, out, _ = run(capsys, "layers", "--eps", "1e-3", "--out", str(tmp_path))
    assert code == 0
    rows = list(csv.DictReader((tmp_path / "layers.csv").open(encoding="utf-8")))
    assert len(rows) == 5
    assert all(abs(float(r["b1_exit"])) <= 2.0 for r in rows)


def test_layers_bad_constants(tmp_path, capsys):
    assert run(capsys, "layers", "--L", "2", "--M", "1", "--out", str(tmp_path))[0] == 2


def test_fold(tmp_path, capsys):
    code, out, _ = run(capsys, "fold", "--out", str(tmp_path))
    assert code == 0
    assert "fitted exponent" in out
    assert len((tmp_path / "fold.csv").read_text(encoding="utf-8").splitlines()) == 8
    assert 0.60 <= summary(tmp_path, "fold")["result"]["slope"] <= 0.73


def test_fold_span_too_short(tmp_path, capsys):
    assert run(capsys, "fold", "--fold-eps", "1e-4,1e-3", "--out", str(tmp_path))[0] == 2


def test_chart_field_print(tmp_path, capsys):
    code, out, _ = run(capsys, "chart", "eps", "--point", "0,0,0,0", "--out", str(tmp_path))
    assert code == 0
    assert "(0.0, 1.0, 0.0, 0.0)" in out


def test_chart_matching_outside_overlap(tmp_path, capsys):
    code, _, err = run(capsys, "chart", "en", "--point", "0.1,0,0,0", "--to", "eps", "--out", str(tmp_path))
    assert code == 2
    assert "eps > 0" in err


def test_chart_round_trip(tmp_path, capsys):
    code, out, _ = run(capsys, "chart", "B-", "--point", "0.2,0,0,1", "--round-trip", "--out", str(tmp_path))
    assert code == 0
    doc = summary(tmp_path, "chart")["result"]
    assert doc["blown_down"] == pytest.approx([0.0, -0.04, 0.0, 3.2e-4], abs=1e-16)
    assert doc["round_trip"] == pytest.approx([0.2, 0.0, 0.0, 1.0], rel=1e-12)


def test_chart_usage_errors(tmp_path, capsys):
    assert run(capsys, "chart", "polar", "--point", "0,0,0,0", "--out", str(tmp_path))[0] == 2
    assert run(capsys, "chart", "en", "--point", "0,0,0", "--out", str(tmp_path))[0] == 2


def test_sdi_principal(tmp_path, capsys):
    code, out, _ = run(capsys, "sdi", "--b", "0", "--out", str(tmp_path))
    assert code == 0
    assert out.count("-3.600000000000") == 2


def test_sdi_fold_crossing(tmp_path, capsys):
    assert run(capsys, "sdi", "--b", "-0.3", "--out", str(tmp_path))[0] == 2
    code, out, _ = run(capsys, "sdi", "--b", "-0.3", "--jump", "--out", str(tmp_path))
    assert code == 0 and "-4.289520186005" in out


def test_sdi_mismatch_is_a_check_failure(tmp_path, capsys, monkeypatch):
    monkeypatch.setattr(cli, "sdi_quadrature", lambda b, z_en, z_ex: 0.0)
    code, _, err = run(capsys, "sdi", "--b", "0", "--out", str(tmp_path))
    assert code == 1 and "mismatch" in err


def test_numerical_failure_exit_code(tmp_path, capsys):
    f = tmp_path / "f.txt"
    f.write_text("f3 = 1/(z - 2)\n", encoding="utf-8")
    code, _, err = run(capsys, "simulate", "--system", "expr", "--expr-file", str(f), "--z0", "2",
                       "--out", str(tmp_path))
    assert code == 3
    assert "numerical failure" in err


def test_verify_subset(tmp_path, capsys):
    code, out, _ = run(capsys, "verify", "--criteria", "1,3,5", "--out", str(tmp_path))
    assert code == 0
    assert out.count("[PASS]") == 3
    doc = summary(tmp_path, "verify")
    assert [c["number"] for c in doc["result"]["criteria"]] == [1, 3, 5]


def test_verify_forced_failure(tmp_path, capsys):
    code, out, _ = run(capsys, "verify", "--criteria", "2", "--target-shift", "0.5", "--out", str(tmp_path))
    assert code == 1
    assert "[FAIL] criterion  2" in out
