import csv
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from mpemba_wqed.cli import main
from mpemba_wqed.experiment import ConfigError, ExperimentConfig, load_config
from mpemba_wqed.states import load_state


def write_config(path, **kw):
    path.write_text(json.dumps(kw))
    return path


@pytest.fixture(scope="module")
def reference_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("reference")
    cfg = write_config(out / "cfg.json", J=1, g0_over_J=0.2, omega0=0, omega_c=0, t_f=20, L=20,
                       horizon=120, M="auto", outputs=str(out / "res"))
    assert main(["run", "--config", str(cfg)]) == 0
    return out / "res"


def test_auto_M():
    assert ExperimentConfig(horizon=120, t_f=20).resolved_M() == 248
    assert ExperimentConfig(horizon=10, t_f=20).resolved_M() == 88


def test_reference_run_outputs(reference_run):
    summary = json.loads((reference_run / "summary.json").read_text())
    assert summary["schema_version"] == 1
    for name in ("canonical", "time_reversed", "dark"):
        assert summary["curves"][name]["gamma_fit"]["gamma_fit"] == pytest.approx(0.04, rel=0.05)
    assert summary["crossings"]["canonical_vs_time_reversed"]["verdict"] == "mpemba"
    assert summary["crossings"]["canonical_vs_dark"]["verdict"] == "no-mpemba"
    assert summary["delays"]["time_reversed"] == pytest.approx(20.0, abs=0.1)
    assert summary["markov"]["gamma"] == pytest.approx(0.04)
    assert summary["max_norm_drift"] < 1e-9
    assert summary["guard"]["passed"] and summary["guard"]["required_M"] == 248
    for name in ("canonical", "time_reversed", "dark"):
        assert load_state(reference_run / "states" / f"{name}.json").M == 248


def test_curves_csv_format(reference_run):
    raw = (reference_run / "curves.csv").read_bytes()
    assert b"\r" not in raw
    rows = list(csv.reader(raw.decode().splitlines()))
    assert rows[0] == ["t", "D_canonical", "D_time_reversed", "D_dark"]
    assert len(rows) == 1202
    assert float(rows[1][1]) == 1.0
    assert float(rows[201][2]) == pytest.approx(1.0, abs=1e-6)
    log_rows = list(csv.reader((reference_run / "curves_log.csv").read_text().splitlines()))
    t_log = np.array([float(r[0]) for r in log_rows[1:]])
    assert np.all(np.diff(np.log(t_log)) > 0) and t_log[-1] == pytest.approx(120.0)


def test_bit_identical_reruns(tmp_path, reference_run):
    cfg = write_config(tmp_path / "cfg.json", J=1, g0_over_J=0.2, t_f=20, L=20, horizon=120,
                       outputs=str(tmp_path / "again"))
    assert main(["run", "--config", str(cfg)]) == 0
    for name in ("curves.csv", "curves_log.csv", "summary.json"):
        a = (reference_run / name).read_bytes()
        b = (tmp_path / "again" / name).read_bytes()
        if name == "summary.json":
            # only the configured output path differs
            a, b = json.loads(a), json.loads(b)
            a["config"].pop("outputs"), b["config"].pop("outputs")
        assert a == b


def test_canonical_only(tmp_path):
    cfg = write_config(tmp_path / "c.json", horizon=30, curves=["canonical"], outputs=str(tmp_path / "o"))
    assert main(["run", "--config", str(cfg)]) == 0
    rows = list(csv.reader((tmp_path / "o" / "curves.csv").read_text().splitlines()))
    assert rows[0] == ["t", "D_canonical", "D_time_reversed", "D_dark"]
    assert all(r[2] == "" and r[3] == "" and r[1] != "" for r in rows[1:])
    summary = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert summary["crossings"] == {} and summary["delays"] == {}


def test_guard_error_exit_code(tmp_path, capsys):
    cfg = write_config(tmp_path / "g.json", M=50, horizon=120, outputs=str(tmp_path / "o"))
    assert main(["run", "--config", str(cfg)]) == 3
    assert "M >= 248" in capsys.readouterr().err


def test_override_guard_recorded(tmp_path):
    cfg = write_config(tmp_path / "g.json", M=30, horizon=20, t_f=5, L=2, outputs=str(tmp_path / "o"))
    assert main(["run", "--config", str(cfg), "--override-guard"]) == 0
    summary = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert summary["guard"]["overridden"] is True


def test_unknown_key(tmp_path, capsys):
    cfg = write_config(tmp_path / "u.json", horizn=100)
    assert main(["run", "--config", str(cfg)]) == 2
    assert "horizn" in capsys.readouterr().err


def test_malformed_json_reports_line(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{\n  "J": 1,\n  "L": ,\n}')
    with pytest.raises(ConfigError, match="line 3"):
        load_config(path)


@pytest.mark.parametrize("kw", [dict(L=-1), dict(M="big"), dict(curves=["hot"]), dict(horizon="long")])
def test_invalid_values(tmp_path, kw):
    with pytest.raises(ConfigError):
        load_config(write_config(tmp_path / "x.json", **kw))


def test_rate(capsys):
    assert main(["rate", "--g0", "0.2", "--J", "1", "--detuning", "0"]) == 0
    assert capsys.readouterr().out.split() == ["gamma=0.04", "delta=0"]


def test_rate_outside_band(capsys):
    assert main(["rate", "--detuning", "3"]) == 2


def test_state_dark_smallest(tmp_path):
    out = tmp_path / "d.json"
    with pytest.warns(UserWarning):
        assert main(["state", "dark", "--L", "0", "--g0", "1", "--J", "1", "--out", str(out)]) == 0
    s = load_state(out)
    assert np.count_nonzero(s.vector) == 2
    assert s.atom_amp == pytest.approx(1 / math.sqrt(2))
    assert s.site(0) == pytest.approx(-1 / math.sqrt(2))


def test_state_time_reversed_and_volterra(tmp_path, capsys):
    st = tmp_path / "tr.json"
    assert main(["state", "time_reversed", "--t-f", "5", "--out", str(st)]) == 0
    out = tmp_path / "v.csv"
    assert main(["volterra", "--state", str(st), "--horizon", "10", "--h", "0.05", "--out", str(out)]) == 0
    rows = list(csv.reader(out.read_text().splitlines()))
    assert rows[0] == ["t", "re", "im", "D"]
    # atom fully re-excited at t = t_f
    assert float(rows[101][3]) == pytest.approx(1.0, abs=1e-4)


def test_kernel_dump(tmp_path):
    st = tmp_path / "dk.json"
    assert main(["state", "dark", "--L", "3", "--out", str(st)]) == 0
    assert main(["kernel", "--tau-max", "5", "--h", "0.1", "--state", str(st), "--out", str(tmp_path / "k")]) == 0
    rows = list(csv.reader((tmp_path / "k" / "kernel.csv").read_text().splitlines()))
    assert rows[0] == ["tau", "re", "im"] and float(rows[1][1]) == pytest.approx(0.04)
    assert (tmp_path / "k" / "forcing.csv").exists()


def test_check_paper_config(capsys):
    assert main(["check", "--paper-config"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and out.count("PASS") >= 8


def test_console_script_entry_point():
    res = subprocess.run([sys.executable, "-m", "mpemba_wqed.cli", "rate", "--json"], capture_output=True, text=True)
    assert res.returncode == 0
    assert json.loads(res.stdout)["gamma"] == pytest.approx(0.04)
