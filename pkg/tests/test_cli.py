import csv
import json

import pytest

from fogmimo import acceptance
from fogmimo.cli import (EXIT_ACCEPTANCE, EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK, main,
                         report_overhead)
from fogmimo.config import parse_config
from fogmimo.errors import ParameterError

FOG = """lambda_a = 31.8
eta = 3.75
load_ratio = 0.1
r_in = 0.08
trials = 2
seed = 3
theta_trials = 500
"""


@pytest.fixture
def fog_cfg(tmp_path):
    path = tmp_path / "fog.cfg"
    path.write_text(FOG)
    return str(path)


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_overhead_factor():
    assert report_overhead(1.0, 60, 300) == pytest.approx(0.8)
    assert report_overhead(1.0, 60, 200) == pytest.approx(0.7)
    assert report_overhead(2.5, 60, None) == 2.5
    with pytest.raises(ParameterError):
        report_overhead(1.0, 60, 60)


def test_fog_analytic_writes_csv_and_manifest(tmp_path, fog_cfg):
    out = tmp_path / "a.csv"
    assert main(["fog-analytic", "--config", fog_cfg, "--out", str(out)]) == EXIT_OK
    rows = read_rows(out)
    assert len(rows) == 1 and float(rows[0]["fog_user_se"]) > 0
    manifest = json.loads((tmp_path / "a.manifest.json").read_text())
    assert manifest["seed"] == 3 and manifest["columns"] == list(rows[0].keys())
    assert parse_config(manifest["config"]) == parse_config(FOG)


def test_manifest_reproduces_csv(tmp_path, fog_cfg):
    out = tmp_path / "s.csv"
    args = ["fog-sim", "--config", fog_cfg, "--out", str(out), "--set", "r_in=0.1",
            "--sweep", "load_ratio=0.1,0.3"]
    assert main(args) == EXIT_OK
    manifest = json.loads((tmp_path / "s.manifest.json").read_text())
    again = tmp_path / "again.cfg"
    again.write_text(manifest["config"])
    out2 = tmp_path / "s2.csv"
    assert main(["fog-sim", "--config", str(again), "--out", str(out2)]) == EXIT_OK
    assert out.read_bytes() == out2.read_bytes()


def test_overhead_applied(tmp_path, fog_cfg):
    plain, scaled = tmp_path / "p.csv", tmp_path / "s.csv"
    main(["fog-analytic", "--config", fog_cfg, "--out", str(plain)])
    main(["fog-analytic", "--config", fog_cfg, "--out", str(scaled), "--overhead", "300"])
    a, b = read_rows(plain)[0], read_rows(scaled)[0]
    assert float(b["fog_user_se"]) == pytest.approx(float(a["fog_user_se"]) * (1 - 60 / 300))
    assert a["fog_lambda_tilde"] == b["fog_lambda_tilde"]
    assert main(["fog-analytic", "--config", fog_cfg, "--overhead", "50"]) == EXIT_CONFIG


def test_sweep_columns_stable(tmp_path, fog_cfg):
    outs = []
    for i, loads in enumerate(["0.1", "0.1,1"]):
        out = tmp_path / f"{i}.csv"
        code = main(["sweep", "--config", fog_cfg, "--out", str(out), "--set",
                     "outputs=cell_analytic", "--sweep", f"load_ratio={loads}"])
        assert code == EXIT_OK
        outs.append(read_rows(out))
    assert list(outs[0][0]) == list(outs[1][0])
    assert len(outs[1]) == 2


def test_sweep_needs_outputs(fog_cfg):
    assert main(["sweep", "--config", fog_cfg]) == EXIT_CONFIG


@pytest.mark.parametrize("extra", [["--set", "bogus=1"], ["--set", "eta"],
                                   ["--sweep", "boundary=guard"], ["--set", "lambda_a=-2"]])
def test_config_errors_exit_2(fog_cfg, extra, capsys):
    assert main(["fog-analytic", "--config", fog_cfg] + extra) == EXIT_CONFIG
    assert "error" in capsys.readouterr().err


def test_missing_config_exit_2(tmp_path):
    assert main(["cell-analytic", "--config", str(tmp_path / "none.cfg")]) == EXIT_CONFIG


def test_numeric_failure_exit_3(fog_cfg, monkeypatch):
    from fogmimo import cli
    from fogmimo.errors import NumericalError

    def failing(cfg):
        raise NumericalError("quadrature did not converge")

    monkeypatch.setattr(cli.fog, "active_rrh_density", failing)
    assert main(["fog-analytic", "--config", fog_cfg]) == EXIT_NUMERIC


def test_trial_errors_exit_3(fog_cfg, monkeypatch):
    from fogmimo import cli
    monkeypatch.setitem(cli.EVALUATORS, "fog_sim", lambda cfg, row: 2)
    assert main(["fog-sim", "--config", fog_cfg]) == EXIT_NUMERIC


def test_csv_has_plain_numbers(tmp_path, fog_cfg):
    out = tmp_path / "n.csv"
    assert main(["fog-sim", "--config", fog_cfg, "--out", str(out)]) == EXIT_OK
    for value in read_rows(out)[0].values():
        if value:
            float(value)


def test_validate_exit_codes(tmp_path, monkeypatch, capsys):
    out = tmp_path / "v.csv"
    assert main(["validate", "--only", "3", "--out", str(out)]) == EXIT_OK
    assert "[PASS]" in capsys.readouterr().out
    assert read_rows(out)[0]["passed"] == "1"
    monkeypatch.setitem(acceptance.CRITERIA, 3, ("forced", lambda: (False, "no")))
    assert main(["validate", "--only", "3"]) == EXIT_ACCEPTANCE
    assert main(["validate", "--only", "99"]) == EXIT_CONFIG
