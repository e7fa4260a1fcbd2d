import csv
import json
import math

import pytest
import yaml

from langevin_transport.cli import main
from langevin_transport.config import ConfigError, load_config


def _write(tmp_path, data, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(data))
    return str(p)


def test_config_requires_seed():
    with pytest.raises(ConfigError, match="seed"):
        load_config("sharpness")


def test_config_field_level_errors(tmp_path):
    path = _write(tmp_path, {"seed": 1, "source": {"kappa": -1.0}, "bogus": 3})
    with pytest.raises(ConfigError) as exc:
        load_config("sharpness", path)
    msg = str(exc.value)
    assert "source.kappa" in msg and "bogus" in msg
    with pytest.raises(ConfigError, match="sphere"):
        load_config("hessian-check", None, 1, {"setting": "sphere"})
    with pytest.raises(ConfigError, match="not 'sharpness'"):
        load_config("sharpness", _write(tmp_path, {"experiment": "bounds-table", "seed": 1}, "b.yaml"))


def test_cli_config_error_exit_code(tmp_path, capsys):
    assert main(["sharpness", "--out", str(tmp_path)]) == 2
    assert "config error" in capsys.readouterr().err
    assert main(["sharpness", "--config", str(tmp_path / "missing.yaml"), "--out", str(tmp_path)]) == 2


def test_bounds_table_row(tmp_path, capsys):
    out = tmp_path / "bt"
    assert main(["bounds-table", "--seed", "0", "--out", str(out)]) == 0
    stdout = capsys.readouterr().out
    rows = list(csv.DictReader(open(out / "bounds.csv")))
    assert len(rows) == 1
    assert float(rows[0]["euclid_stated"]) == pytest.approx(math.exp(20), rel=1e-12)
    assert "euclid_stated" in stdout
    summary = json.loads((out / "summary.json").read_text())
    assert summary["passed"] and summary["meta"]["seed"] == 0
    report = list(csv.DictReader(open(out / "report.csv")))
    assert all(r["reference"] for r in report)


def test_sharpness_passes(tmp_path, capsys):
    path = _write(tmp_path, {"seed": 2, "flow": {"n_steps": 300, "probes": 41, "tau": 10.0}})
    assert main(["sharpness", "--config", path, "--out", str(tmp_path / "s")]) == 0
    rows = list(csv.DictReader(open(tmp_path / "s" / "report.csv")))
    sup = next(r for r in rows if r["check"].startswith("oracle sup T'"))
    assert float(sup["value"]) >= 1.64872
    assert (tmp_path / "s" / "oracle.csv").exists()


def test_failure_exit_code(tmp_path):
    # a round-trip tolerance this coarse flow cannot meet on a large perturbation
    path = _write(tmp_path, {"seed": 0, "perturbation": {"family": "smoothed_abs", "L": 3.0},
                             "flow": {"n_steps": 40, "graded": 1, "probes": 9, "tau": 2.0}})
    assert main(["inverse-check", "--config", path, "--out", str(tmp_path / "i")]) == 1
    summary = json.loads((tmp_path / "i" / "summary.json").read_text())
    assert not summary["passed"] and summary["n_failed"] >= 1


def test_runtime_error_exit_code(tmp_path, capsys):
    path = _write(tmp_path, {"seed": 0, "perturbation": {"family": "linear", "L": 30.0},
                             "flow": {"n_steps": 2, "graded": 1, "probes": 3, "tau": 1.0}})
    assert main(["inverse-check", "--config", path, "--out", str(tmp_path / "e")]) == 2
    assert "error" in capsys.readouterr().err


def _numeric(out_dir):
    rows = list(csv.reader(open(out_dir / "report.csv")))
    summary = json.loads((out_dir / "summary.json").read_text())
    summary["meta"].pop("wall_time_s")
    summary["meta"].pop("threads")
    return rows, summary["rows"]


def test_rerun_bit_exact_across_threads(tmp_path):
    path = _write(tmp_path, {"seed": 11, "mc": {"n_paths": 20000, "dt": 0.01},
                             "mc_points": [[0.5, 1.0]], "grid": {"t_num": 3, "space_num": 5}})
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["hessian-check", "--config", path, "--threads", "1", "--out", str(a)]) == 0
    assert main(["hessian-check", "--config", path, "--threads", "4", "--out", str(b)]) == 0
    assert _numeric(a) == _numeric(b)


def test_seed_override_changes_mc(tmp_path):
    path = _write(tmp_path, {"seed": 1, "mc": {"n_paths": 5000, "dt": 0.01}, "deltas": [1.0]})
    main(["martingale-tail", "--config", path, "--out", str(tmp_path / "a")])
    main(["martingale-tail", "--config", path, "--seed", "2", "--out", str(tmp_path / "b")])
    assert _numeric(tmp_path / "a")[0] != _numeric(tmp_path / "b")[0]
