import json

import numpy as np
import pytest

from dataclasses import replace

from lmorse.cli import (EXIT_CONFIG, EXIT_FAILED, EXIT_OK, ConfigError, load_config, main,
                        sweep_row, sweep_vectors)

SPHERE = {"background": {"kind": "sphere", "n": 2, "c0": 0.01}, "p": [0.0, 0.0],
          "v": [20.0, 0.0], "tau_bar": 1.0}


def write(tmp_path, cfg, name="cfg.json"):
    f = tmp_path / name
    f.write_text(json.dumps(cfg))
    return str(f)


def test_shoot_writes_outputs(tmp_path):
    cfg = write(tmp_path, SPHERE)
    out = tmp_path / "o"
    assert main(["shoot", "--config", cfg, "--out", str(out), "--tau-epsilon", "1e-6"]) == EXIT_OK
    summary = json.loads((out / "summary.json").read_text())
    assert summary["L"] > 0 and "tau_form" in summary
    assert (out / "path.csv").read_text().startswith("s,tau,chart,x0,x1")


def test_conjugates_and_index(tmp_path):
    out = tmp_path / "o"
    cfg = write(tmp_path, SPHERE)
    assert main(["conjugates", "--config", cfg, "--out", str(out)]) == EXIT_OK
    assert json.loads((out / "conjugates.json").read_text())["total_multiplicity"] == 2
    assert main(["index", "--config", cfg, "--out", str(out), "--mesh", "32,64"]) == EXIT_OK
    idx = json.loads((out / "index.json").read_text())
    assert idx == {"meshes": [32, 64], "morse_index": [2, 2]}
    assert (out / "eigenvalues.csv").exists()


def test_euclidean_has_no_conjugate_points(tmp_path):
    cfg = write(tmp_path, {"background": {"kind": "euclidean", "n": 3}, "p": [0, 0, 0],
                           "v": [1, 2, 3], "tau_bar": 2.0})
    assert main(["conjugates", "--config", cfg, "--out", str(tmp_path)]) == EXIT_OK
    assert json.loads((tmp_path / "conjugates.json").read_text())["points"] == []


def test_verify_passes_and_fault_injection_fails(tmp_path):
    cfg = write(tmp_path, SPHERE)
    assert main(["verify", "--config", cfg, "--out", str(tmp_path / "a")]) == EXIT_OK
    verdict = json.loads((tmp_path / "a" / "verdict.json").read_text())
    assert verdict["passed"] and verdict["checks"]["morse"]["passed"]
    code = main(["verify", "--config", cfg, "--out", str(tmp_path / "b"),
                 "--corrupt-curvature-sign"])
    assert code == EXIT_FAILED
    bad = json.loads((tmp_path / "b" / "verdict.json").read_text())
    assert not bad["checks"]["key_lemma"]["passed"]


@pytest.mark.parametrize("cfg", [
    {k: v for k, v in SPHERE.items() if k != "tau_bar"},
    dict(SPHERE, tau_bar=-1.0),
    dict(SPHERE, v=[1.0, 2.0, 3.0]),
    dict(SPHERE, background={"kind": "torus", "n": 2}),
    dict(SPHERE, meshes=[128, 64]),
])
def test_bad_configs_exit_2(tmp_path, cfg):
    assert main(["shoot", "--config", write(tmp_path, cfg), "--out", str(tmp_path)]) == EXIT_CONFIG


def test_unreadable_config_and_bad_tau_epsilon(tmp_path):
    assert main(["shoot", "--config", str(tmp_path / "missing.json")]) == EXIT_CONFIG
    cfg = write(tmp_path, SPHERE)
    assert main(["shoot", "--config", cfg, "--tau-epsilon", "2.0"]) == EXIT_CONFIG
    with pytest.raises(SystemExit):
        main(["index", "--config", cfg, "--mesh", "64"])


def test_overrides_and_grid(tmp_path):
    cfg, raw = load_config(write(tmp_path, SPHERE), {"tol": 1e-11, "output_dir": "x"})
    assert cfg.tol == 1e-11 and cfg.output_dir == "x"
    vecs = sweep_vectors({"v_grid": {"axes": [[0, 1, 3], [0, 2, 2]]}}, 2)
    assert vecs.shape == (6, 2) and np.allclose(vecs[-1], [1, 2])
    with pytest.raises(ConfigError):
        sweep_vectors({"v_grid": {"axes": [[0, 1, 3]]}}, 2)
    with pytest.raises(ConfigError):
        sweep_vectors({}, 2)


def test_sweep_is_deterministic_across_jobs(tmp_path):
    cfg = dict(SPHERE, tau_bar=0.04, v_grid={"vectors": [[10, 0], [0, 20], [15, 15]]})
    path = write(tmp_path, cfg)
    assert main(["sweep", "--config", path, "--out", str(tmp_path / "a"), "--jobs", "1"]) == EXIT_OK
    assert main(["sweep", "--config", path, "--out", str(tmp_path / "b"), "--jobs", "2"]) == EXIT_OK
    a = (tmp_path / "a" / "sweep.csv").read_text()
    assert a == (tmp_path / "b" / "sweep.csv").read_text()
    rows = a.splitlines()
    assert rows[0].split(",")[-1] == "errors" and len(rows) == 4


def test_selftest(tmp_path, capsys):
    assert main(["selftest", "--out", str(tmp_path)]) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert lines and all(line.startswith("PASS") for line in lines)
    assert json.loads((tmp_path / "selftest.json").read_text())["passed"]


def test_sweep_row_records_errors(tmp_path):
    cfg, _ = load_config(write(tmp_path, SPHERE))
    row = sweep_row(replace(cfg, tol=-1.0), [1.0, 0.0])
    assert row["errors"].startswith("ValueError") and row["L"] == ""
