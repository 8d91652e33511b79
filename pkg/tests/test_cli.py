import json
import os

import numpy as np
import pytest

from stopctrl import artifacts
from stopctrl.cli import main


def _write_cfg(tmp_path, **overrides):
    cfg = {
        "model": {"name": "ou-quadratic", "params": {}},
        "grid": {"nx": 64, "nt": 64},
        "sim": {"n_paths": 400, "dt_sim": 0.005, "seed": 13},
        "diagnostics": {"levels": 2, "sim_paths": 200, "dt_sim": 0.01},
        "output": {"directory": str(tmp_path / "out"), "figures": False},
    }
    for key, block in overrides.items():
        cfg[key] = {**cfg.get(key, {}), **block}
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    return str(path)


def test_solve_writes_surface(tmp_path, capsys):
    cfg = _write_cfg(tmp_path)
    assert main(["solve", "--config", cfg]) == 0
    out = capsys.readouterr().out
    assert "wrote" in out
    data = artifacts.read_surface_csv(str(tmp_path / "out" / "surface.csv"))
    assert data["v"].shape == (65, 65)
    meta = artifacts.read_json(str(tmp_path / "out" / "solve_meta.json"))
    assert meta["assumptions"]["hard_pass"] is True
    assert meta["grid"]["nx"] == 64
    assert meta["residuals"]["obstacle_violation"] == 0.0
    assert meta["solver"]["iterations_max"] >= 1


def test_boundaries_and_osolve(tmp_path):
    cfg = _write_cfg(tmp_path)
    assert main(["boundaries", "--config", cfg]) == 0
    assert main(["osolve", "--config", cfg]) == 0
    bnd = artifacts.read_boundaries_csv(str(tmp_path / "out" / "boundaries.csv"))
    assert bnd["a_defined"].any()
    assert os.path.exists(tmp_path / "out" / "gradient.csv")


def test_simulate_saddle_report(tmp_path):
    cfg = _write_cfg(tmp_path)
    assert main(["simulate", "--config", cfg]) == 0
    rep = artifacts.read_json(str(tmp_path / "out" / "mc.json"))
    assert set(rep) == {"estimate", "stderr", "n_paths", "rows", "seed",
                        "config_hash"}
    assert rep["n_paths"] == 400
    assert len(rep["rows"]) == 8
    assert len(rep["config_hash"]) == 64


def test_diagnose_writes_report_and_artifacts(tmp_path):
    cfg = _write_cfg(tmp_path)
    assert main(["diagnose", "--config", cfg]) == 0
    rep = artifacts.read_json(str(tmp_path / "out" / "report.json"))
    assert set(rep) == {"config_hash", "entries"}
    assert {e["name"] for e in rep["entries"]}
    for name in ("surface.csv", "boundaries.csv", "gradient.csv"):
        assert os.path.exists(tmp_path / "out" / name)
    # figures disabled by this config
    assert not os.path.exists(tmp_path / "out" / "value_surface.svg")


def test_plot_renders_figures_and_checks_hashes(tmp_path):
    cfg = _write_cfg(tmp_path, output={"figures": True})
    assert main(["solve", "--config", cfg]) == 0
    assert main(["boundaries", "--config", cfg]) == 0
    assert main(["plot", "--config", cfg]) == 0
    assert os.path.exists(tmp_path / "out" / "value_surface.svg")

    # a changed configuration invalidates artifacts on disk
    cfg2 = _write_cfg(tmp_path, sim={"seed": 14})
    assert main(["plot", "--config", cfg2]) == 4


def test_seed_override_changes_hash(tmp_path):
    cfg = _write_cfg(tmp_path)
    assert main(["solve", "--config", cfg]) == 0
    with open(tmp_path / "out" / "surface.csv") as f:
        h1 = f.readline().strip()
    assert main(["solve", "--config", cfg, "--seed", "99"]) == 0
    with open(tmp_path / "out" / "surface.csv") as f:
        h2 = f.readline().strip()
    assert h1 != h2


def test_config_errors_exit_1(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"model": {"params": {"alpha0": "big"}}}))
    assert main(["solve", "--config", str(bad)]) == 1
    assert "model.params.alpha0" in capsys.readouterr().err

    bad.write_text(json.dumps({"grid": {"nx": 4}}))
    assert main(["solve", "--config", str(bad)]) == 1

    bad.write_text(json.dumps({"typo": {}}))
    assert main(["solve", "--config", str(bad)]) == 1
    assert main(["solve", "--config", str(tmp_path / "missing.json")]) == 1


def test_assumption_violation_exits_2(tmp_path):
    cfg = _write_cfg(tmp_path, model={"params": {"sigma0": 0.0}})
    assert main(["solve", "--config", cfg]) == 2
    # the screen's verdict is still recorded for post-mortems
    meta = artifacts.read_json(str(tmp_path / "out" / "solve_meta.json"))
    assert meta["assumptions"]["hard_pass"] is False
    failed = [c["name"] for c in meta["assumptions"]["checks"]
              if not c["passed"] and not c["flag_only"]]
    assert "sigma-positive" in failed
    assert not os.path.exists(tmp_path / "out" / "surface.csv")


def test_reruns_are_byte_identical(tmp_path):
    cfg = _write_cfg(tmp_path)
    assert main(["solve", "--config", cfg]) == 0
    first = (tmp_path / "out" / "surface.csv").read_bytes()
    assert main(["solve", "--config", cfg]) == 0
    assert (tmp_path / "out" / "surface.csv").read_bytes() == first
