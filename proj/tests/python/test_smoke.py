import json
import math

import numpy as np
import pytest

import klausmeier


def test_default_config_round_trip():
    cfg = klausmeier.config()
    assert cfg["grid"]["n"] == 64
    assert cfg == json.loads(klausmeier.default_config())


def test_unknown_key_raises():
    with pytest.raises(klausmeier.ConfigError, match="model.gama"):
        klausmeier.config(overrides=["model.gama=2"])


def test_seed_flag_wins():
    assert klausmeier.config('{"seed": 3}', seed=9)["seed"] == 9
    assert klausmeier.config('{"seed": 3}')["seed"] == 3


def test_simulate_shapes_and_determinism():
    overrides = ["grid.n=32", "solver.T=0.02", "model.sigma1=0.5"]
    a = klausmeier.simulate(overrides=overrides, seed=5)
    b = klausmeier.simulate(overrides=overrides, seed=5)
    assert a["u"].shape == (21, 32)
    assert a["v"].shape == (21, 32)
    assert np.array_equal(a["u"], b["u"])
    assert a["t"][-1] == pytest.approx(0.02)
    assert np.all(np.isfinite(a["u_l2"]))
    c = klausmeier.simulate(overrides=overrides, seed=6)
    assert not np.array_equal(a["u"], c["u"])


def test_validate_and_refusal(tmp_path):
    clauses = klausmeier.validate_hypotheses()
    assert all(c["pass"] for c in clauses)
    failing = [c["id"] for c in klausmeier.validate_hypotheses({"rho": 0.6}) if not c["pass"]]
    assert failing == ["rho_upper"]
    out = klausmeier.run(overrides=["experiment=uniqueness", "grid.dim=2", "grid.n=8"], out_dir=str(tmp_path))
    assert out["status"] == 2
    assert (tmp_path / "failure.txt").exists()


def test_run_writes_files(tmp_path):
    out = klausmeier.run(overrides=["solver.T=0.01"], seed=1, out_dir=str(tmp_path))
    assert out["status"] == 0
    assert (tmp_path / "norms.csv").exists()


def test_scalar_helpers():
    assert klausmeier.pm_inequality_gap(0.7, -0.7, 3.0) == pytest.approx(0.0, abs=1e-12)
    assert klausmeier.cutoff_phi(0.5, 1.0) == 1.0
    assert klausmeier.cutoff_phi(2.5, 1.0) == 0.0
    ev = klausmeier.eigenvalues(1, "periodic", 8)
    assert ev[1] == pytest.approx(4 * math.pi**2)
