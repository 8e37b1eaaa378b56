import json
import math
import os

import numpy as np
import pytest

import sgdnoise


def test_seed_derivation_is_stable():
    assert sgdnoise.derive_seed(1, "batch", 3) == sgdnoise.derive_seed(1, "batch", 3)
    assert sgdnoise.derive_seed(1, "batch", 3) != sgdnoise.derive_seed(1, "batch", 4)


def test_effective_lr_and_two_point_limit():
    assert sgdnoise.effective_lr(0.1, 1.0, 7) == pytest.approx(0.1 * (1 + 0.9**7) / 2, rel=1e-14)
    omega = np.diag([1.0, 0.5])
    s = sgdnoise.baseline_covariance(0.1, omega)
    f = sgdnoise.two_point_covariance(0.1, omega, 5000)
    np.testing.assert_allclose(f, s / 2, rtol=1e-12)


def test_trajectory_and_kernel():
    ens = sgdnoise.Ensemble(d=4, omega=np.eye(4), c_norm=1.0, kind="gaussian_factor", seed=2)
    rec = sgdnoise.run_trajectory(ens, np.ones(4), sgdnoise.Schedule.constant(0.05), 50, 2, 7)
    again = sgdnoise.run_trajectory(ens, np.ones(4), sgdnoise.Schedule.constant(0.05), 50, 2, 7)
    assert len(rec.loss_global) == 51
    assert rec.loss_global == again.loss_global
    k = sgdnoise.swa_kernel(4)
    assert sum(k.weights) == pytest.approx(1.0)


def test_equivalent_schedule_replay():
    rng = np.random.default_rng(0)
    theta = rng.standard_normal(6)
    grads = rng.standard_normal((8, 6))
    base = sgdnoise.Schedule.constant(0.1)
    path = sgdnoise.frozen_gradient_path(theta, grads, base, 10)
    avg = sgdnoise.average_iterates(sgdnoise.swa_kernel(8), path)
    eq = sgdnoise.equivalent_schedule(base, "swa", 10, 18)
    rep = sgdnoise.frozen_gradient_replay(theta, grads, eq, 10)
    np.testing.assert_allclose(avg, rep, rtol=1e-10, atol=1e-12)


def test_config_errors_are_value_errors():
    with pytest.raises(ValueError, match="bogus"):
        sgdnoise.validate_config(json.dumps({"scenario": "basins", "bogus": 1}))


def test_run_scenario(tmp_path):
    cfg = {
        "scenario": "single_step_profile",
        "ensemble": {"d": 16, "m": 1, "omega": {"identity": True}},
        "batch_size": 4,
        "seeds": [1],
        "params": {"held_out_batches": 2, "grid_points": 6},
    }
    path = tmp_path / "profile.json"
    path.write_text(json.dumps(cfg))
    files, diverged = sgdnoise.run_scenario(str(path), str(tmp_path / "out"), None, 1, False)
    assert not diverged
    assert os.path.basename(str(files[-1])) == "manifest.json"
    manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert manifest["scenario"] == "single_step_profile"


def test_plateau():
    series = [2.0 + 5.0 * 0.99**t for t in range(3000)]
    rep = sgdnoise.detect_plateau(series, 200, 0.01)
    assert rep.found
    assert math.isclose(rep.plateau_value, 2.0, rel_tol=0.02)
