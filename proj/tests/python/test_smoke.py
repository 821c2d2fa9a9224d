import json

import numpy as np
import pytest

kfplab = pytest.importorskip("kfplab")


def test_operator_structure():
    op = kfplab.velocity_operator(2.0, 0.2)
    L, s = op["L"], op["sqrtM"]
    assert np.abs(L - L.T).max() == 0.0
    assert np.linalg.norm(L @ s) <= 1e-10 * np.linalg.norm(s)
    assert np.linalg.eigvalsh(L).max() <= 1e-8
    assert op["cell"] * s @ s == pytest.approx(1.0, rel=1e-13)
    assert kfplab.coercivity_constant(2.0) > 0.0


def test_diffusion_coefficient_gaussian():
    d = kfplab.diffusion_coefficient(2.0, 0.2)
    assert abs(d["a_gamma"] - 1.0) <= 2 * 0.2**2
    assert d["agreement"] < 0.01
    lam = kfplab.leading_eigenvalue(2.0, 0.1)
    assert abs(lam.imag) <= 1e-10
    assert lam.real == pytest.approx(-d["a_gamma"] * 0.01, rel=1e-3)


def test_fits():
    t = np.linspace(1.0, 20.0, 40)
    assert kfplab.fit_power(t, 3.0 * t**-0.5)["exponent"] == pytest.approx(-0.5, abs=1e-8)
    assert kfplab.fit_exp(t, np.exp(-0.3 * t))["exponent"] == pytest.approx(-0.3, abs=1e-8)
    with pytest.raises(kfplab.ConfigError):
        kfplab.fit_power([1.0, 2.0], [1.0])


def test_config_hash_ignores_threads():
    a = kfplab.config_hash({"gamma": 1.0, "threads": 1})
    assert a == kfplab.config_hash(json.dumps({"gamma": 1.0, "threads": 4}))
    assert a != kfplab.config_hash({"gamma": 1.5})
    with pytest.raises(kfplab.ConfigError):
        kfplab.config_hash({"gama": 1})


def test_pipeline_stages(tmp_path):
    cfg = {"gamma": 2, "h_v": 0.4, "l_x": 16, "n_x": 64, "t_max": 3, "delta": 0.5}
    assert kfplab.run("check_operator", cfg, tmp_path) == 0
    assert kfplab.run("evolve", cfg, tmp_path) == 0
    head = (tmp_path / "trajectory.csv").read_text().splitlines()[0]
    assert kfplab.config_hash(cfg) in head
    with pytest.raises(kfplab.ConfigError):
        kfplab.run("evolve", cfg, tmp_path)
    assert kfplab.run("evolve", cfg, tmp_path, threads=2, force=True) == 0
    with pytest.raises(ValueError):
        kfplab.run("plot", cfg, tmp_path)
