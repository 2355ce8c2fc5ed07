import math

import numpy as np
import pytest
import torch

from pinc import diffcore, fields, verify
from pinc.network import MLPConfig, Params, init_geometric
from pinc.verify import (
    CURL_ENERGY,
    AnalyticShape,
    analytic_sdf,
    finite_difference_audit,
    run_checks,
    synth_cloud,
    curl_counterexample_energies,
)
from pinc.sampler import make_rng


def test_sphere_sdf_examples():
    s = AnalyticShape.sphere(0.5)
    assert analytic_sdf(s, [0, 0, 0])[0] == 0.5
    u, g = analytic_sdf(s, [1.0, 0, 0])
    assert u == -0.5 and g.tolist() == [-1.0, 0.0, 0.0]


def test_cube_sdf_examples():
    c = AnalyticShape.cube(1.0)
    assert analytic_sdf(c, [0.5, 0, 0])[0] == 0.0
    assert analytic_sdf(c, [0.7, 0.7, 0.7])[0] == pytest.approx(-0.2 * math.sqrt(3), rel=1e-12)
    assert analytic_sdf(c, [0.0, 0.0, 0.0])[0] == pytest.approx(0.5)


def test_shape_validation():
    with pytest.raises(ValueError):
        AnalyticShape("torus")
    with pytest.raises(ValueError):
        AnalyticShape.sphere(-1)


@pytest.mark.parametrize("shape", [AnalyticShape.sphere(0.5), AnalyticShape.cube(1.0)])
def test_sdf_gradient_has_unit_norm(shape):
    x = make_rng(0, "sdf").uniform(-1, 1, (10_000, 3))
    _, g = analytic_sdf(shape, x)
    np.testing.assert_allclose(np.linalg.norm(g, axis=1), 1.0, atol=1e-12)
    # and it is the derivative of u away from kinks
    h = 1e-6
    u_p, _ = analytic_sdf(shape, x[:50] + h * np.array([1.0, 0, 0]))
    u_m, _ = analytic_sdf(shape, x[:50] - h * np.array([1.0, 0, 0]))
    fd = (u_p - u_m) / (2 * h)
    assert np.mean(np.abs(fd - g[:50, 0]) < 1e-6) > 0.9


def test_synth_sphere_cloud():
    c = synth_cloud(AnalyticShape.sphere(0.5), 500, make_rng(0, "c"))
    np.testing.assert_allclose(np.linalg.norm(c.points, axis=1), 0.5, atol=1e-12)
    np.testing.assert_allclose(c.normals, c.points / 0.5, atol=1e-12)


def test_synth_cube_cloud_is_face_uniform():
    n = 60_000
    c = synth_cloud(AnalyticShape.cube(1.0), n, make_rng(0, "c"))
    assert np.all(np.isclose(np.abs(c.points).max(axis=1), 0.5))
    counts = np.array([np.sum(np.isclose(c.points[:, a] * s, 0.5)) for a in range(3) for s in (1, -1)])
    sigma = np.sqrt(n * (1 / 6) * (5 / 6))
    assert np.all(np.abs(counts - n / 6) < 4 * sigma)


@pytest.mark.parametrize("n", [1, 2, 4, 8])
def test_harness_splitting_energy(n):
    split, _ = curl_counterexample_energies(n)
    assert split == pytest.approx(1 / (2 * n * n), abs=1e-6)


def test_harness_curl_energy_is_n_independent():
    energies = [curl_counterexample_energies(n)[1] for n in (1, 2, 4, 8)]
    # curl of (0, sin(2 pi n x)/n, 0) is (0, 0, 2 pi cos(2 pi n x)): energy 2 pi^2 for all n
    for e in energies:
        assert e == pytest.approx(CURL_ENERGY, abs=1e-3)


def test_harness_ratio_and_u_independence():
    e = {n: curl_counterexample_energies(n)[0] for n in (1, 2, 4, 8)}
    for n in (1, 2, 4):
        assert e[n] / e[2 * n] == pytest.approx(4.0, rel=0.01)
    for n in (1, 3):
        assert curl_counterexample_energies(n, smooth_u=True) == pytest.approx(curl_counterexample_energies(n), abs=1e-9)


def test_harness_one_dimensional_reduction_matches_full_quadrature():
    for n in (1, 2):
        assert curl_counterexample_energies(n, 48, full_3d=True) == pytest.approx(curl_counterexample_energies(n, 48), rel=1e-9)
    with pytest.raises(ValueError):
        curl_counterexample_energies(0)


def test_fd_audit_behaviour(rng):
    net = init_geometric(MLPConfig(depth=2, width=16, skip_layer=1), seed=0)
    pts = rng.uniform(-1, 1, (20, 3))
    small = finite_difference_audit(net, pts, h=1e-4)
    large = finite_difference_audit(net, pts, h=0.1)
    assert small.max_rel_err < 1e-5 < large.max_rel_err
    cfg = MLPConfig(depth=2, width=16, skip_layer=1)
    const = torch.zeros(cfg.param_count(), dtype=torch.float64)
    const[-7] = 0.3
    rep = finite_difference_audit(Params(const, cfg), pts)
    assert rep.max_rel_err == 0.0


def test_run_checks_all_pass():
    checks = run_checks(0)
    assert all(c.passed for c in checks), [c.line() for c in checks if not c.passed]
    assert all("tol=" in c.line() for c in checks)


def test_corrupted_curl_is_caught(monkeypatch):
    def bad_curl(jac):
        jac = torch.as_tensor(jac, dtype=torch.float64)
        return torch.stack((jac[..., 2, 1] - jac[..., 1, 2], jac[..., 0, 2] - jac[..., 2, 0],
                            jac[..., 1, 0] + jac[..., 0, 1]), dim=-1)

    monkeypatch.setattr(diffcore, "curl", bad_curl)
    monkeypatch.setattr(fields, "curl", bad_curl)
    failed = [c.name for c in verify.run_checks(0) if not c.passed]
    assert any("curl" in name for name in failed)
