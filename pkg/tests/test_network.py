import math

import numpy as np
import pytest
import torch

from pinc.diffcore import ConfigError
from pinc.network import (
    MLPConfig,
    Params,
    forward,
    forward_value,
    init_geometric,
    init_kaiming,
    load_checkpoint,
    save_checkpoint,
    softplus,
)


def test_full_scale_parameter_count():
    # 8 hidden layers of 512, input re-joined before the 5th linear map, so the
    # 4th hidden layer is 512 - 3 = 509 wide; 7 outputs.
    expected = (
        (3 * 512 + 512)
        + 2 * (512 * 512 + 512)
        + (512 * 509 + 509)
        + 4 * (512 * 512 + 512)
        + (512 * 7 + 7)
    )
    assert expected == 1_842_692
    assert MLPConfig.full_scale().param_count() == expected


def test_config_validation():
    with pytest.raises(ConfigError):
        MLPConfig(width=0)
    with pytest.raises(ConfigError):
        MLPConfig(depth=1, skip_layer=1)
    with pytest.raises(ConfigError):
        MLPConfig(depth=4, skip_layer=4)
    with pytest.raises(ConfigError):
        MLPConfig(out_dim=5)
    with pytest.raises(ConfigError):
        init_kaiming(MLPConfig(width=0))


def test_params_size_mismatch_is_config_error():
    with pytest.raises(ConfigError):
        Params(torch.zeros(10), MLPConfig(depth=2, width=16, skip_layer=1))


def test_softplus_values():
    assert float(softplus(torch.tensor(0.0, dtype=torch.float64))) == pytest.approx(math.log(2) / 100, rel=1e-12)
    assert float(softplus(torch.tensor(1.0, dtype=torch.float64))) - 1.0 < 1e-8
    big = softplus(torch.tensor([1e4], dtype=torch.float64))
    assert torch.isfinite(big).all()


def test_geometric_init_sign_and_zero_crossing():
    net = init_geometric(MLPConfig(), seed=0, radius=0.5)
    with torch.no_grad():
        assert float(forward_value(net, torch.zeros(1, 3))[0, 0]) > 0
        assert float(forward_value(net, torch.tensor([[0.9, 0.0, 0.0]]))[0, 0]) < 0
        t = torch.linspace(0, 1.0, 401, dtype=torch.float64)
        for axis in range(3):
            for sign in (1.0, -1.0):
                pts = torch.zeros(401, 3, dtype=torch.float64)
                pts[:, axis] = sign * t
                u = forward_value(net, pts)[:, 0].numpy()
                crossing = t.numpy()[np.argmax(u < 0)]
                assert abs(crossing - 0.5) <= 0.25
                # the apex is flat to ~1e-4; the profile falls strictly beyond it
                assert np.all(np.diff(u[40:]) < 0)
                assert u[:40].max() - u[0] < 1e-3


def test_geometric_init_aux_heads_small():
    net = init_geometric(MLPConfig(), seed=0)
    w, _ = net.layers()[-1]
    assert float(w[1:].detach().std()) == pytest.approx(1e-4, rel=0.1)


def test_init_determinism():
    cfg = MLPConfig(depth=2, width=16, skip_layer=1)
    assert init_geometric(cfg, seed=4) == init_geometric(cfg, seed=4)
    assert not init_geometric(cfg, seed=4) == init_geometric(cfg, seed=5)
    assert init_kaiming(cfg, seed=4) == init_kaiming(cfg, seed=4)
    assert not init_kaiming(cfg, seed=4) == init_kaiming(cfg, seed=5)


def test_kaiming_bounds():
    cfg = MLPConfig()
    net = init_kaiming(cfg, seed=1)
    for (o, i), (w, b) in zip(cfg.layer_shapes(), net.layers()):
        assert float(w.detach().abs().max()) <= math.sqrt(6.0 / i)


def test_skip_connection_with_hand_built_params():
    cfg = MLPConfig(depth=2, width=8, skip_layer=1)
    shapes = cfg.layer_shapes()
    assert shapes == [(5, 3), (8, 8), (7, 8)]
    w0, b0 = np.zeros((5, 3)), np.zeros(5)
    w1, b1 = np.zeros((8, 8)), np.zeros(8)
    w1[0, 5] = w1[1, 6] = w1[2, 7] = 1.0  # the re-joined input sits in columns 5..7
    b1[:3] = 1.0
    w2, b2 = np.zeros((7, 8)), np.zeros(7)
    w2[0, 0], w2[1, 1], w2[2, 2] = 1.0, 2.0, -1.0
    flat = np.concatenate([a.ravel() for a in (w0, b0, w1, b1, w2, b2)])
    net = Params(torch.from_numpy(flat), cfg)
    x = np.array([[0.3, -0.2, 0.5]])

    def sp(z):
        return np.logaddexp(100 * z, 0) / 100

    h = sp(x[0] / math.sqrt(2) + 1.0)
    with torch.no_grad():
        out = forward_value(net, torch.from_numpy(x)).numpy()[0]
    np.testing.assert_allclose(out[:3], [h[0], 2 * h[1], -h[2]], rtol=1e-14)
    np.testing.assert_allclose(out[3:], 0.0)


def test_forward_is_pure_and_layout(tiny_net):
    x = torch.tensor(np.random.default_rng(0).uniform(-1, 1, (5, 3)))
    a, b = forward(tiny_net, x), forward(tiny_net, x)
    assert torch.equal(a.outputs, b.outputs) and torch.equal(a.jacobian, b.jacobian)
    assert a.outputs.shape == (5, 7) and a.jacobian.shape == (5, 7, 3)
    assert torch.equal(a.psi, a.outputs[:, 1:4]) and torch.equal(a.psi_tilde, a.outputs[:, 4:7])
    with torch.no_grad():
        assert torch.allclose(forward_value(tiny_net, x), a.outputs, rtol=0, atol=1e-15)


def test_forward_rejects_non_finite(tiny_net):
    with pytest.raises(ValueError):
        forward(tiny_net, torch.tensor([[0.0, float("nan"), 0.0]]))


def test_checkpoint_round_trip_is_bit_exact(tmp_path, tiny_net):
    path = tmp_path / "net.pinc"
    save_checkpoint(tiny_net, path)
    back = load_checkpoint(path)
    assert back == tiny_net
    assert path.read_bytes()[:5] == b"PINC1"
    save_checkpoint(back, tmp_path / "again.pinc")
    assert (tmp_path / "again.pinc").read_bytes() == path.read_bytes()


def test_checkpoint_rejects_garbage(tmp_path, tiny_net):
    bad = tmp_path / "bad.pinc"
    bad.write_bytes(b"nope")
    with pytest.raises(ConfigError):
        load_checkpoint(bad)
    save_checkpoint(tiny_net, tmp_path / "ok.pinc")
    bad.write_bytes((tmp_path / "ok.pinc").read_bytes()[:-8])
    with pytest.raises(ConfigError):
        load_checkpoint(bad)
