import math

import numpy as np
import pytest
import torch

from pinc.diffcore import Jet, curl, eval_with_input_jacobian
from pinc.fields import FieldSample, PExponent
from pinc.loss import (
    CSV_HEADER,
    CurlTarget,
    Formulation,
    LossMode,
    LossWeights,
    TrainingFault,
    area_term,
    aux_match_term,
    boundary_term,
    curl_term,
    grad_match_term,
    smeared_delta,
    total_loss,
)
from pinc.network import MLPConfig, Params, init_geometric, init_kaiming
from pinc.verify import param_gradient_audit


def T(rows):
    return torch.tensor(rows, dtype=torch.float64)


def sample(grad_u, G=None, G_tilde=None, curl_gt=None, u=None):
    n = len(grad_u)
    z = torch.zeros(n, 3, dtype=torch.float64)
    return FieldSample(
        x=z, u=T([0.0] * n) if u is None else T(u), grad_u=T(grad_u),
        G=z if G is None else T(G), G_tilde=z if G_tilde is None else T(G_tilde),
        curl_G_tilde=z if curl_gt is None else curl_gt,
    )


def test_boundary_term_examples():
    assert float(boundary_term(T([0.0, 0.0]))) == 0.0
    assert float(boundary_term(T([1.0, -1.0]))) == 1.0
    assert float(boundary_term(T([0.5, 0.1, 0.0]))) == pytest.approx(0.2, abs=1e-15)
    with pytest.raises(ValueError):
        boundary_term(T([]))


def test_grad_match_examples():
    assert float(grad_match_term(sample([[1, 2, 3]], G=[[1, 2, 3]]))) == 0.0
    assert float(grad_match_term(sample([[1, 0, 0]] * 4))) == 1.0
    assert float(grad_match_term(sample([[1, 0, 0], [0, 2, 0]]))) == 2.5


def test_aux_match_examples():
    assert float(aux_match_term(sample([[0, 0, 0]], G=[[0.6, 0.8, 0]], G_tilde=[[0.6, 0.8, 0]]))) == 0.0
    assert float(aux_match_term(sample([[0, 0, 0]] * 3, G=[[1, 0, 0]] * 3))) == 1.0
    assert float(aux_match_term(sample([[0, 0, 0]] * 2, G=[[1, 0, 0], [0, 0, 2]]))) == 2.5


def _field_curl(fn):
    x = torch.tensor(np.random.default_rng(0).uniform(-1, 1, (30, 3)))
    _, jac = eval_with_input_jacobian(None, x, lambda _, j: fn(j))
    return curl(jac)


def test_curl_term_examples():
    rot = _field_curl(lambda j: Jet.cat([-j[1:2], j[0:1], j[0:1] * 0.0]))
    assert float(curl_term(sample([[0, 0, 0]] * 30, curl_gt=rot), LossMode())) == pytest.approx(4.0, abs=1e-12)
    # gradient of x^2 y + z: curl free
    cf = _field_curl(lambda j: Jet.cat([j[0:1] * j[1:2] * 2.0, j[0:1] * j[0:1], j[2:3] * 0.0 + 1.0]))
    assert float(curl_term(sample([[0, 0, 0]] * 30, curl_gt=cf), LossMode())) <= 1e-10
    off = LossMode(curl_target=CurlTarget.OFF)
    assert float(curl_term(sample([[0, 0, 0]] * 30, curl_gt=rot), off)) == 0.0


def test_smeared_delta_and_area():
    assert float(smeared_delta(T(0.0), 1.0)) == 1.0
    assert float(smeared_delta(T(10.0), 1.0)) < 1e-8
    assert float(area_term(sample([[1, 0, 0], [0, 1, 0]], u=[0, 0]), 1.0)) == 1.0


def test_loss_weights_validation():
    assert LossWeights() == LossWeights(0.1, 1e-4, 5e-4, 0.1, 1.0, 0.1)
    with pytest.raises(ValueError):
        LossWeights(lambda1=-1)
    with pytest.raises(ValueError):
        LossWeights(epsilon=0)


def _batches(seed=0, n=16):
    rng = np.random.default_rng(seed)
    return torch.from_numpy(rng.uniform(-1, 1, (n, 3))), torch.from_numpy(rng.uniform(-1.1, 1.1, (2 * n, 3)))


def test_total_is_weighted_sum_and_linear_in_weights(tiny_net):
    xs, xc = _batches()
    w = LossWeights(0.3, 0.2, 0.7, 0.05)
    br = total_loss(tiny_net, xs, xc, w)
    f = br.as_floats()
    expect = f["boundary"] + 0.3 * f["grad_match"] + 0.2 * f["aux_match"] + 0.7 * f["curl"] + 0.05 * f["area"]
    assert f["total"] == pytest.approx(expect, rel=1e-14)
    assert all(f[k] >= 0 for k in f)
    only_boundary = total_loss(tiny_net, xs, xc, LossWeights(0, 0, 0, 0)).as_floats()
    assert only_boundary["total"] == only_boundary["boundary"]
    doubled = total_loss(tiny_net, xs, xc, LossWeights(0.6, 0.2, 0.7, 0.05)).as_floats()
    assert doubled["total"] - f["total"] == pytest.approx(0.3 * f["grad_match"], rel=1e-12)


def test_all_residuals_zero_gives_zero_total():
    # all weights zero, boundary on a net that is identically zero
    cfg = MLPConfig(depth=2, width=16, skip_layer=1)
    net = Params(torch.zeros(cfg.param_count(), dtype=torch.float64), cfg)
    xs, xc = _batches()
    br = total_loss(net, xs, xc, LossWeights(0, 0, 0, 0), LossMode(curl_target="off", area_term=False))
    assert float(br.total.detach()) == 0.0


def test_terms_are_permutation_invariant(tiny_net):
    xs, xc = _batches(1)
    a = total_loss(tiny_net, xs, xc).as_floats()
    b = total_loss(tiny_net, xs.flip(0), xc[torch.randperm(len(xc), generator=torch.Generator().manual_seed(0))]).as_floats()
    for k in a:
        assert a[k] == pytest.approx(b[k], rel=1e-12, abs=1e-15)


def test_curl_off_reduces_to_split_objective(tiny_net):
    xs, xc = _batches(2)
    br = total_loss(tiny_net, xs, xc, mode=LossMode(curl_target="off", area_term=False)).as_floats()
    assert br["aux_match"] == 0 and br["curl"] == 0 and br["area"] == 0
    assert br["total"] == pytest.approx(br["boundary"] + 0.1 * br["grad_match"], rel=1e-14)


def test_curl_on_G_differs_from_on_G_tilde(tiny_net):
    xs, xc = _batches(3)
    a = total_loss(tiny_net, xs, xc, mode=LossMode(curl_target="on_G")).as_floats()
    b = total_loss(tiny_net, xs, xc).as_floats()
    assert a["curl"] != b["curl"] and a["grad_match"] == b["grad_match"]


def test_eikonal_split_mode():
    cfg = MLPConfig(depth=2, width=16, skip_layer=1, out_dim=4)
    net = init_kaiming(cfg, seed=0)
    xs, xc = _batches(4)
    mode = LossMode(formulation=Formulation.EIKONAL_SPLIT, curl_target="on_G")
    br = total_loss(net, xs, xc, LossWeights(eta_baseline=0.25), mode, PExponent(3)).as_floats()
    assert br["aux_match"] == br["curl"] == br["area"] == 0
    assert br["total"] == pytest.approx(br["boundary"] + 0.25 * br["grad_match"], rel=1e-14)
    with pytest.raises(ValueError):
        total_loss(init_kaiming(MLPConfig(depth=2, width=16, skip_layer=1), 0), xs, xc, mode=mode)


def test_parameter_gradient_matches_differences():
    net = init_kaiming(MLPConfig(depth=2, width=16, skip_layer=1), seed=7)
    xs, xc = _batches(5, n=8)
    xc = xc[:8]
    for mode in (LossMode(), LossMode(curl_target="on_G")):
        rel = param_gradient_audit(lambda prm: total_loss(prm, xs, xc, mode=mode).total, net, h=1e-5)
        assert rel < 1e-4


def test_projection_branch_is_exercised():
    net = init_kaiming(MLPConfig(depth=2, width=16, skip_layer=1), seed=7)
    from pinc.fields import sample_fields

    with torch.no_grad():
        fs = sample_fields(net, _batches(5, n=8)[1])
        from pinc.network import forward

        r = torch.linalg.vector_norm(forward(net, _batches(5, n=8)[1]).psi_tilde, dim=-1)
    assert (r > 1).any() and (r < 1).any(), "both projection branches should be active"
    assert torch.isfinite(fs.curl_G_tilde).all()


def test_nan_term_raises_training_fault(tiny_net):
    flat = tiny_net.flat.detach().clone()
    flat[-7] = math.nan  # bias of the u head
    bad = Params(flat, tiny_net.cfg)
    xs, xc = _batches()
    with pytest.raises(TrainingFault, match="boundary"):
        total_loss(bad, xs, xc)


def test_csv_row_format(tiny_net):
    xs, xc = _batches()
    row = total_loss(tiny_net, xs, xc).csv_row(12)
    assert CSV_HEADER == "iter,boundary,grad_match,aux_match,curl,area,total"
    parts = row.split(",")
    assert parts[0] == "12" and len(parts) == 7
    assert all(math.isfinite(float(v)) for v in parts[1:])


def test_empty_batches_rejected(tiny_net):
    with pytest.raises(ValueError):
        total_loss(tiny_net, torch.zeros(0, 3), torch.zeros(4, 3))
    with pytest.raises(ValueError):
        total_loss(tiny_net, torch.zeros(4, 3), torch.zeros(0, 3))


def test_geometric_net_loss_is_finite():
    net = init_geometric(MLPConfig(depth=2, width=16, skip_layer=1))
    xs, xc = _batches()
    assert math.isfinite(float(total_loss(net, xs, xc).total.detach()))
