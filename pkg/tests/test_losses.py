"""Loss identities: invariances, linearity, and finite-difference gradients."""

import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import numeric_grad
from resdiffusion.losses import LossWeights, loss_cnn, loss_dwt, loss_fft, loss_gt


def rand(shape, seed):
    gen = torch.Generator().manual_seed(seed)
    return torch.randn(shape, generator=gen, dtype=torch.float64)


def test_all_losses_zero_on_identical_pairs():
    x = rand((2, 3, 8, 8), seed=1)
    weights = LossWeights()
    assert loss_gt(x, x).item() == 0.0
    assert loss_fft(x, x).item() == 0.0
    assert loss_dwt(x, x, 2).item() == 0.0
    assert loss_cnn(x, x, weights).item() == 0.0


def test_losses_are_symmetric():
    a, b = rand((3, 8, 8), seed=2), rand((3, 8, 8), seed=3)
    assert torch.isclose(loss_gt(a, b), loss_gt(b, a))
    assert torch.isclose(loss_fft(a, b), loss_fft(b, a))
    assert torch.isclose(loss_dwt(a, b, 2), loss_dwt(b, a, 2))


def test_fft_loss_invariant_under_circular_shift():
    a, b = rand((3, 16, 16), seed=4), rand((3, 16, 16), seed=5)
    base = loss_fft(a, b).item()
    for shift in [(1, 0), (0, 1), (3, 5), (7, 2)]:
        shifted = loss_fft(torch.roll(a, shifts=shift, dims=(-2, -1)), b).item()
        assert abs(shifted - base) < 1e-6


def test_dwt_loss_invariant_under_constant_offset():
    a, b = rand((3, 16, 16), seed=6), rand((3, 16, 16), seed=7)
    base = loss_dwt(a, b, 2).item()
    for offset in (0.5, -1.25, 10.0):
        assert abs(loss_dwt(a + offset, b, 2).item() - base) < 1e-6
        assert abs(loss_dwt(a, b + offset, 2).item() - base) < 1e-6


def test_combined_loss_linear_in_weights():
    a, b = rand((3, 8, 8), seed=8), rand((3, 8, 8), seed=9)
    l_g = loss_gt(a, b).item()
    l_f = loss_fft(a, b).item()
    l_d = loss_dwt(a, b, 2).item()
    for alpha in (0.0, 0.1, 0.5, 2.0):
        for beta in (0.0, 0.1, 1.0):
            combined = loss_cnn(a, b, LossWeights(alpha=alpha, beta=beta, dwt_levels=2)).item()
            assert abs(combined - (l_g + alpha * l_f + beta * l_d)) < 1e-7


@pytest.mark.parametrize("loss_fn", [
    loss_gt,
    loss_fft,
    lambda p, t: loss_dwt(p, t, 2),
    lambda p, t: loss_cnn(p, t, LossWeights(alpha=0.3, beta=0.2, dwt_levels=2)),
], ids=["gt", "fft", "dwt", "combined"])
def test_gradients_match_finite_differences(loss_fn):
    target = rand((4, 4), seed=11)
    pred = rand((4, 4), seed=12).requires_grad_(True)
    loss = loss_fn(pred, target)
    loss.backward()
    analytic = pred.grad.detach()
    numeric = numeric_grad(lambda x: loss_fn(x, target), pred, eps=1e-6)
    rel = (analytic - numeric).norm() / numeric.norm()
    assert rel.item() < 1e-4


def test_losses_reject_shape_mismatch():
    a = rand((3, 8, 8), seed=13)
    b = rand((3, 8, 4), seed=14)
    for fn in (loss_gt, loss_fft, lambda p, t: loss_dwt(p, t, 1)):
        with pytest.raises(ValueError, match="shape mismatch"):
            fn(a, b)


def test_weights_validation():
    with pytest.raises(ValueError, match="non-negative"):
        LossWeights(alpha=-0.1)
    with pytest.raises(ValueError, match="dwt_levels"):
        LossWeights(dwt_levels=0)


def test_fft_loss_discards_phase_but_spatial_loss_does_not():
    t = rand((8, 8), seed=15)
    shifted = torch.roll(t, shifts=(2, 3), dims=(-2, -1))
    assert loss_gt(shifted, t).item() > 0.1
    assert loss_fft(shifted, t).item() < 1e-9


@given(st.integers(0, 10_000), st.integers(1, 3), st.integers(1, 3))
@settings(max_examples=30, deadline=None)
def test_losses_nonnegative_property(seed, hb, wb):
    shape = (3, 4 * hb, 4 * wb)
    a = rand(shape, seed=seed)
    b = rand(shape, seed=seed + 1)
    assert loss_gt(a, b).item() >= 0.0
    assert loss_fft(a, b).item() >= 0.0
    assert loss_dwt(a, b, 2).item() >= 0.0
