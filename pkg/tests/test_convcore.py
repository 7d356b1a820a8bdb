"""Tests for the depth-wise convolution kernels and their gradients."""

import numpy as np
import numpy.testing as npt
import pytest

from interacte.convcore import (
    affine,
    affine_backward,
    circular_conv2d,
    conv2d,
    conv2d_backward,
    dropout,
    dropout_backward,
    flatten,
    gradcheck,
    relu,
    relu_backward,
    sigmoid,
    zero_conv2d,
)


def delta_kernel(k=3):
    w = np.zeros((1, k, k))
    w[0, k // 2, k // 2] = 1.0
    return w


# ---------------------------------------------------------------------------
# forward identities


def test_delta_kernel_is_identity_both_modes():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(2, 5, 7))
    npt.assert_allclose(circular_conv2d(x, delta_kernel()), x, atol=1e-15)
    npt.assert_allclose(zero_conv2d(x, delta_kernel()), x, atol=1e-15)


def test_circular_single_tap_reads_wrapped_cell():
    x = np.arange(16.0).reshape(1, 4, 4)
    w = np.zeros((1, 3, 3))
    w[0, 0, 0] = 1.0  # tap at offset (-1, -1)
    out = circular_conv2d(x, w)
    # out[p, q] = x[(p + 1) mod 4, (q + 1) mod 4]
    npt.assert_array_equal(out[0], np.roll(x[0], (-1, -1), axis=(0, 1)))
    assert out[0, 0, 0] == x[0, 1, 1] == 5.0
    assert out[0, 3, 3] == x[0, 0, 0]


def test_all_ones_circular_sums_window_everywhere():
    x = np.ones((1, 4, 4))
    w = np.ones((1, 3, 3))
    npt.assert_allclose(circular_conv2d(x, w), 9.0)


def test_all_ones_zero_pad_border_counts():
    x = np.ones((1, 4, 4))
    w = np.ones((1, 3, 3))
    out = zero_conv2d(x, w)[0]
    assert out[0, 0] == 4.0      # corner windows see 2x2 cells
    assert out[0, 1] == 6.0      # edge windows see 2x3
    assert out[1, 1] == 9.0      # interior windows see the full 3x3
    assert out[3, 3] == 4.0


def test_modes_agree_away_from_border():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(3, 8, 9))
    w = rng.normal(size=(2, 3, 3))
    circ = circular_conv2d(x, w)
    zero = zero_conv2d(x, w)
    npt.assert_allclose(circ[:, 1:-1, 1:-1], zero[:, 1:-1, 1:-1], atol=1e-12)


def test_depthwise_channel_order():
    rng = np.random.default_rng(2)
    x = rng.normal(size=(3, 4, 4))
    w = rng.normal(size=(2, 3, 3))
    out = circular_conv2d(x, w)
    assert out.shape == (6, 4, 4)
    for c in range(3):
        for f in range(2):
            single = circular_conv2d(x[c:c + 1], w[f:f + 1])
            npt.assert_allclose(out[c * 2 + f], single[0], atol=1e-12)


def test_batched_matches_loop():
    rng = np.random.default_rng(3)
    x = rng.normal(size=(4, 2, 5, 5))
    w = rng.normal(size=(3, 3, 3))
    out = circular_conv2d(x, w)
    assert out.shape == (4, 6, 5, 5)
    for b in range(4):
        npt.assert_allclose(out[b], circular_conv2d(x[b], w), atol=1e-12)


def test_conv_linearity():
    rng = np.random.default_rng(4)
    x1 = rng.normal(size=(2, 6, 6))
    x2 = rng.normal(size=(2, 6, 6))
    w = rng.normal(size=(2, 3, 3))
    for mode in ("circular", "zero"):
        lhs = conv2d(2.5 * x1 - 1.25 * x2, w, mode)
        rhs = 2.5 * conv2d(x1, w, mode) - 1.25 * conv2d(x2, w, mode)
        npt.assert_allclose(lhs, rhs, atol=1e-12)


def test_circular_shift_equivariance():
    rng = np.random.default_rng(5)
    x = rng.normal(size=(1, 6, 8))
    w = rng.normal(size=(2, 3, 3))
    shifted = np.roll(x, (2, 3), axis=(-2, -1))
    npt.assert_allclose(circular_conv2d(shifted, w),
                        np.roll(circular_conv2d(x, w), (2, 3), axis=(-2, -1)),
                        atol=1e-12)


def test_conv_argument_errors():
    x = np.ones((1, 4, 4))
    with pytest.raises(ValueError):
        conv2d(x, np.ones((1, 2, 2)), "circular")  # even kernel
    with pytest.raises(ValueError):
        conv2d(x, np.ones((1, 3, 4)), "circular")  # non-square
    with pytest.raises(ValueError):
        conv2d(x, np.ones((1, 3, 3)), "reflect")
    with pytest.raises(ValueError):
        conv2d(np.ones((4, 4)), np.ones((1, 3, 3)), "zero")


# ---------------------------------------------------------------------------
# backward pass


@pytest.mark.parametrize("mode", ["circular", "zero"])
def test_conv_backward_is_adjoint(mode):
    # <conv(x), g> == <x, grad_x> for fixed filters (conv is linear in x),
    # and likewise <conv(x), g> == <w, grad_w> for fixed input
    rng = np.random.default_rng(6)
    x = rng.normal(size=(2, 3, 5, 6))
    w = rng.normal(size=(2, 3, 3))
    g = rng.normal(size=(2, 6, 5, 6))
    out = conv2d(x, w, mode)
    gx, gw = conv2d_backward(g, x, w, mode)
    npt.assert_allclose(np.vdot(out, g), np.vdot(x, gx), rtol=1e-12)
    npt.assert_allclose(np.vdot(out, g), np.vdot(w, gw), rtol=1e-12)


@pytest.mark.parametrize("mode", ["circular", "zero"])
def test_conv_backward_matches_finite_differences(mode):
    rng = np.random.default_rng(7)
    x = rng.normal(size=(1, 2, 4, 5))
    w = rng.normal(size=(2, 3, 3))
    probe = rng.normal(size=(1, 4, 4, 5))

    def fn(params):
        out = conv2d(params["x"], params["w"], mode)
        loss = float((out * probe).sum() + 0.5 * (out ** 2).sum())
        g = probe + out
        gx, gw = conv2d_backward(g, params["x"], params["w"], mode)
        return loss, {"x": gx, "w": gw}

    res = gradcheck(fn, {"x": x, "w": w}, eps=1e-5)
    assert res.max_rel_error < 1e-6


def test_conv_backward_shape_mismatch():
    x = np.ones((1, 2, 4, 4))
    w = np.ones((2, 3, 3))
    with pytest.raises(ValueError):
        conv2d_backward(np.ones((1, 3, 4, 4)), x, w, "circular")


# ---------------------------------------------------------------------------
# pointwise pieces


def test_relu_and_backward():
    x = np.array([-2.0, -0.5, 0.0, 0.5, 2.0])
    npt.assert_array_equal(relu(x), [0, 0, 0, 0.5, 2.0])
    g = np.ones_like(x)
    npt.assert_array_equal(relu_backward(g, x), [0, 0, 0, 1, 1])


def test_sigmoid_stable_and_symmetric():
    x = np.array([-1000.0, -10.0, 0.0, 10.0, 1000.0])
    out = sigmoid(x)
    assert np.all(np.isfinite(out))
    assert out[0] >= 0.0 and out[-1] <= 1.0
    assert out[2] == 0.5
    npt.assert_allclose(out + sigmoid(-x), 1.0, atol=1e-15)


def test_affine_backward_matches_finite_differences():
    rng = np.random.default_rng(8)
    x = rng.normal(size=(3, 4))
    w = rng.normal(size=(4, 5))
    b = rng.normal(size=5)
    probe = rng.normal(size=(3, 5))

    def fn(params):
        out = affine(params["x"], params["w"], params["b"])
        loss = float((out * probe).sum())
        gx, gw, gb = affine_backward(probe, params["x"], params["w"], with_bias=True)
        return loss, {"x": gx, "w": gw, "b": gb}

    res = gradcheck(fn, {"x": x, "w": w, "b": b}, eps=1e-4)
    # the loss is bilinear, so central differences are exact up to roundoff
    assert res.max_rel_error < 1e-9


def test_dropout_contract():
    rng = np.random.default_rng(9)
    x = rng.normal(size=(100, 100))
    y, mask = dropout(x, 0.0, rng, training=True)
    assert mask is None and y is x
    y, mask = dropout(x, 0.5, rng, training=False)
    assert mask is None and y is x
    y, mask = dropout(x, 0.3, rng, training=True)
    assert mask.dtype == bool
    # dropped coordinates are zero, kept ones are scaled by 1 / (1 - rate)
    npt.assert_array_equal(y[~mask], 0.0)
    npt.assert_allclose(y[mask], x[mask] / 0.7, rtol=1e-12)
    # inverted scaling keeps the expectation roughly unchanged
    assert abs(y.mean() - x.mean()) < 0.01
    with pytest.raises(ValueError):
        dropout(x, 1.0, rng, training=True)
    with pytest.raises(ValueError):
        dropout(x, 0.5, None, training=True)


def test_dropout_backward_uses_same_mask():
    rng = np.random.default_rng(10)
    x = rng.normal(size=(20, 20))
    y, mask = dropout(x, 0.4, rng, training=True)
    g = np.ones_like(x)
    gx = dropout_backward(g, mask, 0.4)
    npt.assert_array_equal(gx[~mask], 0.0)
    npt.assert_allclose(gx[mask], 1.0 / 0.6, rtol=1e-12)
    npt.assert_array_equal(dropout_backward(g, None, 0.4), g)


def test_flatten_row_major():
    x = np.arange(24.0).reshape(2, 3, 4)
    out = flatten(x)
    assert out.shape == (2, 12)
    npt.assert_array_equal(out[0], np.arange(12.0))


# ---------------------------------------------------------------------------
# gradcheck harness


def test_gradcheck_accepts_correct_gradient():
    a = np.random.default_rng(11).normal(size=(4, 4))

    def fn(params):
        x = params["x"]
        return float((x ** 3).sum()), {"x": 3 * x ** 2}

    res = gradcheck(fn, {"x": a.copy()}, eps=1e-5)
    assert res.status == "ok"
    assert res.max_rel_error < 1e-7
    assert res.n_coords == 16


def test_gradcheck_flags_planted_error():
    a = np.random.default_rng(12).normal(size=(3, 3))

    def fn(params):
        x = params["x"]
        return float((x ** 2).sum()), {"x": 3.0 * x}  # should be 2x

    res = gradcheck(fn, {"x": a.copy()}, eps=1e-6)
    assert res.max_rel_error > 0.3


def test_gradcheck_subsamples_large_tensors():
    big = np.random.default_rng(13).normal(size=2048)

    def fn(params):
        x = params["x"]
        return float((x ** 2).sum()), {"x": 2 * x}

    res = gradcheck(fn, {"x": big.copy()}, max_coords_per_tensor=64)
    assert res.n_coords == 64
    assert res.max_rel_error < 1e-6


def test_gradcheck_rejects_nonfinite_loss():
    def fn(params):
        return float("nan"), {"x": params["x"]}

    with pytest.raises(FloatingPointError):
        gradcheck(fn, {"x": np.ones(2)})


def test_gradcheck_requires_all_gradients():
    def fn(params):
        return 0.0, {}

    with pytest.raises(KeyError):
        gradcheck(fn, {"x": np.ones(2)})
