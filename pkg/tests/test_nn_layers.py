"""Per-layer forward/backward checks against finite differences (float64)."""

import numpy as np
import pytest

from activecam.nn import layers

RNG = np.random.default_rng(42)
H = 1e-6
TOL = 1e-4


def fd_on(array, loss_fn, analytic, h=H, tol=TOL):
    """Central differences over every entry of `array` vs the analytic grad."""
    flat = array.ravel()
    ana = analytic.ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        lp = loss_fn()
        flat[i] = orig - h
        lm = loss_fn()
        flat[i] = orig
        num = (lp - lm) / (2 * h)
        assert abs(num - ana[i]) <= max(tol * max(abs(num), abs(ana[i])), 1e-7), (
            f"index {i}: numeric {num}, analytic {ana[i]}"
        )


@pytest.mark.parametrize("stride", [1, 2])
def test_conv_gradients(stride):
    x = RNG.normal(size=(2, 3, 6, 8))
    kernel = RNG.normal(size=(4, 3, 3, 3)) * 0.3
    bias = RNG.normal(size=4) * 0.1
    r = RNG.normal(size=layers.conv2d_forward(x, kernel, bias, stride)[0].shape)

    def loss():
        return float((layers.conv2d_forward(x, kernel, bias, stride)[0] * r).sum())

    out, cache = layers.conv2d_forward(x, kernel, bias, stride)
    dx, dw, db = layers.conv2d_backward(r, cache, kernel)
    fd_on(x, loss, dx)
    fd_on(kernel, loss, dw)
    fd_on(bias, loss, db)


def test_conv_same_padding_shapes():
    x = np.zeros((1, 3, 48, 64))
    k = np.zeros((8, 3, 3, 3))
    b = np.zeros(8)
    assert layers.conv2d_forward(x, k, b, 1)[0].shape == (1, 8, 48, 64)
    assert layers.conv2d_forward(x, k, b, 2)[0].shape == (1, 8, 24, 32)


@pytest.mark.parametrize("mode", ["train", "infer"])
def test_batchnorm_gradients(mode):
    x = RNG.normal(size=(3, 4, 5, 6)) + 0.5
    gamma = RNG.uniform(0.5, 1.5, size=4)
    beta = RNG.normal(size=4) * 0.2
    rm = RNG.normal(size=4) * 0.1
    rv = RNG.uniform(0.5, 2.0, size=4)
    r = RNG.normal(size=x.shape)

    def loss():
        y, _, _, _ = layers.batchnorm_forward(x, gamma, beta, rm.copy(), rv.copy(), mode)
        return float((y * r).sum())

    _, cache, _, _ = layers.batchnorm_forward(x, gamma, beta, rm.copy(), rv.copy(), mode)
    dx, dgamma, dbeta = layers.batchnorm_backward(r, cache, gamma)
    fd_on(x, loss, dx)
    fd_on(gamma, loss, dgamma)
    fd_on(beta, loss, dbeta)


def test_batchnorm_train_statistics():
    x = RNG.normal(loc=3.0, scale=2.5, size=(8, 5, 12, 10))
    gamma = np.ones(5)
    beta = np.zeros(5)
    y, _, _, _ = layers.batchnorm_forward(x, gamma, beta, np.zeros(5), np.ones(5), "train")
    assert np.abs(y.mean(axis=(0, 2, 3))).max() < 1e-3
    assert np.abs(y.var(axis=(0, 2, 3)) - 1.0).max() < 1e-3


def test_batchnorm_running_stats_update():
    x = RNG.normal(loc=2.0, size=(4, 3, 6, 6))
    rm, rv = np.zeros(3), np.ones(3)
    _, _, new_m, new_v = layers.batchnorm_forward(x, np.ones(3), np.zeros(3), rm, rv, "train")
    mu = x.mean(axis=(0, 2, 3))
    assert np.allclose(new_m, 0.1 * mu, atol=1e-6)
    _, _, same_m, same_v = layers.batchnorm_forward(x, np.ones(3), np.zeros(3), rm, rv, "infer")
    assert np.array_equal(same_m, rm) and np.array_equal(same_v, rv)


def test_relu_and_leaky_gradients():
    # inputs kept away from the kink at 0
    x = RNG.normal(size=(3, 20))
    x = np.where(np.abs(x) < 0.05, 0.2, x)
    r = RNG.normal(size=x.shape)

    def loss_relu():
        return float((layers.relu_forward(x)[0] * r).sum())

    _, mask = layers.relu_forward(x)
    fd_on(x, loss_relu, layers.relu_backward(r, mask))

    def loss_leaky():
        return float((layers.leakyrelu_forward(x, 0.1)[0] * r).sum())

    _, cache = layers.leakyrelu_forward(x, 0.1)
    fd_on(x, loss_leaky, layers.leakyrelu_backward(r, cache))


def test_tanh_gradient_and_bound():
    x = RNG.normal(size=(4, 6)) * 3
    r = RNG.normal(size=x.shape)
    y, cache = layers.tanh_forward(x)
    assert np.all(np.abs(y) <= 1.0)

    def loss():
        return float((layers.tanh_forward(x)[0] * r).sum())

    fd_on(x, loss, layers.tanh_backward(r, cache))


def test_dense_gradients():
    x = RNG.normal(size=(3, 7))
    w = RNG.normal(size=(7, 4)) * 0.4
    b = RNG.normal(size=4) * 0.1
    r = RNG.normal(size=(3, 4))

    def loss():
        return float((layers.dense_forward(x, w, b)[0] * r).sum())

    _, cache = layers.dense_forward(x, w, b)
    dx, dw, db = layers.dense_backward(r, cache, w)
    fd_on(x, loss, dx)
    fd_on(w, loss, dw)
    fd_on(b, loss, db)


def test_dropout_train_and_infer():
    x = RNG.normal(size=(4, 10))
    y_infer, mask = layers.dropout_forward(x, 0.5, "infer", RNG)
    assert mask is None and np.array_equal(y_infer, x)
    rng = np.random.default_rng(3)
    y, mask = layers.dropout_forward(x, 0.5, "train", rng)
    # inverted dropout: kept units scaled by 1/(1-rate)
    kept = mask > 0
    assert np.allclose(y[kept], x[kept] * 2.0)
    assert np.all(y[~kept] == 0)
    dy = RNG.normal(size=x.shape)
    assert np.array_equal(layers.dropout_backward(dy, mask), dy * mask)
    assert np.array_equal(layers.dropout_backward(dy, None), dy)


def test_channel_mean_gradient_and_permutation_invariance():
    x = RNG.normal(size=(2, 6, 4, 5))
    y, c = layers.channel_mean_forward(x)
    assert y.shape == (2, 1, 4, 5)
    perm = RNG.permutation(6)
    y_perm, _ = layers.channel_mean_forward(x[:, perm])
    assert np.allclose(y, y_perm)

    r = RNG.normal(size=y.shape)

    def loss():
        return float((layers.channel_mean_forward(x)[0] * r).sum())

    fd_on(x, loss, layers.channel_mean_backward(r, c))


def test_elementwise_mul_gradients():
    a = RNG.normal(size=(2, 1, 3, 4))
    b = RNG.normal(size=(2, 1, 3, 4))
    r = RNG.normal(size=a.shape)

    def loss():
        return float((layers.elementwise_mul_forward(a, b)[0] * r).sum())

    _, cache = layers.elementwise_mul_forward(a, b)
    da, db = layers.elementwise_mul_backward(r, cache)
    fd_on(a, loss, da)
    fd_on(b, loss, db)


def test_flatten_round_trip():
    x = RNG.normal(size=(3, 2, 4, 5))
    y, shape = layers.flatten_forward(x)
    assert y.shape == (3, 40)
    assert np.array_equal(layers.flatten_backward(y, shape), x)


def test_im2col_col2im_adjoint():
    # <im2col(x), c> == <x, col2im(c)> for all c: the pair is adjoint
    x = RNG.normal(size=(2, 3, 6, 8))
    cols = layers.im2col(x, 3, 3, 2, 1)
    c = RNG.normal(size=cols.shape)
    lhs = float((cols * c).sum())
    rhs = float((x * layers.col2im(c, x.shape, 3, 3, 2, 1)).sum())
    assert lhs == pytest.approx(rhs, rel=1e-10)
