"""Layer primitives: forward plus exact backward for each kind.

Feature maps are (N, C, H, W); dense activations are (N, D).  All
functions are dtype-agnostic so the gradient-check oracle can run the
whole stack in float64.
"""

from __future__ import annotations

import numpy as np


def im2col(x: np.ndarray, kh: int, kw: int, stride: int, pad: int) -> np.ndarray:
    """Unfold (N,C,H,W) into (N, C*kh*kw, OH*OW) patch columns."""
    n, c, h, w = x.shape
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    oh = (h + 2 * pad - kh) // stride + 1
    ow = (w + 2 * pad - kw) // stride + 1
    s0, s1, s2, s3 = xp.strides
    view = np.lib.stride_tricks.as_strided(
        xp,
        shape=(n, c, kh, kw, oh, ow),
        strides=(s0, s1, s2, s3, s2 * stride, s3 * stride),
        writeable=False,
    )
    return np.ascontiguousarray(view).reshape(n, c * kh * kw, oh * ow)


def col2im(cols: np.ndarray, x_shape: tuple, kh: int, kw: int, stride: int, pad: int) -> np.ndarray:
    """Scatter-add patch columns back onto the (N,C,H,W) input grid."""
    n, c, h, w = x_shape
    oh = (h + 2 * pad - kh) // stride + 1
    ow = (w + 2 * pad - kw) // stride + 1
    xp = np.zeros((n, c, h + 2 * pad, w + 2 * pad), dtype=cols.dtype)
    cols6 = cols.reshape(n, c, kh, kw, oh, ow)
    for i in range(kh):
        for j in range(kw):
            xp[:, :, i : i + stride * oh : stride, j : j + stride * ow : stride] += cols6[:, :, i, j]
    return xp[:, :, pad : pad + h, pad : pad + w]


def conv2d_forward(x, kernel, bias, stride):
    # "same" padding for odd kernels: output is ceil(input / stride)
    f, c, kh, kw = kernel.shape
    pad = kh // 2
    cols = im2col(x, kh, kw, stride, pad)
    wmat = kernel.reshape(f, -1)
    out = np.matmul(wmat, cols) + bias[None, :, None]
    n = x.shape[0]
    oh = (x.shape[2] + 2 * pad - kh) // stride + 1
    ow = (x.shape[3] + 2 * pad - kw) // stride + 1
    return out.reshape(n, f, oh, ow), (cols, x.shape, kernel.shape, stride, pad)


def conv2d_backward(dy, cache, kernel):
    cols, x_shape, k_shape, stride, pad = cache
    f, c, kh, kw = k_shape
    n = dy.shape[0]
    dyf = dy.reshape(n, f, -1)
    dw = np.matmul(dyf, cols.transpose(0, 2, 1)).sum(axis=0).reshape(k_shape)
    db = dyf.sum(axis=(0, 2))
    dcols = np.matmul(kernel.reshape(f, -1).T, dyf)
    dx = col2im(dcols, x_shape, kh, kw, stride, pad)
    return dx, dw, db


def batchnorm_forward(x, gamma, beta, running_mean, running_var, mode, momentum=0.9, eps=1e-5):
    """Per-channel normalization over (N, H, W).

    Train mode normalizes with batch statistics and returns updated running
    statistics; infer mode is a fixed affine map using the running ones.
    """
    g = gamma[None, :, None, None]
    b = beta[None, :, None, None]
    if mode == "train":
        mu = x.mean(axis=(0, 2, 3))
        var = x.var(axis=(0, 2, 3))
        inv_std = 1.0 / np.sqrt(var + eps)
        xhat = (x - mu[None, :, None, None]) * inv_std[None, :, None, None]
        new_mean = (momentum * running_mean + (1.0 - momentum) * mu).astype(running_mean.dtype)
        new_var = (momentum * running_var + (1.0 - momentum) * var).astype(running_var.dtype)
        cache = ("train", xhat, inv_std, x - mu[None, :, None, None])
        return g * xhat + b, cache, new_mean, new_var
    inv_std = 1.0 / np.sqrt(running_var + eps)
    xhat = (x - running_mean[None, :, None, None]) * inv_std[None, :, None, None]
    cache = ("infer", xhat, inv_std, None)
    return g * xhat + b, cache, running_mean, running_var


def batchnorm_backward(dy, cache, gamma):
    mode, xhat, inv_std, xc = cache
    dgamma = (dy * xhat).sum(axis=(0, 2, 3))
    dbeta = dy.sum(axis=(0, 2, 3))
    dxhat = dy * gamma[None, :, None, None]
    if mode == "infer":
        dx = dxhat * inv_std[None, :, None, None]
        return dx, dgamma, dbeta
    n, _, h, w = dy.shape
    m = n * h * w
    inv = inv_std[None, :, None, None]
    dvar = (dxhat * xc * (-0.5) * inv**3).sum(axis=(0, 2, 3))
    dmu = (-dxhat * inv).sum(axis=(0, 2, 3)) + dvar * (-2.0 / m) * xc.sum(axis=(0, 2, 3))
    dx = dxhat * inv + dvar[None, :, None, None] * 2.0 * xc / m + dmu[None, :, None, None] / m
    return dx, dgamma, dbeta


def relu_forward(x):
    return np.maximum(x, 0), x > 0


def relu_backward(dy, mask):
    return dy * mask


def leakyrelu_forward(x, slope):
    return np.where(x > 0, x, slope * x), (x > 0, slope)


def leakyrelu_backward(dy, cache):
    mask, slope = cache
    return np.where(mask, dy, slope * dy)


def tanh_forward(x):
    y = np.tanh(x)
    return y, y


def tanh_backward(dy, y):
    return dy * (1.0 - y * y)


def dense_forward(x, weight, bias):
    return x @ weight + bias, x


def dense_backward(dy, x, weight):
    return dy @ weight.T, x.T @ dy, dy.sum(axis=0)


def dropout_forward(x, rate, mode, rng):
    if mode == "infer" or rate == 0.0:
        return x, None
    mask = (rng.random(x.shape) >= rate).astype(x.dtype) / (1.0 - rate)
    return x * mask, mask


def dropout_backward(dy, mask):
    return dy if mask is None else dy * mask


def channel_mean_forward(x):
    return x.mean(axis=1, keepdims=True), x.shape[1]


def channel_mean_backward(dy, n_channels):
    return np.repeat(dy, n_channels, axis=1) / n_channels


def elementwise_mul_forward(a, b):
    return a * b, (a, b)


def elementwise_mul_backward(dy, cache):
    a, b = cache
    return dy * b, dy * a


def flatten_forward(x):
    return x.reshape(x.shape[0], -1), x.shape


def flatten_backward(dy, shape):
    return dy.reshape(shape)
