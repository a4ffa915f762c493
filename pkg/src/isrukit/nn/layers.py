"""Layer primitives: 2-D convolution, max-pool, dense, dropout, activation,
and softmax cross-entropy.

All layer functions are pure: forward returns (output, cache) and backward
consumes the cache. Arrays are NHWC, row-major. The compute dtype follows
the parameter arrays, so the same network runs in float32 for training and
float64 for finite-difference gradient checks.
"""

from __future__ import annotations

import numpy as np

from .. import kernels
from ..activations import (
    ActivationSpec,
    alpha_gradient,
    derivative,
    forward as act_forward,
)


def same_padding(in_size: int, kernel: int, stride: int):
    """TensorFlow-style 'same' padding: output = ceil(in/stride), with any
    odd padding going to the bottom/right edge."""
    out = -(-in_size // stride)
    total = max((out - 1) * stride + kernel - in_size, 0)
    return out, total // 2, total - total // 2


def _im2col(xp: np.ndarray, kh: int, kw: int, stride: int):
    """Gather sliding windows of a padded NHWC batch into a matrix of shape
    (B*oh*ow, kh*kw*C)."""
    B, H, W, C = xp.shape
    oh = (H - kh) // stride + 1
    ow = (W - kw) // stride + 1
    sb, sh, sw, sc = xp.strides
    windows = np.lib.stride_tricks.as_strided(
        xp,
        shape=(B, oh, ow, kh, kw, C),
        strides=(sb, sh * stride, sw * stride, sh, sw, sc),
        writeable=False,
    )
    return np.ascontiguousarray(windows).reshape(B * oh * ow, kh * kw * C), oh, ow


def conv2d_forward(x, w, b, stride: int, padding: str):
    """x: (B,H,W,Cin), w: (kh,kw,Cin,Cout), b: (Cout,)."""
    B, H, W, _ = x.shape
    kh, kw, _, oc = w.shape
    if padding == "same":
        oh, pt, pb = same_padding(H, kh, stride)
        ow, pl, pr = same_padding(W, kw, stride)
    elif padding == "valid":
        pt = pb = pl = pr = 0
        oh = (H - kh) // stride + 1
        ow = (W - kw) // stride + 1
    else:
        raise ValueError(f"unknown padding {padding!r}")
    xp = np.pad(x, ((0, 0), (pt, pb), (pl, pr), (0, 0)))
    cols, oh2, ow2 = _im2col(xp, kh, kw, stride)
    out = cols @ w.reshape(-1, oc) + b
    cache = (cols, xp.shape, (pt, pl), x.shape, stride)
    return out.reshape(B, oh2, ow2, oc), cache


def conv2d_backward(dy, w, cache):
    cols, xp_shape, (pt, pl), x_shape, stride = cache
    B, oh, ow, oc = dy.shape
    kh, kw, ic, _ = w.shape
    dym = dy.reshape(-1, oc)
    dw = (cols.T @ dym).reshape(w.shape)
    db = dym.sum(axis=0)
    dcols = (dym @ w.reshape(-1, oc).T).reshape(B, oh, ow, kh, kw, ic)
    dxp = np.zeros(xp_shape, dtype=dy.dtype)
    for di in range(kh):
        for dj in range(kw):
            dxp[:, di : di + oh * stride : stride, dj : dj + ow * stride : stride, :] += (
                dcols[:, :, :, di, dj, :]
            )
    H, W = x_shape[1], x_shape[2]
    dx = dxp[:, pt : pt + H, pl : pl + W, :]
    return dx, dw, db


def maxpool_forward(x, size: int, stride: int):
    """Valid max pooling; ties route the gradient to the first (row-major)
    maximum in each window."""
    B, H, W, C = x.shape
    oh = (H - size) // stride + 1
    ow = (W - size) // stride + 1
    sb, sh, sw, sc = x.strides
    windows = np.lib.stride_tricks.as_strided(
        x,
        shape=(B, oh, ow, size, size, C),
        strides=(sb, sh * stride, sw * stride, sh, sw, sc),
        writeable=False,
    )
    flat = windows.reshape(B, oh, ow, size * size, C)
    idx = flat.argmax(axis=3)
    out = np.take_along_axis(flat, idx[:, :, :, None, :], axis=3)[:, :, :, 0, :]
    cache = (idx, x.shape, size, stride)
    return out, cache


def maxpool_backward(dy, cache):
    idx, x_shape, size, stride = cache
    B, oh, ow, C = dy.shape
    dx = np.zeros(x_shape, dtype=dy.dtype)
    bi, hi, wi, ci = np.indices((B, oh, ow, C), sparse=False)
    rows = hi * stride + idx // size
    cols = wi * stride + idx % size
    np.add.at(dx, (bi, rows, cols, ci), dy)
    return dx


def dense_forward(x, w, b):
    """x is flattened to (B, features) if it arrives with higher rank."""
    x2 = x.reshape(x.shape[0], -1)
    out = x2 @ w + b
    return out, (x2, x.shape)


def dense_backward(dy, w, cache):
    x2, x_shape = cache
    dw = x2.T @ dy
    db = dy.sum(axis=0)
    dx = (dy @ w.T).reshape(x_shape)
    return dx, dw, db


def dropout_forward(x, pkeep: float, train: bool, rng=None):
    """Inverted dropout: survivors are scaled by 1/pkeep at train time so
    evaluation is the identity."""
    if not train or pkeep >= 1.0:
        return x, None
    mask = (rng.random(x.shape) < pkeep).astype(x.dtype)
    return x * mask * x.dtype.type(1.0 / pkeep), mask


def dropout_backward(dy, mask, pkeep: float):
    if mask is None:
        return dy
    return dy * mask * dy.dtype.type(1.0 / pkeep)


def activation_forward(spec: ActivationSpec, x):
    """Elementwise activation; float32 arrays go through the batched
    kernels, float64 through the reference formulas."""
    if x.dtype == np.float32:
        out = np.empty_like(x)
        kernels.apply_forward(spec, x.ravel(), out.ravel())
        return out, x
    return np.asarray(act_forward(spec.kind, x, spec.alpha)), x


def activation_backward(spec: ActivationSpec, dy, x):
    if dy.dtype == np.float32 and x.dtype == np.float32:
        dx = np.empty_like(dy)
        kernels.apply_backward(spec, x.ravel(), dy.ravel(), dx.ravel())
        return dx
    return dy * np.asarray(derivative(spec.kind, x, spec.alpha))


def activation_alpha_grad(spec: ActivationSpec, dy, x):
    """Scalar gradient of the loss with respect to this layer's shared alpha:
    sum over the batch of upstream * d(activation)/d(alpha)."""
    d = np.asarray(alpha_gradient(spec.kind, x.astype(np.float64), spec.alpha))
    return float(np.sum(dy.astype(np.float64) * d))


def softmax(logits):
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def softmax_cross_entropy(logits, labels):
    """Mean cross-entropy over the batch and its gradient w.r.t. logits.

    labels are integer class ids. Uses the log-sum-exp form, so the loss is
    exact even for extreme logits.
    """
    B = logits.shape[0]
    z = logits - logits.max(axis=1, keepdims=True)
    logsumexp = np.log(np.sum(np.exp(z), axis=1))
    loss = float(np.mean(logsumexp - z[np.arange(B), labels]))
    p = softmax(logits)
    p[np.arange(B), labels] -= 1.0
    dlogits = (p / B).astype(logits.dtype)
    return loss, dlogits
