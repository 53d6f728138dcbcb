"""Forward kernels and vector-Jacobian products for every primitive kind."""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .core import Primitive, Tensor, apply_primitive, register


class ShapeError(ValueError):
    """Raised when a primitive receives incompatible input shapes."""


def _fail(kind: str, message: str):
    raise ShapeError(f"{kind}: {message}")


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _align(kind: str, a_shape, b_shape):
    """Target shapes so that a per-channel operand broadcasts over a feature map.

    A ``B x C`` operand against ``B x C x H x W`` becomes ``B x C x 1 x 1``; a
    length-``C`` vector against ``C x H x W`` becomes ``C x 1 x 1``.  Anything
    else follows plain numpy broadcasting.
    """
    def fit(small, big):
        if len(small) == 2 and len(big) == 4 and small == big[:2]:
            return small + (1, 1)
        if len(small) == 1 and len(big) == 3 and small[0] == big[0]:
            return small + (1, 1)
        return small

    a_t, b_t = a_shape, b_shape
    if len(a_shape) < len(b_shape):
        a_t = fit(a_shape, b_shape)
    elif len(b_shape) < len(a_shape):
        b_t = fit(b_shape, a_shape)
    try:
        np.broadcast_shapes(a_t, b_t)
    except ValueError:
        _fail(kind, f"cannot broadcast operands of shape {a_shape} and {b_shape}")
    return a_t, b_t


@register
class Add(Primitive):
    kind = "add"

    def check(self, shapes, attrs):
        if len(shapes) != 2:
            _fail(self.kind, f"expects 2 inputs, got {len(shapes)}")
        _align(self.kind, *shapes)

    def forward(self, xs, attrs):
        a, b = xs
        a_t, b_t = _align(self.kind, a.shape, b.shape)
        return a.reshape(a_t) + b.reshape(b_t), (a.shape, b.shape, a_t, b_t)

    def backward(self, ctx, grad, needs, attrs):
        a_shape, b_shape, a_t, b_t = ctx
        ga = _unbroadcast(grad, a_t).reshape(a_shape) if needs[0] else None
        gb = _unbroadcast(grad, b_t).reshape(b_shape) if needs[1] else None
        return ga, gb


@register
class ElementwiseMul(Primitive):
    kind = "elementwise-mul"

    def check(self, shapes, attrs):
        if len(shapes) != 2:
            _fail(self.kind, f"expects 2 inputs, got {len(shapes)}")
        _align(self.kind, *shapes)

    def forward(self, xs, attrs):
        a, b = xs
        a_t, b_t = _align(self.kind, a.shape, b.shape)
        a_r, b_r = a.reshape(a_t), b.reshape(b_t)
        return a_r * b_r, (a_r, b_r, a.shape, b.shape)

    def backward(self, ctx, grad, needs, attrs):
        a_r, b_r, a_shape, b_shape = ctx
        ga = _unbroadcast(grad * b_r, a_r.shape).reshape(a_shape) if needs[0] else None
        gb = _unbroadcast(grad * a_r, b_r.shape).reshape(b_shape) if needs[1] else None
        return ga, gb


@register
class Relu(Primitive):
    kind = "relu"

    def forward(self, xs, attrs):
        (x,) = xs
        mask = x > 0
        return np.where(mask, x, 0.0).astype(x.dtype, copy=False), mask

    def backward(self, mask, grad, needs, attrs):
        return (grad * mask,)


@register
class Sigmoid(Primitive):
    kind = "sigmoid"

    def forward(self, xs, attrs):
        (x,) = xs
        # Split by sign so neither branch overflows.
        out = np.empty_like(x)
        pos = x >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
        ex = np.exp(x[~pos])
        out[~pos] = ex / (1.0 + ex)
        return out, out

    def backward(self, out, grad, needs, attrs):
        return (grad * out * (1.0 - out),)


@register
class Linear(Primitive):
    kind = "linear"

    def check(self, shapes, attrs):
        if len(shapes) not in (2, 3):
            _fail(self.kind, f"expects (x, weight[, bias]), got {len(shapes)} inputs")
        x, w = shapes[0], shapes[1]
        if len(w) != 2:
            _fail(self.kind, f"weight must be 2-D (out, in), got {w}")
        if len(x) not in (1, 2) or x[-1] != w[1]:
            _fail(self.kind, f"input feature dim {x[-1] if x else None} != weight in-dim {w[1]} (x {x}, weight {w})")
        if len(shapes) == 3 and shapes[2] != (w[0],):
            _fail(self.kind, f"bias shape {shapes[2]} != ({w[0]},)")

    def forward(self, xs, attrs):
        x, w = xs[0], xs[1]
        out = x @ w.T
        if len(xs) == 3:
            out = out + xs[2]
        return out, (x, w)

    def backward(self, ctx, grad, needs, attrs):
        x, w = ctx
        gx = grad @ w if needs[0] else None
        if needs[1]:
            gw = np.outer(grad, x) if x.ndim == 1 else grad.T @ x
        else:
            gw = None
        grads = [gx, gw]
        if len(needs) == 3:
            grads.append((grad if grad.ndim == 1 else grad.sum(axis=0)) if needs[2] else None)
        return tuple(grads)


@register
class Conv2d(Primitive):
    kind = "conv2d"

    def check(self, shapes, attrs):
        if len(shapes) not in (2, 3):
            _fail(self.kind, f"expects (x, weight[, bias]), got {len(shapes)} inputs")
        x, w = shapes[0], shapes[1]
        if len(x) != 4:
            _fail(self.kind, f"input must be B x C x H x W, got {x}")
        if len(w) != 4:
            _fail(self.kind, f"weight must be O x C x kh x kw, got {w}")
        if x[1] != w[1]:
            _fail(self.kind, f"input channels {x[1]} != weight in-channels {w[1]}")
        stride, pad = attrs.get("stride", 1), attrs.get("padding", 0)
        if stride < 1 or pad < 0:
            _fail(self.kind, f"invalid stride {stride} / padding {pad}")
        if x[2] + 2 * pad < w[2] or x[3] + 2 * pad < w[3]:
            _fail(self.kind, f"kernel {w[2]}x{w[3]} larger than padded input {x[2] + 2 * pad}x{x[3] + 2 * pad}")
        if len(shapes) == 3 and shapes[2] != (w[0],):
            _fail(self.kind, f"bias shape {shapes[2]} != ({w[0]},)")

    def forward(self, xs, attrs):
        x, w = xs[0], xs[1]
        stride, pad = attrs.get("stride", 1), attrs.get("padding", 0)
        kh, kw = w.shape[2], w.shape[3]
        xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x
        if kh == 1 and kw == 1:
            cols = xp[:, :, ::stride, ::stride]
            out = np.einsum("bchw,oc->bohw", cols, w[:, :, 0, 0], optimize=True)
        else:
            cols = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
            out = np.tensordot(cols, w, axes=([1, 4, 5], [1, 2, 3])).transpose(0, 3, 1, 2)
        if len(xs) == 3:
            out = out + xs[2][None, :, None, None]
        return np.ascontiguousarray(out), (cols, w, x.shape, xp.shape)

    def backward(self, ctx, grad, needs, attrs):
        cols, w, x_shape, xp_shape = ctx
        stride, pad = attrs.get("stride", 1), attrs.get("padding", 0)
        kh, kw = w.shape[2], w.shape[3]
        ho, wo = grad.shape[2], grad.shape[3]
        gx = gw = gb = None
        if needs[1]:
            if kh == 1 and kw == 1:
                gw = np.einsum("bohw,bchw->oc", grad, cols, optimize=True)[:, :, None, None]
            else:
                gw = np.tensordot(grad, cols, axes=([0, 2, 3], [0, 2, 3]))
        if needs[0]:
            gxp = np.zeros(xp_shape, dtype=grad.dtype)
            if kh == 1 and kw == 1:
                gxp[:, :, : stride * ho : stride, : stride * wo : stride] = np.einsum(
                    "bohw,oc->bchw", grad, w[:, :, 0, 0], optimize=True
                )
            else:
                # B x Ho x Wo x C x kh x kw, scattered back window by window.
                gcols = np.tensordot(grad, w, axes=([1], [0]))
                for i in range(kh):
                    for j in range(kw):
                        gxp[:, :, i : i + stride * ho : stride, j : j + stride * wo : stride] += gcols[
                            :, :, :, :, i, j
                        ].transpose(0, 3, 1, 2)
            gx = gxp[:, :, pad : pad + x_shape[2], pad : pad + x_shape[3]] if pad else gxp
        if len(needs) == 3 and needs[2]:
            gb = grad.sum(axis=(0, 2, 3))
        return (gx, gw, gb)[: len(needs)]


class _WindowPool(Primitive):
    def check(self, shapes, attrs):
        (x,) = shapes
        if len(x) != 4:
            _fail(self.kind, f"input must be B x C x H x W, got {x}")
        k = attrs.get("kernel", 2)
        if x[2] < k or x[3] < k:
            _fail(self.kind, f"kernel {k} larger than input {x[2]}x{x[3]}")

    @staticmethod
    def _windows(x, attrs):
        k = attrs.get("kernel", 2)
        s = attrs.get("stride", k)
        return sliding_window_view(x, (k, k), axis=(2, 3))[:, :, ::s, ::s], k, s


@register
class AvgPool(_WindowPool):
    kind = "avg-pool"

    def forward(self, xs, attrs):
        (x,) = xs
        win, k, s = self._windows(x, attrs)
        return win.mean(axis=(4, 5)), x.shape

    def backward(self, x_shape, grad, needs, attrs):
        k = attrs.get("kernel", 2)
        s = attrs.get("stride", k)
        ho, wo = grad.shape[2], grad.shape[3]
        gx = np.zeros(x_shape, dtype=grad.dtype)
        share = grad / (k * k)
        for i in range(k):
            for j in range(k):
                gx[:, :, i : i + s * ho : s, j : j + s * wo : s] += share
        return (gx,)


@register
class MaxPool(_WindowPool):
    kind = "max-pool"

    def forward(self, xs, attrs):
        (x,) = xs
        win, k, s = self._windows(x, attrs)
        flat = win.reshape(win.shape[:4] + (k * k,))
        arg = flat.argmax(axis=-1)
        out = np.take_along_axis(flat, arg[..., None], axis=-1)[..., 0]
        return out, (x.shape, arg)

    def backward(self, ctx, grad, needs, attrs):
        x_shape, arg = ctx
        k = attrs.get("kernel", 2)
        s = attrs.get("stride", k)
        ho, wo = grad.shape[2], grad.shape[3]
        gx = np.zeros(x_shape, dtype=grad.dtype)
        di, dj = np.divmod(arg, k)
        for i in range(k):
            for j in range(k):
                hit = (di == i) & (dj == j)
                gx[:, :, i : i + s * ho : s, j : j + s * wo : s] += grad * hit
        return (gx,)


def _pool_axes(kind, shape, attrs):
    axis = attrs.get("axis", "spatial")
    if len(shape) != 4:
        _fail(kind, f"input must be B x C x H x W, got {shape}")
    if axis == "spatial":
        return (2, 3), False
    if axis == "channel":
        return (1,), True
    _fail(kind, f"axis must be 'spatial' or 'channel', got {axis!r}")


@register
class GlobalAvgPool(Primitive):
    """Mean over H,W (-> B x C) or, with ``axis='channel'``, over C (-> B x 1 x H x W)."""

    kind = "global-avg-pool"

    def check(self, shapes, attrs):
        _pool_axes(self.kind, shapes[0], attrs)

    def forward(self, xs, attrs):
        (x,) = xs
        axes, keep = _pool_axes(self.kind, x.shape, attrs)
        return x.mean(axis=axes, keepdims=keep), (x.shape, axes)

    def backward(self, ctx, grad, needs, attrs):
        x_shape, axes = ctx
        n = int(np.prod([x_shape[a] for a in axes]))
        g = grad if grad.ndim == 4 else grad[:, :, None, None]
        return (np.broadcast_to(g / n, x_shape).copy(),)


@register
class GlobalMaxPool(Primitive):
    """Max over H,W (-> B x C) or, with ``axis='channel'``, over C (-> B x 1 x H x W)."""

    kind = "global-max-pool"

    def check(self, shapes, attrs):
        _pool_axes(self.kind, shapes[0], attrs)

    def forward(self, xs, attrs):
        (x,) = xs
        axes, keep = _pool_axes(self.kind, x.shape, attrs)
        if axes == (1,):
            arg = x.argmax(axis=1)[:, None]
            out = np.take_along_axis(x, arg, axis=1)
            return out, (x.shape, axes, arg)
        b, c, h, w = x.shape
        flat = x.reshape(b, c, h * w)
        arg = flat.argmax(axis=-1)
        out = np.take_along_axis(flat, arg[..., None], axis=-1)[..., 0]
        return out, (x.shape, axes, arg)

    def backward(self, ctx, grad, needs, attrs):
        x_shape, axes, arg = ctx
        gx = np.zeros(x_shape, dtype=grad.dtype)
        if axes == (1,):
            np.put_along_axis(gx, arg, grad, axis=1)
            return (gx,)
        b, c, h, w = x_shape
        flat = gx.reshape(b, c, h * w)
        np.put_along_axis(flat, arg[..., None], grad[..., None], axis=-1)
        return (flat.reshape(x_shape),)


@register
class Concat(Primitive):
    kind = "concat"

    def check(self, shapes, attrs):
        if not shapes:
            _fail(self.kind, "needs at least one input")
        axis = attrs.get("axis", -1)
        ref = shapes[0]
        ax = axis % len(ref)
        for s in shapes[1:]:
            if len(s) != len(ref) or any(a != b for i, (a, b) in enumerate(zip(s, ref)) if i != ax):
                _fail(self.kind, f"shapes {ref} and {s} differ outside concat axis {axis}")

    def forward(self, xs, attrs):
        axis = attrs.get("axis", -1)
        sizes = [x.shape[axis] for x in xs]
        return np.concatenate(xs, axis=axis), sizes

    def backward(self, sizes, grad, needs, attrs):
        axis = attrs.get("axis", -1)
        cuts = np.cumsum(sizes)[:-1]
        return tuple(np.split(grad, cuts, axis=axis))


@register
class BatchNorm(Primitive):
    """Per-channel normalization over the batch (and spatial) axes.

    attrs: ``training``; ``running_mean``/``running_var`` arrays updated in place
    during training; ``momentum`` (0.1); ``eps`` (1e-5).
    """

    kind = "batch-norm"

    def check(self, shapes, attrs):
        x, gamma, beta = shapes
        if len(x) not in (2, 4):
            _fail(self.kind, f"input must be B x C or B x C x H x W, got {x}")
        if gamma != (x[1],) or beta != (x[1],):
            _fail(self.kind, f"scale/shift shapes {gamma}/{beta} do not match channels {x[1]}")

    def forward(self, xs, attrs):
        x, gamma, beta = xs
        axes = (0,) if x.ndim == 2 else (0, 2, 3)
        bshape = (1, -1) if x.ndim == 2 else (1, -1, 1, 1)
        eps = attrs.get("eps", 1e-5)
        if attrs.get("training", True):
            mean = x.mean(axis=axes)
            var = x.var(axis=axes)
            rm, rv = attrs.get("running_mean"), attrs.get("running_var")
            if rm is not None and rv is not None:
                m = attrs.get("momentum", 0.1)
                n = x.size // x.shape[1]
                unbiased = var * n / max(n - 1, 1)
                rm *= 1 - m
                rm += m * mean
                rv *= 1 - m
                rv += m * unbiased
        else:
            mean, var = attrs["running_mean"], attrs["running_var"]
        inv_std = 1.0 / np.sqrt(var + eps)
        xhat = (x - mean.reshape(bshape)) * inv_std.reshape(bshape)
        out = xhat * gamma.reshape(bshape) + beta.reshape(bshape)
        return out.astype(x.dtype, copy=False), (xhat, inv_std, gamma, axes, bshape, attrs.get("training", True))

    def backward(self, ctx, grad, needs, attrs):
        xhat, inv_std, gamma, axes, bshape, training = ctx
        gbeta = grad.sum(axis=axes)
        ggamma = (grad * xhat).sum(axis=axes)
        gx = None
        if needs[0]:
            gxhat = grad * gamma.reshape(bshape)
            if training:
                n = grad.size // grad.shape[1]
                gx = (
                    inv_std.reshape(bshape)
                    / n
                    * (n * gxhat - gxhat.sum(axis=axes, keepdims=True) - xhat * (gxhat * xhat).sum(axis=axes, keepdims=True))
                )
            else:
                gx = gxhat * inv_std.reshape(bshape)
        return gx, ggamma if needs[1] else None, gbeta if needs[2] else None


@register
class CrossEntropy(Primitive):
    """Mean softmax cross-entropy; integer labels travel in ``attrs['labels']``."""

    kind = "cross-entropy"

    def check(self, shapes, attrs):
        (logits,) = shapes
        if len(logits) != 2:
            _fail(self.kind, f"logits must be B x C, got {logits}")
        labels = np.asarray(attrs["labels"])
        if labels.shape != (logits[0],):
            _fail(self.kind, f"{labels.shape[0] if labels.ndim else 0} labels for batch of {logits[0]}")
        if labels.size and (labels.min() < 0 or labels.max() >= logits[1]):
            raise ValueError(f"cross-entropy: label out of range [0, {logits[1]}): {labels.min()}..{labels.max()}")

    def forward(self, xs, attrs):
        (z,) = xs
        labels = np.asarray(attrs["labels"], dtype=np.int64)
        shifted = z - z.max(axis=1, keepdims=True)
        log_norm = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
        log_p = shifted - log_norm
        b = z.shape[0]
        loss = -log_p[np.arange(b), labels].mean()
        return np.asarray(loss, dtype=z.dtype), (log_p, labels)

    def backward(self, ctx, grad, needs, attrs):
        log_p, labels = ctx
        b = log_p.shape[0]
        g = np.exp(log_p)
        g[np.arange(b), labels] -= 1.0
        return (g * (grad / b),)


# Functional wrappers -------------------------------------------------------


def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    return apply_primitive("linear", [x, weight] + ([bias] if bias is not None else []))


def conv2d(x: Tensor, weight: Tensor, bias: Tensor | None = None, stride: int = 1, padding: int = 0) -> Tensor:
    inputs = [x, weight] + ([bias] if bias is not None else [])
    return apply_primitive("conv2d", inputs, stride=stride, padding=padding)


def relu(x: Tensor) -> Tensor:
    return apply_primitive("relu", [x])


def sigmoid(x: Tensor) -> Tensor:
    return apply_primitive("sigmoid", [x])


def add(a: Tensor, b: Tensor) -> Tensor:
    return apply_primitive("add", [a, b])


def mul(a: Tensor, b: Tensor) -> Tensor:
    return apply_primitive("elementwise-mul", [a, b])


def concat(tensors, axis: int = -1) -> Tensor:
    return apply_primitive("concat", list(tensors), axis=axis)


def avg_pool(x: Tensor, kernel: int = 2, stride: int | None = None) -> Tensor:
    return apply_primitive("avg-pool", [x], kernel=kernel, stride=stride or kernel)


def max_pool(x: Tensor, kernel: int = 2, stride: int | None = None) -> Tensor:
    return apply_primitive("max-pool", [x], kernel=kernel, stride=stride or kernel)


def global_avg_pool(x: Tensor, axis: str = "spatial") -> Tensor:
    return apply_primitive("global-avg-pool", [x], axis=axis)


def global_max_pool(x: Tensor, axis: str = "spatial") -> Tensor:
    return apply_primitive("global-max-pool", [x], axis=axis)


def batch_norm(x, gamma, beta, running_mean=None, running_var=None, training=True, momentum=0.1, eps=1e-5):
    return apply_primitive(
        "batch-norm",
        [x, gamma, beta],
        training=training,
        running_mean=running_mean,
        running_var=running_var,
        momentum=momentum,
        eps=eps,
    )


def cross_entropy_loss(logits: Tensor, labels) -> Tensor:
    """Mean over the batch of ``-log softmax(logits)[label]``."""
    return apply_primitive("cross-entropy", [logits], labels=np.asarray(labels, dtype=np.int64))


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)
