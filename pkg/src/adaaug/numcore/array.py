"""Reverse-mode autodiff on numpy float64 arrays.

Each differentiable op builds an Array node holding its inputs and one
vector-Jacobian closure per input; backward() walks the recorded graph from a
scalar root and accumulates gradients into every reachable trainable leaf.
Per-input closures let the backward pass skip gradients nobody asked for
(e.g. the image batch feeding a conv), which matters on one CPU core.
"""

from __future__ import annotations

import contextlib

import numpy as np

from ..errors import ConfigurationError, ContractError, ShapeError

_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block (forward-only passes)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class Array:
    """A float64 numpy array plus an optional link into the autodiff record.

    requires_grad marks trainable leaves; interior nodes carry parent links
    and vjp closures instead. .grad is only ever populated on leaves.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_vjps")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = ()
        self._vjps = ()

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def _tracked(self) -> bool:
        return self.requires_grad or bool(self._parents)

    def backward(self):
        """Accumulate d(self)/d(leaf) into .grad of every trainable ancestor.

        Repeated calls without clearing grads keep accumulating, which is what
        lets several scalar losses share one set of parameter buffers.
        """
        if self.data.size != 1:
            raise ContractError(
                f"backward root must be scalar, got shape {self.data.shape}"
            )
        order = _toposort(self)
        adjoint = {id(self): np.ones_like(self.data)}
        for node in reversed(order):
            g = adjoint.pop(id(node), None)
            if g is None:
                continue
            if node.requires_grad:
                node.grad = g.copy() if node.grad is None else node.grad + g
            for parent, vjp in zip(node._parents, node._vjps):
                if vjp is None:
                    continue
                contrib = vjp(g)
                prev = adjoint.get(id(parent))
                adjoint[id(parent)] = contrib if prev is None else prev + contrib

    # Small operator surface; everything routes through the module-level ops.
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Array(shape={self.data.shape}{flag})"


def as_array(value) -> Array:
    """Wrap value as a constant Array; pass existing Arrays through."""
    if isinstance(value, Array):
        return value
    return Array(value)


def _toposort(root: Array):
    # Iterative post-order over the recorded region; leaves come first.
    order = []
    visited = set()
    stack = [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if parent._tracked():
                stack.append((parent, False))
    return order


def _node(data: np.ndarray, parents, vjps) -> Array:
    """Build a graph node, or a plain constant when nothing upstream is live."""
    if _grad_enabled and any(p._tracked() for p in parents):
        out = Array(data)
        out._parents = tuple(parents)
        out._vjps = tuple(
            vjp if p._tracked() else None for p, vjp in zip(parents, vjps)
        )
        return out
    return Array(data)


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    # Sum the upstream gradient down to the operand's broadcast source shape.
    if g.shape == tuple(shape):
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def add(a, b) -> Array:
    a, b = as_array(a), as_array(b)
    out = np.add(a.data, b.data)
    return _node(
        out,
        (a, b),
        (
            lambda g: _unbroadcast(g, a.data.shape),
            lambda g: _unbroadcast(g, b.data.shape),
        ),
    )


def sub(a, b) -> Array:
    a, b = as_array(a), as_array(b)
    out = np.subtract(a.data, b.data)
    return _node(
        out,
        (a, b),
        (
            lambda g: _unbroadcast(g, a.data.shape),
            lambda g: _unbroadcast(-g, b.data.shape),
        ),
    )


def mul(a, b) -> Array:
    a, b = as_array(a), as_array(b)
    out = np.multiply(a.data, b.data)
    return _node(
        out,
        (a, b),
        (
            lambda g: _unbroadcast(g * b.data, a.data.shape),
            lambda g: _unbroadcast(g * a.data, b.data.shape),
        ),
    )


def matmul(a, b) -> Array:
    a, b = as_array(a), as_array(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise ShapeError(
            f"matmul needs [B x I] @ [I x O], got {a.data.shape} and {b.data.shape}"
        )
    out = a.data @ b.data
    return _node(
        out,
        (a, b),
        (lambda g: g @ b.data.T, lambda g: a.data.T @ g),
    )


def linear(input, weight, bias) -> Array:
    """y[b,o] = sum_i input[b,i] * weight[i,o] + bias[o]."""
    input, weight, bias = as_array(input), as_array(weight), as_array(bias)
    if (
        input.data.ndim != 2
        or weight.data.ndim != 2
        or input.data.shape[1] != weight.data.shape[0]
    ):
        raise ShapeError(
            f"linear input {input.data.shape} incompatible with weight {weight.data.shape}"
        )
    if bias.data.shape != (weight.data.shape[1],):
        raise ShapeError(
            f"linear bias {bias.data.shape} incompatible with weight {weight.data.shape}"
        )
    out = input.data @ weight.data + bias.data
    return _node(
        out,
        (input, weight, bias),
        (
            lambda g: g @ weight.data.T,
            lambda g: input.data.T @ g,
            lambda g: g.sum(axis=0),
        ),
    )


def _im2col(x: np.ndarray, ksize: int, stride: int, padding: int):
    b, c, h, w = x.shape
    if padding:
        x = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    hp, wp = h + 2 * padding, w + 2 * padding
    ho = (hp - ksize) // stride + 1
    wo = (wp - ksize) // stride + 1
    s0, s1, s2, s3 = x.strides
    windows = np.lib.stride_tricks.as_strided(
        x,
        shape=(b, c, ho, wo, ksize, ksize),
        strides=(s0, s1, s2 * stride, s3 * stride, s2, s3),
        writeable=False,
    )
    col = np.ascontiguousarray(windows.transpose(0, 2, 3, 1, 4, 5))
    return col.reshape(b * ho * wo, c * ksize * ksize), ho, wo


def _conv_output_extent(extent: int, ksize: int, stride: int, padding: int) -> int:
    span = extent + 2 * padding - ksize
    if span < 0 or span % stride != 0:
        raise ConfigurationError(
            f"conv output extent not integral: input {extent}, kernel {ksize}, "
            f"stride {stride}, padding {padding}"
        )
    return span // stride + 1


def conv2d(input, kernel, stride: int = 1, padding: int = 0) -> Array:
    """Batched cross-correlation, [B,C,H,W] x [F,C,K,K] -> [B,F,H',W']."""
    input, kernel = as_array(input), as_array(kernel)
    if input.data.ndim != 4 or kernel.data.ndim != 4:
        raise ShapeError(
            f"conv2d needs 4-d input and kernel, got {input.data.shape} and {kernel.data.shape}"
        )
    b, c, h, w = input.data.shape
    f, ck, ksize, ksize2 = kernel.data.shape
    if ck != c or ksize != ksize2:
        raise ShapeError(
            f"conv2d kernel {kernel.data.shape} incompatible with input {input.data.shape}"
        )
    ho = _conv_output_extent(h, ksize, stride, padding)
    wo = _conv_output_extent(w, ksize, stride, padding)
    col, ho, wo = _im2col(input.data, ksize, stride, padding)
    wmat = kernel.data.reshape(f, c * ksize * ksize)
    out = (col @ wmat.T).reshape(b, ho, wo, f).transpose(0, 3, 1, 2)

    def vjp_input(g):
        return _conv_input_grad(g, kernel.data, stride, padding, (b, c, h, w))

    def vjp_kernel(g):
        gmat = g.transpose(0, 2, 3, 1).reshape(b * ho * wo, f)
        return (gmat.T @ col).reshape(f, c, ksize, ksize)

    return _node(np.ascontiguousarray(out), (input, kernel), (vjp_input, vjp_kernel))


def _conv_input_grad(g, kernel, stride, padding, in_shape):
    # dL/dx is a stride-1 cross-correlation of the (dilated, padded) upstream
    # gradient with the spatially flipped kernel, channels swapped.
    b, c, h, w = in_shape
    f, _, ksize, _ = kernel.shape
    _, _, ho, wo = g.shape
    if stride > 1:
        dil = np.zeros((b, f, (ho - 1) * stride + 1, (wo - 1) * stride + 1))
        dil[:, :, ::stride, ::stride] = g
        g = dil
    wflip = np.ascontiguousarray(kernel[:, :, ::-1, ::-1].transpose(1, 0, 2, 3))
    col, gh, gw = _im2col(g, ksize, 1, ksize - 1)
    wmat = wflip.reshape(c, f * ksize * ksize)
    full = (col @ wmat.T).reshape(b, gh, gw, c).transpose(0, 3, 1, 2)
    return np.ascontiguousarray(full[:, :, padding : padding + h, padding : padding + w])


def maxpool2d(input, window: int = 2) -> Array:
    """Non-overlapping max pool; trailing rows/cols that don't fill a window
    are dropped (floor semantics)."""
    input = as_array(input)
    if input.data.ndim != 4:
        raise ShapeError(f"maxpool2d needs [B,C,H,W], got {input.data.shape}")
    if window < 1:
        raise ContractError(f"pool window must be >= 1, got {window}")
    b, c, h, w = input.data.shape
    ho, wo = h // window, w // window
    if ho == 0 or wo == 0:
        raise ConfigurationError(
            f"pool window {window} larger than spatial extent {h}x{w}"
        )
    x = input.data[:, :, : ho * window, : wo * window]
    tiles = x.reshape(b, c, ho, window, wo, window).transpose(0, 1, 2, 4, 3, 5)
    flat = tiles.reshape(b, c, ho, wo, window * window)
    arg = flat.argmax(axis=-1)
    out = np.take_along_axis(flat, arg[..., None], axis=-1)[..., 0]

    def vjp(g):
        dflat = np.zeros_like(flat)
        np.put_along_axis(dflat, arg[..., None], g[..., None], axis=-1)
        dx_crop = (
            dflat.reshape(b, c, ho, wo, window, window)
            .transpose(0, 1, 2, 4, 3, 5)
            .reshape(b, c, ho * window, wo * window)
        )
        if dx_crop.shape == (b, c, h, w):
            return dx_crop
        dx = np.zeros((b, c, h, w))
        dx[:, :, : ho * window, : wo * window] = dx_crop
        return dx

    return _node(np.ascontiguousarray(out), (input,), (vjp,))


def relu(input) -> Array:
    input = as_array(input)
    mask = input.data > 0
    return _node(np.where(mask, input.data, 0.0), (input,), (lambda g: g * mask,))


def sigmoid(input) -> Array:
    input = as_array(input)
    # Split by sign so exp never overflows.
    x = input.data
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return _node(out, (input,), (lambda g: g * out * (1.0 - out),))


def reshape(input, shape) -> Array:
    input = as_array(input)
    out = input.data.reshape(shape)
    return _node(out, (input,), (lambda g: g.reshape(input.data.shape),))


def reduce_sum(input) -> Array:
    input = as_array(input)
    out = np.asarray(input.data.sum())
    return _node(out, (input,), (lambda g: np.broadcast_to(g, input.data.shape).copy(),))


def reduce_mean(input) -> Array:
    input = as_array(input)
    n = input.data.size
    out = np.asarray(input.data.mean())
    return _node(
        out,
        (input,),
        (lambda g: np.broadcast_to(g / n, input.data.shape).copy(),),
    )


def cross_entropy(logits, labels):
    """Softmax cross-entropy.

    Returns (mean_loss, per_sample), both differentiable through logits.
    labels: integer vector, one per row, each in [0, k).
    """
    logits = as_array(logits)
    if logits.data.ndim != 2:
        raise ShapeError(f"cross_entropy needs [B x k] logits, got {logits.data.shape}")
    b, k = logits.data.shape
    labels = np.asarray(labels)
    if labels.shape != (b,):
        raise ShapeError(
            f"cross_entropy labels shape {labels.shape} does not match batch {b}"
        )
    if not np.issubdtype(labels.dtype, np.integer):
        raise ContractError(f"labels must be integers, got dtype {labels.dtype}")
    if labels.size and (labels.min() < 0 or labels.max() >= k):
        bad = labels[(labels < 0) | (labels >= k)][0]
        raise IndexError(f"label {bad} out of range [0, {k})")

    z = logits.data
    shifted = z - z.max(axis=1, keepdims=True)
    ez = np.exp(shifted)
    denom = ez.sum(axis=1, keepdims=True)
    logp = shifted - np.log(denom)
    softmax = ez / denom
    rows = np.arange(b)
    per_data = -logp[rows, labels]

    def vjp_per(g):
        # d per_sample[b] / d logits[b, j] = softmax[b, j] - [j == labels[b]]
        grad = softmax * g[:, None]
        grad[rows, labels] -= g
        return grad

    per_sample = _node(per_data, (logits,), (vjp_per,))
    mean_loss = reduce_mean(per_sample)
    return mean_loss, per_sample
