"""Compact reverse-mode autodiff engine for the clip-regression model.

Provides exactly the operations the architecture needs: 3D convolution,
pooling, zero padding, dense layers, the usual activations, dropout, an
LSTM cell, mean-squared-error loss, and an Adam optimizer. Everything
runs in float64 on numpy; fixed seeds give bit-identical forward and
backward passes.

Gradients flow through a per-call graph of closures; ``backward`` on a
scalar loss walks the graph once in reverse topological order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeMismatch


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_backward", "_prev")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad = None
        self._backward = None
        self._prev = ()

    @property
    def shape(self):
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self):
        self.grad = None

    def backward(self):
        if self.data.ndim != 0:
            raise ShapeMismatch("backward() starts from a scalar")
        topo = []
        visited = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._prev:
                if parent.requires_grad and id(parent) not in visited:
                    stack.append((parent, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None:
                node._backward()

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


def _accumulate(t: Tensor, g: np.ndarray):
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def _result(data, parents) -> Tensor:
    tracked = tuple(p for p in parents if p.requires_grad)
    out = Tensor(data, requires_grad=bool(tracked))
    out._prev = tracked
    return out


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


# -- elementwise --------------------------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.data.shape != b.data.shape:
        raise ShapeMismatch(f"add: {a.data.shape} vs {b.data.shape}")
    out = _result(a.data + b.data, (a, b))
    if out.requires_grad:
        def _bw():
            if a.requires_grad:
                _accumulate(a, out.grad)
            if b.requires_grad:
                _accumulate(b, out.grad)
        out._backward = _bw
    return out


def mul(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.data.shape != b.data.shape:
        raise ShapeMismatch(f"mul: {a.data.shape} vs {b.data.shape}")
    out = _result(a.data * b.data, (a, b))
    if out.requires_grad:
        def _bw():
            if a.requires_grad:
                _accumulate(a, out.grad * b.data)
            if b.requires_grad:
                _accumulate(b, out.grad * a.data)
        out._backward = _bw
    return out


def affine(x: Tensor, scale: float, shift: float) -> Tensor:
    """scale * x + shift with scalar constants."""
    x = as_tensor(x)
    out = _result(scale * x.data + shift, (x,))
    if out.requires_grad:
        def _bw():
            _accumulate(x, scale * out.grad)
        out._backward = _bw
    return out


def relu(x: Tensor) -> Tensor:
    x = as_tensor(x)
    out = _result(np.maximum(x.data, 0.0), (x,))
    if out.requires_grad:
        def _bw():
            _accumulate(x, out.grad * (x.data > 0.0))
        out._backward = _bw
    return out


def sigmoid(x: Tensor) -> Tensor:
    x = as_tensor(x)
    d = x.data
    s = np.where(d >= 0, 1.0 / (1.0 + np.exp(-np.abs(d))),
                 np.exp(-np.abs(d)) / (1.0 + np.exp(-np.abs(d))))
    out = _result(s, (x,))
    if out.requires_grad:
        def _bw():
            _accumulate(x, out.grad * s * (1.0 - s))
        out._backward = _bw
    return out


def tanh(x: Tensor) -> Tensor:
    x = as_tensor(x)
    t = np.tanh(x.data)
    out = _result(t, (x,))
    if out.requires_grad:
        def _bw():
            _accumulate(x, out.grad * (1.0 - t * t))
        out._backward = _bw
    return out


# -- shape plumbing ------------------------------------------------------


def clip(x: Tensor, lo: float, hi: float) -> Tensor:
    """Clamp values to [lo, hi]; gradient passes through the interior only."""
    x = as_tensor(x)
    out = _result(np.clip(x.data, lo, hi), (x,))
    if out.requires_grad:
        def _bw():
            inside = (x.data > lo) & (x.data < hi)
            _accumulate(x, out.grad * inside)
        out._backward = _bw
    return out


def reshape(x: Tensor, shape) -> Tensor:
    x = as_tensor(x)
    out = _result(x.data.reshape(shape), (x,))
    if out.requires_grad:
        def _bw():
            _accumulate(x, out.grad.reshape(x.data.shape))
        out._backward = _bw
    return out


def slice_vec(x: Tensor, start: int, stop: int) -> Tensor:
    x = as_tensor(x)
    if x.data.ndim != 1:
        raise ShapeMismatch("slice_vec expects a vector")
    out = _result(x.data[start:stop], (x,))
    if out.requires_grad:
        def _bw():
            g = np.zeros_like(x.data)
            g[start:stop] = out.grad
            _accumulate(x, g)
        out._backward = _bw
    return out


def mean_axes(x: Tensor, axes) -> Tensor:
    """Mean over the given axes (used for average-pooled embeddings)."""
    x = as_tensor(x)
    axes = tuple(axes)
    out = _result(x.data.mean(axis=axes), (x,))
    if out.requires_grad:
        count = 1
        for ax in axes:
            count *= x.data.shape[ax]
        def _bw():
            g = np.expand_dims(out.grad, axes)
            _accumulate(x, np.broadcast_to(g / count, x.data.shape).copy())
        out._backward = _bw
    return out


# -- padding -------------------------------------------------------------


def _normalize_pads(amounts):
    if isinstance(amounts, int):
        amounts = (amounts, amounts, amounts)
    pads = []
    for a in amounts:
        if isinstance(a, int):
            pads.append((a, a))
        else:
            pads.append((int(a[0]), int(a[1])))
    if len(pads) != 3 or any(p0 < 0 or p1 < 0 for p0, p1 in pads):
        raise ShapeMismatch(f"invalid pad amounts {amounts!r}")
    return tuple(pads)


def pad3d(x: Tensor, amounts) -> Tensor:
    """Zero-pad the three leading spatiotemporal axes of a (T, H, W, C) tensor."""
    x = as_tensor(x)
    if x.data.ndim != 4:
        raise ShapeMismatch(f"pad3d expects (T, H, W, C), got {x.data.shape}")
    pads = _normalize_pads(amounts)
    out = _result(np.pad(x.data, pads + ((0, 0),)), (x,))
    if out.requires_grad:
        def _bw():
            sl = tuple(slice(p0, out.grad.shape[i] - p1) for i, (p0, p1) in enumerate(pads))
            _accumulate(x, out.grad[sl])
        out._backward = _bw
    return out


def crop3d(x: Tensor, amounts) -> Tensor:
    """Inverse of pad3d with the same amounts."""
    x = as_tensor(x)
    pads = _normalize_pads(amounts)
    sl = tuple(slice(p0, x.data.shape[i] - p1) for i, (p0, p1) in enumerate(pads))
    out = _result(x.data[sl], (x,))
    if out.requires_grad:
        def _bw():
            g = np.zeros_like(x.data)
            g[sl] = out.grad
            _accumulate(x, g)
        out._backward = _bw
    return out


# -- convolution and pooling ---------------------------------------------


def _triple(v):
    return (v, v, v) if isinstance(v, int) else tuple(v)


def _windows(arr: np.ndarray, window, stride):
    view = np.lib.stride_tricks.sliding_window_view(arr, window, axis=(0, 1, 2))
    return view[:: stride[0], :: stride[1], :: stride[2]]


def conv3d(x: Tensor, kernel: Tensor, stride=1, padding=0) -> Tensor:
    """Cross-correlation of (T, H, W, Cin) with (kt, kh, kw, Cin, Cout)."""
    x, kernel = as_tensor(x), as_tensor(kernel)
    if x.data.ndim != 4 or kernel.data.ndim != 5:
        raise ShapeMismatch(f"conv3d: input {x.data.shape}, kernel {kernel.data.shape}")
    if x.data.shape[3] != kernel.data.shape[3]:
        raise ShapeMismatch(f"conv3d: input channels {x.data.shape[3]} != kernel {kernel.data.shape[3]}")
    stride = _triple(stride)
    if any(s < 1 for s in stride):
        raise ShapeMismatch(f"conv3d: stride must be >= 1, got {stride}")
    pads = _normalize_pads(padding)
    xp = np.pad(x.data, pads + ((0, 0),)) if any(p != (0, 0) for p in pads) else x.data
    kt, kh, kw, cin, cout = kernel.data.shape
    if any(xp.shape[i] < (kt, kh, kw)[i] for i in range(3)):
        raise ShapeMismatch(f"conv3d: kernel {kernel.data.shape[:3]} larger than padded input {xp.shape[:3]}")
    patches = _windows(xp, (kt, kh, kw), stride)  # (ot, oh, ow, Cin, kt, kh, kw)
    ot, oh, ow = patches.shape[:3]
    ksize = cin * kt * kh * kw
    col = np.ascontiguousarray(patches).reshape(ot * oh * ow, ksize)
    kmat = kernel.data.transpose(3, 0, 1, 2, 4).reshape(ksize, cout)
    y = (col @ kmat).reshape(ot, oh, ow, cout)
    out = _result(y, (x, kernel))
    if out.requires_grad:
        def _bw():
            g = out.grad
            g2 = g.reshape(-1, cout)
            if kernel.requires_grad:
                dk = (col.T @ g2).reshape(cin, kt, kh, kw, cout).transpose(1, 2, 3, 0, 4)
                _accumulate(kernel, dk)
            if x.requires_grad:
                dxp = np.zeros_like(xp)
                st, sh, sw = stride
                for i in range(kt):
                    for j in range(kh):
                        for l in range(kw):
                            dxp[i: i + st * ot: st, j: j + sh * oh: sh, l: l + sw * ow: sw, :] += (
                                g @ kernel.data[i, j, l].T)
                sl = tuple(slice(p0, dxp.shape[d] - p1) for d, (p0, p1) in enumerate(pads))
                _accumulate(x, dxp[sl])
        out._backward = _bw
    return out


def conv3d_relu(x: Tensor, kernel: Tensor, stride=1, padding=0) -> Tensor:
    return relu(conv3d(x, kernel, stride, padding))


def pool3d(x: Tensor, window, stride=None, mode: str = "max") -> Tensor:
    """Per-window max or mean over the (T, H, W) axes of a (T, H, W, C) tensor."""
    x = as_tensor(x)
    if x.data.ndim != 4:
        raise ShapeMismatch(f"pool3d expects (T, H, W, C), got {x.data.shape}")
    if mode not in ("max", "average"):
        raise ShapeMismatch(f"pool3d mode must be 'max' or 'average', got {mode!r}")
    window = _triple(window)
    stride = window if stride is None else _triple(stride)
    if any(x.data.shape[i] < window[i] for i in range(3)):
        raise ShapeMismatch(f"pool3d: window {window} does not fit input {x.data.shape[:3]}")
    view = _windows(x.data, window, stride)     # (ot, oh, ow, C, wt, wh, ww)
    ot, oh, ow, c = view.shape[:4]
    wsize = window[0] * window[1] * window[2]
    flat = view.reshape(ot, oh, ow, c, wsize)
    if mode == "max":
        y = flat.max(axis=-1)
    else:
        y = flat.mean(axis=-1)
    out = _result(y, (x,))
    if out.requires_grad:
        argmax = flat.argmax(axis=-1) if mode == "max" else None

        def _bw():
            idx_flat = _windows(np.arange(x.data.size).reshape(x.data.shape),
                                window, stride).reshape(ot, oh, ow, c, wsize)
            dx = np.zeros(x.data.size)
            if mode == "max":
                chosen = np.take_along_axis(idx_flat, argmax[..., None], axis=-1)
                np.add.at(dx, chosen.ravel(), out.grad.ravel())
            else:
                share = (out.grad / wsize).ravel()
                for m in range(wsize):
                    np.add.at(dx, idx_flat[..., m].ravel(), share)
            _accumulate(x, dx.reshape(x.data.shape))
        out._backward = _bw
    return out


# -- dense / dropout / loss ----------------------------------------------


def dense(x: Tensor, weights: Tensor, bias: Tensor | None = None) -> Tensor:
    """Affine map of a vector: weights @ x + bias."""
    x, weights = as_tensor(x), as_tensor(weights)
    if x.data.ndim != 1 or weights.data.ndim != 2 or weights.data.shape[1] != x.data.shape[0]:
        raise ShapeMismatch(f"dense: weights {weights.data.shape} vs input {x.data.shape}")
    y = weights.data @ x.data
    parents = [x, weights]
    if bias is not None:
        bias = as_tensor(bias)
        if bias.data.shape != (weights.data.shape[0],):
            raise ShapeMismatch(f"dense: bias {bias.data.shape} vs output {weights.data.shape[0]}")
        y = y + bias.data
        parents.append(bias)
    out = _result(y, parents)
    if out.requires_grad:
        def _bw():
            g = out.grad
            if x.requires_grad:
                _accumulate(x, weights.data.T @ g)
            if weights.requires_grad:
                _accumulate(weights, np.outer(g, x.data))
            if bias is not None and bias.requires_grad:
                _accumulate(bias, g)
        out._backward = _bw
    return out


def dropout(x: Tensor, rate: float, mode: str = "train", rng=None) -> Tensor:
    """Inverted dropout; identity in eval mode, deterministic under a seed."""
    if not (0.0 <= rate < 1.0):
        raise ShapeMismatch(f"dropout rate must lie in [0, 1), got {rate}")
    x = as_tensor(x)
    if mode == "eval" or rate == 0.0:
        out = _result(x.data.copy(), (x,))
        if out.requires_grad:
            def _bw():
                _accumulate(x, out.grad)
            out._backward = _bw
        return out
    if mode != "train":
        raise ShapeMismatch(f"dropout mode must be 'train' or 'eval', got {mode!r}")
    if rng is None:
        raise ShapeMismatch("dropout in train mode needs an rng or seed")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    keep = rng.random(x.data.shape) >= rate
    scale = 1.0 / (1.0 - rate)
    out = _result(x.data * keep * scale, (x,))
    if out.requires_grad:
        def _bw():
            _accumulate(x, out.grad * keep * scale)
        out._backward = _bw
    return out


def mse_loss(pred: Tensor, target) -> Tensor:
    pred = as_tensor(pred)
    tdata = target.data if isinstance(target, Tensor) else np.asarray(target, dtype=np.float64)
    if pred.data.shape != tdata.shape:
        raise ShapeMismatch(f"mse_loss: {pred.data.shape} vs {tdata.shape}")
    diff = pred.data - tdata
    n = max(diff.size, 1)
    out = _result(np.asarray(np.sum(diff * diff) / n), (pred,))
    if out.requires_grad:
        def _bw():
            _accumulate(pred, out.grad * 2.0 * diff / n)
        out._backward = _bw
    return out


# -- LSTM ------------------------------------------------------------------


@dataclass
class LSTMParams:
    """Gate weights packed (input, forget, candidate, output) along rows."""

    w_x: Tensor  # (4H, F)
    w_h: Tensor  # (4H, H)
    bias: Tensor  # (4H,)

    @property
    def hidden_size(self) -> int:
        return self.w_h.data.shape[1]


def lstm_cell(x: Tensor, state: tuple[Tensor, Tensor], params: LSTMParams) -> tuple[Tensor, Tensor]:
    """One gated update; built from primitives so gradients come free."""
    h, c = state
    hidden = params.hidden_size
    if x.data.ndim != 1 or x.data.shape[0] != params.w_x.data.shape[1]:
        raise ShapeMismatch(f"lstm_cell: input {x.data.shape} vs w_x {params.w_x.data.shape}")
    if h.data.shape != (hidden,) or c.data.shape != (hidden,):
        raise ShapeMismatch(f"lstm_cell: state {h.data.shape}/{c.data.shape} vs hidden {hidden}")
    z = add(dense(x, params.w_x, params.bias), dense(h, params.w_h))
    i = sigmoid(slice_vec(z, 0, hidden))
    f = sigmoid(slice_vec(z, hidden, 2 * hidden))
    g = tanh(slice_vec(z, 2 * hidden, 3 * hidden))
    o = sigmoid(slice_vec(z, 3 * hidden, 4 * hidden))
    c_new = add(mul(f, c), mul(i, g))
    h_new = mul(o, tanh(c_new))
    return h_new, c_new


def lstm_sequence(xs, params: LSTMParams, state: tuple[Tensor, Tensor] | None = None) -> Tensor:
    """Fold lstm_cell over a list of step inputs; returns the final hidden state."""
    hidden = params.hidden_size
    if state is None:
        state = (Tensor(np.zeros(hidden)), Tensor(np.zeros(hidden)))
    h, c = state
    for x in xs:
        h, c = lstm_cell(x, (h, c), params)
    return h


# -- optimizer --------------------------------------------------------------


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0

    @classmethod
    def for_params(cls, params) -> "AdamState":
        return cls(m=[np.zeros_like(p.data) for p in params],
                   v=[np.zeros_like(p.data) for p in params])


def adam_step(params, grads, state: AdamState, lr: float = 0.001,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> AdamState:
    """In-place first/second-moment update with bias correction."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ShapeMismatch("adam_step: params, grads and state must align")
    state.t += 1
    bc1 = 1.0 - beta1 ** state.t
    bc2 = 1.0 - beta2 ** state.t
    for k, (p, g) in enumerate(zip(params, grads)):
        if g is None:
            continue
        if g.shape != p.data.shape:
            raise ShapeMismatch(f"adam_step: grad {g.shape} vs param {p.data.shape}")
        state.m[k] = beta1 * state.m[k] + (1.0 - beta1) * g
        state.v[k] = beta2 * state.v[k] + (1.0 - beta2) * (g * g)
        m_hat = state.m[k] / bc1
        v_hat = state.v[k] / bc2
        p.data -= lr * m_hat / (np.sqrt(v_hat) + eps)
    return state


class Adam:
    """Stateful convenience wrapper over adam_step."""

    def __init__(self, params, lr: float = 0.001, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.state = AdamState.for_params(self.params)

    def step(self):
        grads = [p.grad for p in self.params]
        adam_step(self.params, grads, self.state, self.lr, self.beta1, self.beta2, self.eps)

    def zero_grad(self):
        for p in self.params:
            p.grad = None
