"""
Operations Module
The differentiable operator set used by the driving network.

Spatial ops take ``C×H×W`` or batched ``N×C×H×W`` inputs; vector ops take ``(D,)``
or ``(N, D)``. There is no general broadcasting: bias vectors are the only
implicitly expanded operands.
"""
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from .errors import InvalidArgumentError, ShapeError
from .tensor import Tensor, constant, make_result

IntPair = Union[int, Tuple[int, int]]


def _pair(value: IntPair) -> Tuple[int, int]:
    if isinstance(value, (tuple, list)):
        return int(value[0]), int(value[1])
    return int(value), int(value)


def _as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else constant(value)


def _spatial(x: Tensor, op: str) -> bool:
    """Return True when ``x`` carries no batch axis."""
    if x.ndim == 3:
        return True
    if x.ndim == 4:
        return False
    raise ShapeError(f"{op} expects C×H×W or N×C×H×W input, got shape {x.shape}")


# ---------------------------------------------------------------------------
# Convolution and pooling
# ---------------------------------------------------------------------------

def conv2d(
    x: Tensor,
    weight: Tensor,
    bias: Optional[Tensor] = None,
    stride: IntPair = 1,
    dilation: IntPair = 1,
    padding: IntPair = 0,
) -> Tensor:
    """
    Dilated 2-D cross-correlation.

    Args:
        x: Input, C×H×W or N×C×H×W
        weight: Kernel, C_out×C_in×kh×kw
        bias: Optional C_out vector
        stride, dilation, padding: Scalars or (row, col) pairs

    Returns:
        Output with spatial size floor((H + 2p - d(k-1) - 1)/s) + 1
    """
    unbatched = _spatial(x, "conv2d")
    xd = x.data[None] if unbatched else x.data
    w = weight.data
    if w.ndim != 4 or w.shape[1] != xd.shape[1]:
        raise ShapeError(f"conv2d kernel {w.shape} does not match input channels {xd.shape[1]}")
    sh, sw = _pair(stride)
    dh, dw = _pair(dilation)
    ph, pw = _pair(padding)
    if min(sh, sw, dh, dw) < 1 or min(ph, pw) < 0:
        raise InvalidArgumentError("conv2d stride and dilation must be >= 1, padding >= 0")
    if bias is not None and bias.shape != (w.shape[0],):
        raise ShapeError(f"conv2d bias {bias.shape} does not match {w.shape[0]} output channels")

    n, _, h, wd = xd.shape
    c_out, c_in, kh, kw = w.shape
    ho = (h + 2 * ph - dh * (kh - 1) - 1) // sh + 1
    wo = (wd + 2 * pw - dw * (kw - 1) - 1) // sw + 1
    if ho <= 0 or wo <= 0:
        raise ShapeError(f"conv2d output would be empty for input {xd.shape} and kernel {w.shape}")

    xp = np.pad(xd, ((0, 0), (0, 0), (ph, ph), (pw, pw))) if (ph or pw) else xd

    def tap(i: int, j: int):
        r0, c0 = i * dh, j * dw
        return (slice(None), slice(None), slice(r0, r0 + sh * (ho - 1) + 1, sh), slice(c0, c0 + sw * (wo - 1) + 1, sw))

    out = np.zeros((n, c_out, ho, wo), dtype=np.result_type(xd, w))
    for i in range(kh):
        for j in range(kw):
            patch = xp[tap(i, j)]
            out += np.tensordot(w[:, :, i, j], patch, axes=([1], [1])).transpose(1, 0, 2, 3)
    if bias is not None:
        out += bias.data[None, :, None, None]

    parents = [x, weight] + ([bias] if bias is not None else [])

    def vjp(g):
        g4 = g[None] if unbatched else g
        dx = np.zeros_like(xp) if x.requires_grad else None
        dwt = np.zeros_like(w) if weight.requires_grad else None
        for i in range(kh):
            for j in range(kw):
                sl = tap(i, j)
                if dwt is not None:
                    dwt[:, :, i, j] = np.tensordot(g4, xp[sl], axes=([0, 2, 3], [0, 2, 3]))
                if dx is not None:
                    dx[sl] += np.tensordot(w[:, :, i, j], g4, axes=([0], [1])).transpose(1, 0, 2, 3)
        if dx is not None:
            dx = dx[:, :, ph:ph + h, pw:pw + wd]
            if unbatched:
                dx = dx[0]
        grads = [dx, dwt]
        if bias is not None:
            grads.append(g4.sum(axis=(0, 2, 3)))
        return tuple(grads)

    return make_result(out[0] if unbatched else out, parents, vjp, "conv2d")


def pool2d(x: Tensor, kind: str = "max", window: IntPair = 2, stride: Optional[IntPair] = None) -> Tensor:
    """
    Max or average pooling over ``window``; stride defaults to the window.

    Max ties resolve to the first element of the window in row-major order.
    """
    if kind not in ("max", "avg"):
        raise InvalidArgumentError(f"unknown pooling kind '{kind}'")
    unbatched = _spatial(x, "pool2d")
    xd = x.data[None] if unbatched else x.data
    kh, kw = _pair(window)
    sh, sw = _pair(stride if stride is not None else window)
    n, c, h, wd = xd.shape
    if kh > h or kw > wd or min(kh, kw, sh, sw) < 1:
        raise ShapeError(f"pool window {(kh, kw)} does not fit input {(h, wd)}")
    ho = (h - kh) // sh + 1
    wo = (wd - kw) // sw + 1

    windows = np.lib.stride_tricks.sliding_window_view(xd, (kh, kw), axis=(2, 3))[:, :, ::sh, ::sw]
    windows = windows[:, :, :ho, :wo].reshape(n, c, ho, wo, kh * kw)
    if kind == "max":
        arg = np.argmax(windows, axis=-1)
        out = np.take_along_axis(windows, arg[..., None], axis=-1)[..., 0]
    else:
        arg = None
        out = windows.mean(axis=-1)

    def vjp(g):
        g4 = g[None] if unbatched else g
        dx = np.zeros_like(xd)
        for i in range(kh):
            for j in range(kw):
                sl = (slice(None), slice(None), slice(i, i + sh * (ho - 1) + 1, sh), slice(j, j + sw * (wo - 1) + 1, sw))
                if kind == "max":
                    dx[sl] += np.where(arg == i * kw + j, g4, 0.0)
                else:
                    dx[sl] += g4 / (kh * kw)
        return (dx[0] if unbatched else dx,)

    return make_result(np.ascontiguousarray(out[0] if unbatched else out), [x], vjp, f"{kind}_pool2d")


def pointwise_conv(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    """1×1 convolution with a C_out×C_in mixing matrix."""
    unbatched = _spatial(x, "pointwise_conv")
    xd = x.data[None] if unbatched else x.data
    w = weight.data
    if w.ndim != 2 or w.shape[1] != xd.shape[1]:
        raise ShapeError(f"pointwise kernel {w.shape} does not match input channels {xd.shape[1]}")
    out = np.tensordot(w, xd, axes=([1], [1])).transpose(1, 0, 2, 3)
    if bias is not None:
        out = out + bias.data[None, :, None, None]
    parents = [x, weight] + ([bias] if bias is not None else [])

    def vjp(g):
        g4 = g[None] if unbatched else g
        dx = None
        if x.requires_grad:
            dx = np.tensordot(w, g4, axes=([0], [1])).transpose(1, 0, 2, 3)
            if unbatched:
                dx = dx[0]
        dw = np.tensordot(g4, xd, axes=([0, 2, 3], [0, 2, 3])) if weight.requires_grad else None
        grads = [dx, dw]
        if bias is not None:
            grads.append(g4.sum(axis=(0, 2, 3)))
        return tuple(grads)

    return make_result(out[0] if unbatched else out, parents, vjp, "pointwise_conv")


def global_avg_pool(x: Tensor) -> Tensor:
    """Per-channel spatial mean: C×H×W -> C, N×C×H×W -> N×C."""
    _spatial(x, "global_avg_pool")
    h, w = x.shape[-2:]
    out = x.data.mean(axis=(-2, -1))

    def vjp(g):
        return (np.broadcast_to(g[..., None, None], x.shape) / (h * w),)

    return make_result(out, [x], vjp, "global_avg_pool")


def standardize(x: Tensor, eps: float = 1e-5) -> Tensor:
    """Per-channel standardization over the spatial axes (no learned affine)."""
    _spatial(x, "standardize")
    mean = x.data.mean(axis=(-2, -1), keepdims=True)
    var = x.data.var(axis=(-2, -1), keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    y = (x.data - mean) * inv

    def vjp(g):
        gm = g.mean(axis=(-2, -1), keepdims=True)
        gym = (g * y).mean(axis=(-2, -1), keepdims=True)
        return ((g - gm - y * gym) * inv,)

    return make_result(y, [x], vjp, "standardize")


# ---------------------------------------------------------------------------
# Dense and recurrent
# ---------------------------------------------------------------------------

def dense(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    """Affine map ``x @ W.T + b`` with W shaped out×in."""
    if x.ndim not in (1, 2):
        raise ShapeError(f"dense expects (D,) or (N, D) input, got {x.shape}")
    w = weight.data
    if w.ndim != 2 or w.shape[1] != x.shape[-1]:
        raise ShapeError(f"dense weight {w.shape} does not match input size {x.shape[-1]}")
    if bias is not None and bias.shape != (w.shape[0],):
        raise ShapeError(f"dense bias {bias.shape} does not match {w.shape[0]} outputs")
    out = x.data @ w.T
    if bias is not None:
        out = out + bias.data
    parents = [x, weight] + ([bias] if bias is not None else [])

    def vjp(g):
        g2 = g.reshape(-1, w.shape[0])
        x2 = x.data.reshape(-1, w.shape[1])
        dx = (g @ w) if x.requires_grad else None
        dw = g2.T @ x2 if weight.requires_grad else None
        grads = [dx, dw]
        if bias is not None:
            grads.append(g2.sum(axis=0))
        return tuple(grads)

    return make_result(out, parents, vjp, "dense")


def _sigmoid(v: np.ndarray) -> np.ndarray:
    out = np.empty_like(v)
    pos = v >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
    ev = np.exp(v[~pos])
    out[~pos] = ev / (1.0 + ev)
    return out


def gru_cell(
    x: Tensor,
    h: Tensor,
    w_ih: Tensor,
    w_hh: Tensor,
    b_ih: Tensor,
    b_hh: Tensor,
) -> Tensor:
    """
    One GRU step. Weights stack the gates in (update z, reset r, candidate n) order.

        z  = sigmoid(W_iz x + b_iz + W_hz h + b_hz)
        r  = sigmoid(W_ir x + b_ir + W_hr h + b_hr)
        n  = tanh(W_in x + b_in + r * (W_hn h + b_hn))
        h' = (1 - z) * n + z * h
    """
    hid = h.shape[-1]
    if w_ih.shape != (3 * hid, x.shape[-1]) or w_hh.shape != (3 * hid, hid):
        raise ShapeError(f"gru weights {w_ih.shape}/{w_hh.shape} do not match x {x.shape}, h {h.shape}")
    if b_ih.shape != (3 * hid,) or b_hh.shape != (3 * hid,):
        raise ShapeError("gru biases must have 3*hidden entries")
    if x.ndim != h.ndim or (x.ndim == 2 and x.shape[0] != h.shape[0]):
        raise ShapeError(f"gru batch mismatch between x {x.shape} and h {h.shape}")

    xd, hd = x.data, h.data
    gi = xd @ w_ih.data.T + b_ih.data
    gh = hd @ w_hh.data.T + b_hh.data
    z = _sigmoid(gi[..., :hid] + gh[..., :hid])
    r = _sigmoid(gi[..., hid:2 * hid] + gh[..., hid:2 * hid])
    gh_n = gh[..., 2 * hid:]
    n = np.tanh(gi[..., 2 * hid:] + r * gh_n)
    out = (1.0 - z) * n + z * hd

    def vjp(g):
        dn_pre = g * (1.0 - z) * (1.0 - n * n)
        dz_pre = g * (hd - n) * z * (1.0 - z)
        dr_pre = dn_pre * gh_n * r * (1.0 - r)
        d_gi = np.concatenate([dz_pre, dr_pre, dn_pre], axis=-1)
        d_gh = np.concatenate([dz_pre, dr_pre, dn_pre * r], axis=-1)
        gi2 = d_gi.reshape(-1, 3 * hid)
        gh2 = d_gh.reshape(-1, 3 * hid)
        dx = d_gi @ w_ih.data if x.requires_grad else None
        dh = g * z + d_gh @ w_hh.data if h.requires_grad else None
        dw_ih = gi2.T @ xd.reshape(-1, xd.shape[-1]) if w_ih.requires_grad else None
        dw_hh = gh2.T @ hd.reshape(-1, hid) if w_hh.requires_grad else None
        return dx, dh, dw_ih, dw_hh, gi2.sum(axis=0), gh2.sum(axis=0)

    return make_result(out, [x, h, w_ih, w_hh, b_ih, b_hh], vjp, "gru_cell")


# ---------------------------------------------------------------------------
# Element-wise
# ---------------------------------------------------------------------------

def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    return make_result(np.where(mask, x.data, 0.0).astype(x.dtype, copy=False), [x], lambda g: (g * mask,), "relu")


def tanh(x: Tensor) -> Tensor:
    out = np.tanh(x.data)
    return make_result(out, [x], lambda g: (g * (1.0 - out * out),), "tanh")


def sigmoid(x: Tensor) -> Tensor:
    out = _sigmoid(x.data)
    return make_result(out, [x], lambda g: (g * out * (1.0 - out),), "sigmoid")


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeError(f"add expects equal shapes, got {a.shape} and {b.shape}")
    return make_result(a.data + b.data, [a, b], lambda g: (g, g), "add")


def add_const(x: Tensor, value) -> Tensor:
    return make_result(x.data + np.asarray(value, dtype=x.dtype), [x], lambda g: (g,), "add_const")


def scale(x: Tensor, factor) -> Tensor:
    """Multiply by a constant scalar or a constant array of the same shape."""
    f = np.asarray(factor.data if isinstance(factor, Tensor) else factor, dtype=x.dtype)
    if f.ndim and f.shape != x.shape:
        raise ShapeError(f"scale factor {f.shape} does not match {x.shape}")
    return make_result(x.data * f, [x], lambda g: (g * f,), "scale")


def sum_all(x: Tensor) -> Tensor:
    return make_result(np.asarray(x.data.sum()), [x], lambda g: (np.full_like(x.data, g),), "sum")


def mean(x: Tensor) -> Tensor:
    count = x.size
    return make_result(np.asarray(x.data.mean()), [x], lambda g: (np.full_like(x.data, g / count),), "mean")


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    """Join tensors along ``axis``; inputs may mix constants and graph nodes."""
    tensors = [_as_tensor(t) for t in tensors]
    if not tensors:
        raise InvalidArgumentError("concat needs at least one tensor")
    ax = axis % tensors[0].ndim
    for t in tensors[1:]:
        if t.ndim != tensors[0].ndim or any(
            t.shape[k] != tensors[0].shape[k] for k in range(t.ndim) if k != ax
        ):
            raise ShapeError(f"concat shape mismatch: {[t.shape for t in tensors]}")
    out = np.concatenate([t.data for t in tensors], axis=ax)
    bounds = np.cumsum([0] + [t.shape[ax] for t in tensors])

    def vjp(g):
        return tuple(
            np.take(g, np.arange(bounds[k], bounds[k + 1]), axis=ax) if t.requires_grad else None
            for k, t in enumerate(tensors)
        )

    return make_result(out, tensors, vjp, "concat")


def take_columns(x: Tensor, start: int, stop: int) -> Tensor:
    """Slice ``x[..., start:stop]``."""
    width = x.shape[-1]
    if not 0 <= start < stop <= width:
        raise InvalidArgumentError(f"column slice {start}:{stop} outside width {width}")

    def vjp(g):
        dx = np.zeros_like(x.data)
        dx[..., start:stop] = g
        return (dx,)

    return make_result(x.data[..., start:stop], [x], vjp, "take_columns")


def route_by_index(candidates: Sequence[Tensor], index: np.ndarray) -> Tensor:
    """
    Per-sample selection: row ``n`` of the result is row ``n`` of ``candidates[index[n]]``.

    Gradients reach only the selected candidate rows.
    """
    index = np.asarray(index, dtype=np.int64).reshape(-1)
    k = len(candidates)
    if index.size and (index.min() < 0 or index.max() >= k):
        raise InvalidArgumentError(f"route index out of range [0, {k})")
    stacked = np.stack([c.data for c in candidates], axis=0)
    if stacked.ndim != 3 or stacked.shape[1] != index.size:
        raise ShapeError(f"route_by_index expects {k} tensors of shape (N, D) with N={index.size}")
    rows = np.arange(index.size)
    out = stacked[index, rows]

    def vjp(g):
        grads = []
        for c_idx, cand in enumerate(candidates):
            if not cand.requires_grad:
                grads.append(None)
                continue
            mask = (index == c_idx)[:, None]
            grads.append(np.where(mask, g, 0.0))
        return tuple(grads)

    return make_result(out, list(candidates), vjp, "route_by_index")


# ---------------------------------------------------------------------------
# Losses
# ---------------------------------------------------------------------------

def l1_loss(pred: Tensor, target) -> Tensor:
    """Mean absolute error over all elements."""
    t = np.asarray(target.data if isinstance(target, Tensor) else target, dtype=pred.dtype)
    if t.shape != pred.shape:
        raise ShapeError(f"l1_loss target {t.shape} does not match prediction {pred.shape}")
    diff = pred.data - t
    count = diff.size

    def vjp(g):
        return (np.sign(diff) * (g / count),)

    return make_result(np.asarray(np.abs(diff).mean()), [pred], vjp, "l1_loss")
