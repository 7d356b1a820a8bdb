"""Dense numeric kernels with hand-derived gradients.

The convolution here is depth-wise and shares one filter bank across all
input channels: ``F`` filters applied to ``C`` channels give ``C * F``
output channels, ordered channel-major / filter-minor
(``out[c * F + f] = conv(x[c], w[f])``).

In circular mode the output at ``(p, q)`` is

    sum_{i,j = -k//2 .. k//2}  x[(p - i) mod H, (q - j) mod W] * w[i, j]

with ``w`` indexed from its centre, i.e. a true cyclic convolution on the
grid torus.  Zero mode replaces the wrapped reads with zeros, which is
ordinary same-size convolution with zero padding ``k // 2``.

All kernels are dtype-preserving; run them on float64 arrays for
verification work and float32 for training throughput.
"""

from dataclasses import dataclass

import numpy as np


def _check_filters(filters: np.ndarray):
    filters = np.asarray(filters)
    if filters.ndim != 3 or filters.shape[1] != filters.shape[2]:
        raise ValueError("filters must have shape (F, k, k)")
    k = filters.shape[1]
    if k % 2 == 0 or k < 3:
        raise ValueError(f"kernel size must be odd and >= 3, got {k}")
    return filters, k


def _as_batched(x: np.ndarray):
    x = np.asarray(x)
    if x.ndim == 3:
        return x[None], True
    if x.ndim == 4:
        return x, False
    raise ValueError("input must have shape (C, H, W) or (B, C, H, W)")


def _shift_zero(a: np.ndarray, i: int, j: int) -> np.ndarray:
    """out[.., p, q] = a[.., p - i, q - j], zero where that falls outside."""
    out = np.zeros_like(a)
    H, W = a.shape[-2:]
    if abs(i) >= H or abs(j) >= W:
        return out
    dst_r = slice(max(i, 0), H + min(i, 0))
    src_r = slice(max(-i, 0), H + min(-i, 0))
    dst_c = slice(max(j, 0), W + min(j, 0))
    src_c = slice(max(-j, 0), W + min(-j, 0))
    out[..., dst_r, dst_c] = a[..., src_r, src_c]
    return out


def _conv2d(x, filters, mode):
    filters, k = _check_filters(filters)
    xb, squeeze = _as_batched(x)
    B, C, H, W = xb.shape
    F = filters.shape[0]
    c = k // 2
    out = np.zeros((B, C, F, H, W), dtype=xb.dtype)
    for i in range(-c, c + 1):
        for j in range(-c, c + 1):
            if mode == "circular":
                shifted = np.roll(xb, (i, j), axis=(-2, -1))
            else:
                shifted = _shift_zero(xb, i, j)
            w = filters[:, i + c, j + c].astype(xb.dtype)
            out += shifted[:, :, None] * w[:, None, None]
    out = out.reshape(B, C * F, H, W)
    return out[0] if squeeze else out


def circular_conv2d(x: np.ndarray, filters: np.ndarray) -> np.ndarray:
    """Depth-wise cyclic convolution; (.., C, H, W) -> (.., C*F, H, W)."""
    return _conv2d(x, filters, "circular")


def zero_conv2d(x: np.ndarray, filters: np.ndarray) -> np.ndarray:
    """Depth-wise zero-padded convolution; same shapes as circular."""
    return _conv2d(x, filters, "zero")


def conv2d(x: np.ndarray, filters: np.ndarray, mode: str) -> np.ndarray:
    if mode == "circular":
        return circular_conv2d(x, filters)
    if mode == "zero":
        return zero_conv2d(x, filters)
    raise ValueError(f"unknown conv mode {mode!r}")


def conv2d_backward(grad_out: np.ndarray, x: np.ndarray, filters: np.ndarray, mode: str):
    """Gradients of a scalar loss through :func:`conv2d`.

    Returns ``(grad_x, grad_filters)`` matching the input shapes.
    """
    if mode not in ("circular", "zero"):
        raise ValueError(f"unknown conv mode {mode!r}")
    filters, k = _check_filters(filters)
    xb, squeeze = _as_batched(x)
    B, C, H, W = xb.shape
    F = filters.shape[0]
    gb, _ = _as_batched(grad_out)
    if gb.shape != (B, C * F, H, W):
        raise ValueError(f"grad_out shape {gb.shape} does not match output "
                         f"shape {(B, C * F, H, W)}")
    g5 = gb.reshape(B, C, F, H, W)
    c = k // 2
    grad_x = np.zeros_like(xb)
    grad_f = np.zeros_like(filters)
    for i in range(-c, c + 1):
        for j in range(-c, c + 1):
            w = filters[:, i + c, j + c].astype(xb.dtype)
            if mode == "circular":
                g_back = np.roll(g5, (-i, -j), axis=(-2, -1))
                x_fwd = np.roll(xb, (i, j), axis=(-2, -1))
            else:
                g_back = _shift_zero(g5, -i, -j)
                x_fwd = _shift_zero(xb, i, j)
            grad_x += (g_back * w[:, None, None]).sum(axis=2)
            grad_f[:, i + c, j + c] += np.einsum("bcfhw,bchw->f", g5, x_fwd)
    return (grad_x[0] if squeeze else grad_x), grad_f


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0)


def relu_backward(grad_out: np.ndarray, x: np.ndarray) -> np.ndarray:
    return grad_out * (x > 0)


def sigmoid(x: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function."""
    out = np.empty_like(x, dtype=x.dtype if np.issubdtype(x.dtype, np.floating) else np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def affine(x: np.ndarray, weight: np.ndarray, bias: np.ndarray | None = None) -> np.ndarray:
    out = x @ weight
    if bias is not None:
        out = out + bias
    return out


def affine_backward(grad_out: np.ndarray, x: np.ndarray, weight: np.ndarray,
                    with_bias: bool = False):
    grad_x = grad_out @ weight.T
    grad_w = x.T @ grad_out
    grad_b = grad_out.sum(axis=0) if with_bias else None
    return grad_x, grad_w, grad_b


def dropout(x: np.ndarray, rate: float, rng: np.random.Generator | None, training: bool):
    """Inverted dropout.  Returns ``(output, mask)``; mask is None when inactive."""
    if not 0.0 <= rate < 1.0:
        raise ValueError("dropout rate must be in [0, 1)")
    if not training or rate == 0.0:
        return x, None
    if rng is None:
        raise ValueError("dropout in training mode needs an rng")
    keep = rng.random(x.shape) >= rate
    return x * keep / (1.0 - rate), keep


def dropout_backward(grad_out: np.ndarray, mask, rate: float) -> np.ndarray:
    if mask is None:
        return grad_out
    return grad_out * mask / (1.0 - rate)


def flatten(x: np.ndarray) -> np.ndarray:
    """Collapse all but the leading axis, row-major."""
    return x.reshape(x.shape[0], -1)


@dataclass
class GradCheckResult:
    status: str                 # "ok" or "skipped"
    max_rel_error: float
    per_tensor: dict
    n_coords: int
    note: str = ""

    def to_dict(self):
        return {"status": self.status, "max_rel_error": self.max_rel_error,
                "per_tensor": self.per_tensor, "n_coords": self.n_coords,
                "note": self.note}


def gradcheck(fn, params: dict, eps: float = 1e-5, max_coords_per_tensor: int = 512,
              seed: int = 0) -> GradCheckResult:
    """Compare analytic gradients against central finite differences.

    ``fn(params) -> (loss, grads)`` must be deterministic; ``grads`` maps
    the same names to arrays of matching shape.  At most
    ``max_coords_per_tensor`` coordinates per tensor are probed (sampled
    without replacement when a tensor is larger).  The relative error of
    a coordinate is ``|a - n| / max(|a|, |n|, 1e-8)``.
    """
    loss, grads = fn(params)
    if not np.isfinite(loss):
        raise FloatingPointError("gradcheck: loss is not finite")
    rng = np.random.default_rng(seed)
    per_tensor = {}
    total = 0
    worst = 0.0
    for name, arr in params.items():
        if name not in grads:
            raise KeyError(f"fn returned no gradient for {name!r}")
        size = arr.size
        if size <= max_coords_per_tensor:
            coords = np.arange(size)
        else:
            coords = np.sort(rng.choice(size, size=max_coords_per_tensor, replace=False))
        tensor_worst = 0.0
        for c in coords:
            orig = arr.flat[c]
            arr.flat[c] = orig + eps
            lp, _ = fn(params)
            arr.flat[c] = orig - eps
            lm, _ = fn(params)
            arr.flat[c] = orig
            numeric = (lp - lm) / (2.0 * eps)
            analytic = grads[name].flat[c]
            rel = abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-8)
            tensor_worst = max(tensor_worst, rel)
        per_tensor[name] = {"max_rel_error": tensor_worst, "n_coords": int(len(coords))}
        total += len(coords)
        worst = max(worst, tensor_worst)
    return GradCheckResult(status="ok", max_rel_error=worst,
                           per_tensor=per_tensor, n_coords=total)
