"""Numerically stable scalar/vector kernels shared by the model math.

Everything runs in 64-bit floats. Reductions keep a fixed left-to-right
order (numpy's default) so seeded runs reproduce exactly on a given build.
"""

from __future__ import annotations

import numpy as np

LN2 = float(np.log(2.0))


def _match_input(out: np.ndarray, x) -> np.ndarray | float:
    # collapse 0-d results back to plain floats
    if np.ndim(x) == 0:
        return float(out.reshape(())[()])
    return out


def softplus(x):
    """ln(1 + e^x), overflow-free for any finite input.

    Computed as max(x, 0) + log1p(exp(-|x|)) so that large positive x
    returns x (plus a vanishing correction) instead of inf.
    """
    arr = np.asarray(x, dtype=np.float64)
    out = np.maximum(arr, 0.0) + np.log1p(np.exp(-np.abs(arr)))
    return _match_input(out, x)


def sigmoid(x):
    """Logistic function 1 / (1 + e^{-x}), saturating without overflow."""
    arr = np.atleast_1d(np.asarray(x, dtype=np.float64))
    out = np.empty_like(arr)
    pos = arr >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-arr[pos]))
    ex = np.exp(arr[~pos])
    out[~pos] = ex / (1.0 + ex)
    if np.ndim(x) == 0:
        return float(out[0])
    return out.reshape(np.shape(x))


def log_sum_exp(xs, axis=None):
    """ln sum(e^{x_i}) with the usual max-shift for stability.

    Raises ValueError("empty reduction") when the reduced extent is zero;
    there is no meaningful value to return in that case.
    """
    arr = np.asarray(xs, dtype=np.float64)
    if axis is None:
        if arr.size == 0:
            raise ValueError("empty reduction")
    elif arr.shape[axis] == 0:
        raise ValueError("empty reduction")
    m = np.max(arr, axis=axis, keepdims=True)
    out = m + np.log(np.sum(np.exp(arr - m), axis=axis, keepdims=True))
    if axis is None:
        return float(out.reshape(())[()])
    out = np.squeeze(out, axis=axis)
    if out.ndim == 0:
        return float(out[()])
    return out


def matvec(m, x):
    """Matrix-vector product with explicit shape validation."""
    m = np.asarray(m, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if m.ndim != 2 or x.ndim != 1 or m.shape[1] != x.shape[0]:
        raise ValueError(
            f"shape mismatch in matvec: {m.shape} @ {x.shape}"
        )
    return m @ x


def vec_outer(a, b):
    """Outer product a b^T with explicit shape validation."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 1 or b.ndim != 1:
        raise ValueError(
            f"vec_outer expects two vectors, got shapes {a.shape} and {b.shape}"
        )
    return np.outer(a, b)
