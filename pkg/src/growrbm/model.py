"""Model parameters for the three machine variants, plus checkpoint I/O.

A model is a visible layer of D binary units and a hidden layer of K binary
units joined by a weight matrix W (K x D, one row per hidden unit). The
ordered variants (orbm, irbm) additionally carry a per-unit participation
penalty controlled by the global hyperparameter beta; for the irbm, K is the
number of units that have been trained so far (everything beyond row K is an
implicit infinite tail of all-zero units).

Checkpoints are directories holding a small JSON header plus raw
little-endian float64 arrays, so they round-trip bit-exactly.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from enum import Enum

import numpy as np


class Variant(str, Enum):
    RBM = "rbm"
    ORBM = "orbm"
    IRBM = "irbm"

    @property
    def ordered(self) -> bool:
        return self is not Variant.RBM


def _as_variant(v) -> Variant:
    if isinstance(v, Variant):
        return v
    return Variant(str(v).lower())


@dataclass
class ModelParams:
    """Weights and biases of one machine.

    W     : (K, D) hidden-by-visible weights, row i belongs to hidden unit i
    b_v   : (D,) visible biases
    b_h   : (K,) hidden biases
    beta  : global penalty scale; must exceed 1 for the ordered variants so
            the infinite tail over hidden-layer sizes stays summable
    """

    variant: Variant
    W: np.ndarray
    b_v: np.ndarray
    b_h: np.ndarray
    beta: float = 1.01

    def __post_init__(self):
        self.variant = _as_variant(self.variant)
        self.W = np.array(self.W, dtype=np.float64, order="C")
        self.b_v = np.array(self.b_v, dtype=np.float64)
        self.b_h = np.array(self.b_h, dtype=np.float64)
        self.beta = float(self.beta)
        if self.W.ndim != 2 or self.b_v.ndim != 1 or self.b_h.ndim != 1:
            raise ValueError("W must be 2-d and biases 1-d")
        k, d = self.W.shape
        if self.b_v.shape[0] != d or self.b_h.shape[0] != k:
            raise ValueError(
                f"inconsistent shapes: W {self.W.shape}, b_v {self.b_v.shape}, "
                f"b_h {self.b_h.shape}"
            )
        if self.variant is not Variant.IRBM and k < 1:
            raise ValueError("rbm and orbm need at least one hidden unit")
        if self.variant.ordered and self.beta <= 1.0:
            raise ValueError("beta must exceed 1")

    @property
    def num_visible(self) -> int:
        return self.b_v.shape[0]

    @property
    def num_hidden(self) -> int:
        return self.W.shape[0]

    def copy(self) -> "ModelParams":
        return ModelParams(
            self.variant, self.W.copy(), self.b_v.copy(), self.b_h.copy(), self.beta
        )


def init_model(
    variant,
    num_visible: int,
    num_hidden: int,
    beta: float = 1.01,
    init_scale: float = 0.01,
    seed: int = 0,
) -> ModelParams:
    """Fresh model: zero biases, weights i.i.d. uniform in [-init_scale, +init_scale].

    Deterministic given the seed. An irbm may start with num_hidden == 0
    (nothing trained yet); the other variants need at least one unit.
    """
    variant = _as_variant(variant)
    if num_visible < 1:
        raise ValueError("need at least one visible unit")
    if num_hidden < (0 if variant is Variant.IRBM else 1):
        raise ValueError("rbm and orbm need at least one hidden unit")
    rng = np.random.default_rng(seed)
    w = rng.uniform(-init_scale, init_scale, size=(num_hidden, num_visible))
    return ModelParams(
        variant=variant,
        W=w,
        b_v=np.zeros(num_visible),
        b_h=np.zeros(num_hidden),
        beta=beta,
    )


def grow_hidden_unit(params: ModelParams) -> ModelParams:
    """Append one hidden unit with exactly zero weights and bias (irbm only).

    Existing parameters are carried over unchanged, so the model's
    distribution is untouched by the growth itself.
    """
    if params.variant is not Variant.IRBM:
        raise ValueError("only an irbm can grow hidden units")
    w = np.vstack([params.W, np.zeros((1, params.num_visible))])
    b_h = np.concatenate([params.b_h, [0.0]])
    return ModelParams(params.variant, w, params.b_v.copy(), b_h, params.beta)


def shrink_trailing_zero_units(params: ModelParams) -> ModelParams:
    """Drop the maximal suffix of hidden units whose row of W and bias are exactly zero.

    Interior zero units are kept: unit order is meaningful for the ordered
    variants, so only the trailing block may be removed.
    """
    if params.variant is not Variant.IRBM:
        raise ValueError("only an irbm can shrink hidden units")
    k = params.num_hidden
    keep = k
    while keep > 0 and not params.W[keep - 1].any() and params.b_h[keep - 1] == 0.0:
        keep -= 1
    if keep == k:
        return params
    return ModelParams(
        params.variant,
        params.W[:keep].copy(),
        params.b_v.copy(),
        params.b_h[:keep].copy(),
        params.beta,
    )


# ---------------------------------------------------------------------------
# checkpoint I/O
# ---------------------------------------------------------------------------

META_FILE = "meta.json"
_ARRAY_FILES = {"W": "W.f64", "b_v": "bv.f64", "b_h": "bh.f64"}


def _write_f64(path: str, arr: np.ndarray) -> None:
    with open(path, "wb") as f:
        f.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def _read_f64(path: str) -> np.ndarray:
    with open(path, "rb") as f:
        return np.frombuffer(f.read(), dtype="<f8").copy()


def save_model(directory: str, params: ModelParams, seed: int = 0, epoch: int = 0) -> None:
    """Write meta.json plus row-major little-endian float64 parameter arrays."""
    os.makedirs(directory, exist_ok=True)
    meta = {
        "variant": params.variant.value,
        "D": params.num_visible,
        "K": params.num_hidden,
        "beta": params.beta,
        "seed": int(seed),
        "epoch": int(epoch),
    }
    with open(os.path.join(directory, META_FILE), "w", encoding="utf-8") as f:
        json.dump(meta, f, sort_keys=True, indent=2)
        f.write("\n")
    _write_f64(os.path.join(directory, _ARRAY_FILES["W"]), params.W)
    _write_f64(os.path.join(directory, _ARRAY_FILES["b_v"]), params.b_v)
    _write_f64(os.path.join(directory, _ARRAY_FILES["b_h"]), params.b_h)


def load_model(directory: str) -> tuple[ModelParams, dict]:
    """Inverse of save_model; returns (params, meta). Bit-exact round trip."""
    meta_path = os.path.join(directory, META_FILE)
    if not os.path.isfile(meta_path):
        raise FileNotFoundError(f"no checkpoint at {directory!r} (missing {META_FILE})")
    with open(meta_path, "r", encoding="utf-8") as f:
        meta = json.load(f)
    d, k = int(meta["D"]), int(meta["K"])
    w = _read_f64(os.path.join(directory, _ARRAY_FILES["W"])).reshape(k, d)
    b_v = _read_f64(os.path.join(directory, _ARRAY_FILES["b_v"]))
    b_h = _read_f64(os.path.join(directory, _ARRAY_FILES["b_h"]))
    if b_v.shape[0] != d or b_h.shape[0] != k:
        raise ValueError(
            f"checkpoint at {directory!r} has inconsistent array sizes"
        )
    params = ModelParams(meta["variant"], w, b_v, b_h, float(meta["beta"]))
    return params, meta
