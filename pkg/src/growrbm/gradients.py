"""Free-energy gradients and the two-phase NLL gradient estimator.

For the ordered variants the gradient of F(v) w.r.t. the parameters of
hidden unit i carries the factor P(z >= i | v): a unit only receives
signal in the proportion of posterior mass that lets it participate.
That factor is computed as 1 - cdf(z < i | v) from one cumulative sum,
so earlier units always receive at least as much signal as later ones.

For the irbm only the l trained units have parameters; the tail mass
(z > l) counts toward P(z >= i | v) for every i <= l, and the gradient
beyond l is identically zero because those parameters do not exist yet.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .energy import _as_batch, hidden_preactivation, z_posterior
from .model import ModelParams, Variant
from .numeric import sigmoid


@dataclass
class GradientSet:
    """Gradient blocks matching ModelParams: dW (K, D), db_v (D,), db_h (K,)."""

    dW: np.ndarray
    db_v: np.ndarray
    db_h: np.ndarray

    def blocks(self):
        return [("W", self.dW), ("b_v", self.db_v), ("b_h", self.db_h)]

    def __sub__(self, other: "GradientSet") -> "GradientSet":
        return GradientSet(
            self.dW - other.dW, self.db_v - other.db_v, self.db_h - other.db_h
        )


def _survival_matrix(probs: np.ndarray) -> np.ndarray:
    """(N, K) of P(z >= i | v) = 1 - P(z < i | v), column 1 exactly 1."""
    n, k = probs.shape
    cdf_below = np.concatenate(
        [np.zeros((n, 1)), np.cumsum(probs, axis=1)[:, :-1]], axis=1
    )
    return 1.0 - cdf_below


def _rbm_mean_grads(params: ModelParams, batch: np.ndarray) -> GradientSet:
    n = batch.shape[0]
    hhat = sigmoid(hidden_preactivation(params, batch))
    return GradientSet(
        dW=-(hhat.T @ batch) / n,
        db_v=-batch.mean(axis=0),
        db_h=-hhat.mean(axis=0),
    )


def _ordered_mean_grads(params: ModelParams, batch: np.ndarray) -> GradientSet:
    n = batch.shape[0]
    probs, _tail = z_posterior(params, batch)
    if params.num_hidden == 0:
        return GradientSet(
            dW=np.zeros((0, params.num_visible)),
            db_v=-batch.mean(axis=0),
            db_h=np.zeros(0),
        )
    m = _survival_matrix(probs)
    hhat = sigmoid(hidden_preactivation(params, batch))
    bias_pull = params.beta * sigmoid(params.b_h)
    return GradientSet(
        dW=-((hhat * m).T @ batch) / n,
        db_v=-batch.mean(axis=0),
        db_h=-((hhat - bias_pull) * m).mean(axis=0),
    )


def mean_free_energy_grads(params: ModelParams, batch) -> GradientSet:
    """Gradient of mean_n F(v_n) over a batch, dispatched on the variant."""
    batch, _ = _as_batch(batch)
    if batch.shape[0] == 0:
        raise ValueError("empty batch")
    if params.variant is Variant.RBM:
        return _rbm_mean_grads(params, batch)
    return _ordered_mean_grads(params, batch)


def free_energy_grads(params: ModelParams, v) -> GradientSet:
    """Gradient of F(v) for one example (variant dispatch)."""
    batch, single = _as_batch(v)
    if not single:
        raise ValueError("free_energy_grads takes a single example")
    return mean_free_energy_grads(params, batch)


def rbm_free_energy_grads(params: ModelParams, v) -> GradientSet:
    """dF/dW = -sigmoid(W v + b_h) v^T, dF/db_h = -sigmoid(W v + b_h), dF/db_v = -v."""
    if params.variant is not Variant.RBM:
        raise ValueError("rbm_free_energy_grads expects an rbm")
    return free_energy_grads(params, v)


def orbm_free_energy_grads(params: ModelParams, v) -> GradientSet:
    """Survival-weighted gradient of the finite ordered free energy F(v)."""
    if params.variant is not Variant.ORBM:
        raise ValueError("orbm_free_energy_grads expects an orbm")
    return free_energy_grads(params, v)


def irbm_hybrid_grads(params: ModelParams, v) -> GradientSet:
    """Gradient of -ln Z(v) restricted to the l trained units.

    Tail mass counts toward every unit's survival factor; with l = 0 the
    W and b_h blocks are zero-shaped and only db_v = -v remains.
    """
    if params.variant is not Variant.IRBM:
        raise ValueError("irbm_hybrid_grads expects an irbm")
    return free_energy_grads(params, v)


def orbm_free_energy_vz_grads(params: ModelParams, v, z: int) -> GradientSet:
    """Gradient of F(v, z): units above z contribute bitwise-zero blocks."""
    v = np.asarray(v, dtype=np.float64)
    z = int(z)
    k = params.num_hidden
    if z < 0 or z > k:
        raise ValueError("z out of range")
    mask = np.arange(k) < z
    hhat = sigmoid(params.W @ v + params.b_h)
    bias_pull = params.beta * sigmoid(params.b_h)
    dw = np.where(mask[:, None], -np.outer(hhat, v), 0.0)
    db_h = np.where(mask, -(hhat - bias_pull), 0.0)
    return GradientSet(dW=dw, db_v=-v, db_h=db_h)


def nll_gradient_estimate(
    params: ModelParams, positive_batch, negative_samples
) -> GradientSet:
    """Two-phase estimator: mean grads over data minus mean grads over samples.

    The negative phase stands in for the model expectation, so with the
    model's own exact samples (or the data itself) the estimate vanishes.
    """
    pos = mean_free_energy_grads(params, positive_batch)
    neg = mean_free_energy_grads(params, negative_samples)
    return pos - neg
