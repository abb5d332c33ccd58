"""Energies, free energies, and partition functions for all three variants.

Conventions used throughout:

* v is a binary vector of length D (or an (N, D) batch); h is binary of
  length K. Hidden unit i owns row i of W.
* For the ordered variants, z in {1..K} is the number of participating
  hidden units: units above z are forced off. Each participating unit i
  pays an energy penalty beta * softplus(b_h[i]) whether it fires or not.
* The free energy F(v, z) marginalizes h out of the energy for a fixed z;
  F(v) additionally marginalizes z. For the irbm, the sum over z runs to
  infinity: units beyond the trained prefix have exactly zero parameters,
  so the remainder is a geometric series with ratio r = 2^(1 - beta),
  which converges precisely when beta > 1.

All probability math stays in the log domain until the final exp.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ModelParams, Variant
from .numeric import LN2, log_sum_exp, softplus

#: largest D for which exact visible enumeration (2^D terms) is accepted
MAX_ENUM_VISIBLE = 20

_ENUM_CHUNK = 1 << 14


def _as_batch(v) -> tuple[np.ndarray, bool]:
    """Promote a single example to a 1-row batch; report whether it was single."""
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim == 1:
        return arr[None, :], True
    if arr.ndim == 2:
        return arr, False
    raise ValueError(f"expected a vector or a batch of vectors, got shape {arr.shape}")


def hidden_preactivation(params: ModelParams, batch: np.ndarray) -> np.ndarray:
    """(N, K) matrix of W v + b_h rows."""
    return batch @ params.W.T + params.b_h


def ordered_unit_terms(params: ModelParams, batch: np.ndarray) -> np.ndarray:
    """(N, K) per-unit net contribution softplus(W v + b_h) - beta softplus(b_h)."""
    return softplus(hidden_preactivation(params, batch)) - params.beta * softplus(
        params.b_h
    )


def ordered_free_energy_table(params: ModelParams, batch: np.ndarray) -> np.ndarray:
    """(N, K) table of F(v, z) for z = 1..K, via one cumulative sum per row."""
    visible = batch @ params.b_v
    return -visible[:, None] - np.cumsum(ordered_unit_terms(params, batch), axis=1)


# ---------------------------------------------------------------------------
# rbm
# ---------------------------------------------------------------------------


def rbm_energy(params: ModelParams, v, h) -> float:
    """Joint energy -h^T W v - v^T b_v - h^T b_h of one configuration."""
    v = np.asarray(v, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    if v.shape != (params.num_visible,) or h.shape != (params.num_hidden,):
        raise ValueError(
            f"configuration shapes {v.shape}, {h.shape} do not match model "
            f"({params.num_visible} visible, {params.num_hidden} hidden)"
        )
    return float(-h @ (params.W @ v) - v @ params.b_v - h @ params.b_h)


def rbm_free_energy(params: ModelParams, v):
    """F(v) = -v^T b_v - sum_i softplus(W_i v + b_h_i), h summed out exactly."""
    batch, single = _as_batch(v)
    out = -batch @ params.b_v - softplus(hidden_preactivation(params, batch)).sum(
        axis=1
    )
    return float(out[0]) if single else out


# ---------------------------------------------------------------------------
# ordered variants
# ---------------------------------------------------------------------------


def orbm_energy(params: ModelParams, v, h, z: int) -> float:
    """Joint energy of (v, h, z); h must lie in the legal set for z.

    E(v, h, z) = -v^T b_v - sum_{i<=z} (h_i (W_i v + b_h_i) - beta softplus(b_h_i))
    """
    v = np.asarray(v, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    k = params.num_hidden
    if v.shape != (params.num_visible,) or h.shape != (k,):
        raise ValueError(
            f"configuration shapes {v.shape}, {h.shape} do not match model"
        )
    z = int(z)
    if z < 1 or z > k:
        raise ValueError("z out of range")
    if np.any(h[z:] != 0.0):
        raise ValueError("hidden state outside legal set")
    preact = params.W[:z] @ v + params.b_h[:z]
    penalty = params.beta * softplus(params.b_h[:z])
    return float(-v @ params.b_v - (h[:z] @ preact - penalty.sum()))


def orbm_free_energy_vz(params: ModelParams, v, z: int) -> float:
    """F(v, z) with h summed out; F(v, 0) is defined as -v^T b_v (empty sum)."""
    v = np.asarray(v, dtype=np.float64)
    z = int(z)
    if z < 0 or z > params.num_hidden:
        raise ValueError("z out of range")
    if z == 0:
        return float(-v @ params.b_v)
    table = ordered_free_energy_table(params, v[None, :])
    return float(table[0, z - 1])


def orbm_free_energy(params: ModelParams, v):
    """F(v) = -ln sum_{z=1}^{K} e^{-F(v, z)} for the finite ordered machine."""
    batch, single = _as_batch(v)
    if params.num_hidden < 1:
        raise ValueError("orbm free energy needs at least one hidden unit")
    out = -log_sum_exp(-ordered_free_energy_table(params, batch), axis=1)
    out = np.atleast_1d(out)
    return float(out[0]) if single else out


def log_geometric_tail(beta: float) -> float:
    """ln sum_{k>=1} r^k = ln(r / (1 - r)) with r = 2^(1 - beta); needs beta > 1."""
    if beta <= 1.0:
        raise ValueError("divergent geometric tail")
    log_r = (1.0 - beta) * LN2
    return float(log_r - np.log1p(-np.exp(log_r)))


def _irbm_log_weights(params: ModelParams, batch: np.ndarray) -> np.ndarray:
    """(N, l+1) columns of ln e^{-F(v,z)} for z = 1..l plus the tail column.

    The tail column aggregates every z > l: each untrained unit contributes
    a constant factor r, so the remainder sums to e^{-F(v,l)} r / (1 - r).
    """
    log_tail = log_geometric_tail(params.beta)
    visible = batch @ params.b_v
    if params.num_hidden == 0:
        return (visible + log_tail)[:, None]
    neg_f = -ordered_free_energy_table(params, batch)
    return np.hstack([neg_f, (neg_f[:, -1] + log_tail)[:, None]])


def irbm_zv_log_partition(params: ModelParams, v):
    """ln Z(v) = ln sum_{z=1}^{inf} e^{-F(v, z)} for the infinite machine.

    -irbm_zv_log_partition is the irbm analogue of the free energy F(v).
    """
    batch, single = _as_batch(v)
    out = log_sum_exp(_irbm_log_weights(params, batch), axis=1)
    out = np.atleast_1d(out)
    return float(out[0]) if single else out


# ---------------------------------------------------------------------------
# posterior over z
# ---------------------------------------------------------------------------


@dataclass
class ZDistribution:
    """P(z | v) over hidden-layer sizes.

    probs      : (K,) probabilities for z = 1..K (irbm: K = trained prefix l)
    tail_mass  : irbm only, the aggregated probability of every z > l;
                 None for the finite ordered machine
    """

    probs: np.ndarray
    tail_mass: float | None = None

    @property
    def support_max(self) -> int:
        # irbm: the tail bucket is reported as outcome l+1
        return len(self.probs) + (0 if self.tail_mass is None else 1)

    def cdf_below(self) -> np.ndarray:
        """(K,) vector [P(z < 1 | v), ..., P(z < K | v)]."""
        return np.concatenate(([0.0], np.cumsum(self.probs)[:-1]))

    def survival(self) -> np.ndarray:
        """(K,) vector of P(z >= i | v); for the irbm the tail mass is included."""
        return 1.0 - self.cdf_below()


def z_posterior(params: ModelParams, batch: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Batched P(z | v): returns (probs (N, K), tail (N,)); tail is 0 for orbm."""
    if params.variant is Variant.ORBM:
        if params.num_hidden < 1:
            raise ValueError("orbm needs at least one hidden unit")
        logw = -ordered_free_energy_table(params, batch)
        log_z = log_sum_exp(logw, axis=1)
        probs = np.exp(logw - np.atleast_1d(log_z)[:, None])
        return probs, np.zeros(batch.shape[0])
    if params.variant is Variant.IRBM:
        logw = _irbm_log_weights(params, batch)
        log_z = np.atleast_1d(log_sum_exp(logw, axis=1))
        norm = np.exp(logw - log_z[:, None])
        return norm[:, :-1], norm[:, -1]
    raise ValueError("z is only defined for the ordered variants")


def p_z_given_v(params: ModelParams, v) -> ZDistribution:
    """Posterior over the number of participating units for one example."""
    batch, single = _as_batch(v)
    if not single:
        raise ValueError("p_z_given_v takes a single example; use z_posterior for batches")
    probs, tail = z_posterior(params, batch)
    if params.variant is Variant.IRBM:
        return ZDistribution(probs=probs[0], tail_mass=float(tail[0]))
    return ZDistribution(probs=probs[0], tail_mass=None)


# ---------------------------------------------------------------------------
# dispatch and exact partition function
# ---------------------------------------------------------------------------


def free_energy(params: ModelParams, v):
    """Variant dispatch: the scalar whose exp(-.) is proportional to P(v).

    rbm/orbm: the usual free energy. irbm: -ln Z(v), which plays the same
    role (P(v) = e^{-F(v)} / Z with Z = sum_v e^{-F(v)}).
    """
    if params.variant is Variant.RBM:
        return rbm_free_energy(params, v)
    if params.variant is Variant.ORBM:
        return orbm_free_energy(params, v)
    return -irbm_zv_log_partition(params, v)


def enumerate_binary_vectors(num_bits: int, offset: int = 0, count: int | None = None) -> np.ndarray:
    """Rows are the binary expansions of offset..offset+count-1 (MSB first)."""
    if count is None:
        count = (1 << num_bits) - offset
    idx = np.arange(offset, offset + count, dtype=np.uint64)
    shifts = np.arange(num_bits - 1, -1, -1, dtype=np.uint64)
    return ((idx[:, None] >> shifts[None, :]) & 1).astype(np.float64)


def exact_log_partition_small(params: ModelParams) -> float:
    """ln Z by enumerating all 2^D visible vectors of their free energies.

    Hidden units (and z, and the irbm tail) are already summed out
    analytically inside free_energy, so the cost is 2^D rows. Refuses
    models with more than MAX_ENUM_VISIBLE visible units.
    """
    d = params.num_visible
    if d > MAX_ENUM_VISIBLE:
        raise ValueError("enumeration too large")
    total = 1 << d
    chunk_logs = []
    for start in range(0, total, _ENUM_CHUNK):
        batch = enumerate_binary_vectors(d, start, min(_ENUM_CHUNK, total - start))
        chunk_logs.append(log_sum_exp(-np.atleast_1d(free_energy(params, batch))))
    return float(log_sum_exp(np.array(chunk_logs)))
