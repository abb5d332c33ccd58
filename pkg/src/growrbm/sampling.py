"""Gibbs samplers for all variants, with reproducible RNG streams.

A chain is a batch of independent states advanced in lockstep. Each
gibbs_step draws a fixed number of uniforms per chain regardless of the
sampled values (one for z, one per hidden unit, one per visible unit),
so a (seed, stream) pair pins down every trajectory exactly.

For the ordered variants one step samples z ~ P(z|v), h ~ P(h|v,z),
v ~ P(v|h,z). An irbm z draw that lands in the aggregated tail mass is
returned as l+1 and flagged via `grew`; the sampler itself never mutates
the model, the training loop decides whether to actually add the unit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .energy import hidden_preactivation, z_posterior
from .model import ModelParams, Variant
from .numeric import sigmoid


class RngStream:
    """Deterministic, independent generator identified by (seed, stream).

    Two streams with the same seed but different stream ids never overlap;
    the same (seed, stream) always replays the same draws.
    """

    def __init__(self, seed: int, stream: int = 0):
        self.seed = int(seed)
        self.stream = int(stream)
        self._gen: np.random.Generator | None = None

    def generator(self) -> np.random.Generator:
        if self._gen is None:
            self._gen = np.random.default_rng(
                np.random.SeedSequence(self.seed, spawn_key=(self.stream,))
            )
        return self._gen


def _gen_of(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    return rng


@dataclass
class ChainState:
    """State of a batch of chains.

    v    : (n, D) binary floats
    z    : (n,) participating-unit counts, None for the rbm; an irbm value
           of K+1 transiently marks a tail draw awaiting growth
    grew : (n,) flags, True where the latest z draw landed in the tail
    """

    v: np.ndarray
    z: np.ndarray | None = None
    grew: np.ndarray | None = None

    @property
    def size(self) -> int:
        return self.v.shape[0]

    def any_grew(self) -> bool:
        return bool(self.grew is not None and self.grew.any())

    def copy(self) -> "ChainState":
        return ChainState(
            self.v.copy(),
            None if self.z is None else self.z.copy(),
            None if self.grew is None else self.grew.copy(),
        )


def _as_state_batch(v) -> tuple[np.ndarray, bool]:
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim == 1:
        return arr[None, :], True
    return arr, False


def sample_h_given_v(params: ModelParams, v, rng):
    """Bernoulli draw of every hidden unit from sigmoid(W v + b_h)."""
    gen = _gen_of(rng)
    batch, single = _as_state_batch(v)
    p = sigmoid(hidden_preactivation(params, batch))
    h = (gen.random(p.shape) < p).astype(np.float64)
    return h[0] if single else h


def sample_h_given_vz(params: ModelParams, v, z, rng):
    """Hidden draw with only the first z units active; the rest are exactly 0."""
    gen = _gen_of(rng)
    batch, single = _as_state_batch(v)
    z_arr = np.atleast_1d(np.asarray(z, dtype=np.int64))
    if np.any(z_arr < 0) or np.any(z_arr > params.num_hidden):
        raise ValueError("z out of range")
    p = sigmoid(hidden_preactivation(params, batch))
    u = gen.random(p.shape)
    active = np.arange(params.num_hidden)[None, :] < z_arr[:, None]
    h = ((u < p) & active).astype(np.float64)
    return h[0] if single else h


def sample_v_given_h(params: ModelParams, h, rng):
    """Visible draw from sigmoid(h^T W + b_v)."""
    gen = _gen_of(rng)
    batch, single = _as_state_batch(h)
    p = sigmoid(batch @ params.W + params.b_v)
    v = (gen.random(p.shape) < p).astype(np.float64)
    return v[0] if single else v


def sample_v_given_hz(params: ModelParams, h, z, rng):
    """Visible draw under a fixed z; h must lie in the legal set for z.

    Because h is zero above z, only the first z rows of W contribute, so
    the draw matches sample_v_given_h on the z-truncated model exactly.
    """
    batch, single = _as_state_batch(h)
    z_arr = np.atleast_1d(np.asarray(z, dtype=np.int64))
    cols = np.arange(params.num_hidden)[None, :]
    if np.any(batch * (cols >= z_arr[:, None]) != 0.0):
        raise ValueError("hidden state outside legal set")
    v = sample_v_given_h(params, batch, rng)
    return v[0] if single else v


def sample_z_given_v(params: ModelParams, v, rng):
    """Inverse-cdf draw of z from P(z | v) using a single uniform per chain.

    irbm: a draw landing in the aggregated tail mass returns l+1, the
    caller's signal that the model wants one more unit.
    """
    gen = _gen_of(rng)
    batch, single = _as_state_batch(v)
    probs, tail = z_posterior(params, batch)
    if params.variant is Variant.IRBM:
        table = np.hstack([probs, tail[:, None]])
    else:
        table = probs
    cdf = np.cumsum(table, axis=1)
    u = gen.random(batch.shape[0])
    z = (u[:, None] > cdf).sum(axis=1).astype(np.int64) + 1
    np.minimum(z, table.shape[1], out=z)
    return int(z[0]) if single else z


def gibbs_step(params: ModelParams, state: ChainState, rng) -> ChainState:
    """One full transition; returns a fresh ChainState, input left untouched."""
    gen = _gen_of(rng)
    if params.variant is Variant.RBM:
        h = sample_h_given_v(params, state.v, gen)
        v = sample_v_given_h(params, h, gen)
        return ChainState(v=v)
    z = sample_z_given_v(params, state.v, gen)
    grew = (
        z == params.num_hidden + 1
        if params.variant is Variant.IRBM
        else np.zeros(state.size, dtype=bool)
    )
    z_eff = np.minimum(z, params.num_hidden)
    h = sample_h_given_vz(params, state.v, z_eff, gen)
    v = sample_v_given_h(params, h, gen)
    return ChainState(v=v, z=z, grew=grew)


def init_chain(
    params: ModelParams,
    rng,
    num_chains: int = 1,
    mode: str = "random",
    example=None,
) -> ChainState:
    """Fresh chain batch.

    mode "from-example": v copied from the given examples.
    mode "random":       v uniform over {0,1}^D.
    mode "zK":           random v, but z pinned to K so that the first
                         update can touch every unit (pass the state to
                         run_chain with pin_first_z=True).
    Ordered variants otherwise start with z drawn from P(z | v).
    """
    gen = _gen_of(rng)
    d = params.num_visible
    if mode == "from-example":
        if example is None:
            raise ValueError("mode 'from-example' needs examples")
        batch, _ = _as_state_batch(example)
        v = batch.copy()
    elif mode in ("random", "zK"):
        v = (gen.random((num_chains, d)) < 0.5).astype(np.float64)
    else:
        raise ValueError(f"unknown chain init mode {mode!r}")
    n = v.shape[0]
    if params.variant is Variant.RBM:
        return ChainState(v=v)
    if mode == "zK":
        if params.num_hidden < 1:
            raise ValueError("zK init needs at least one hidden unit")
        z = np.full(n, params.num_hidden, dtype=np.int64)
    else:
        z = np.minimum(
            np.atleast_1d(sample_z_given_v(params, v, gen)),
            max(params.num_hidden, 1),
        )
    return ChainState(v=v, z=z, grew=np.zeros(n, dtype=bool))


def run_chain(
    params: ModelParams,
    state: ChainState,
    steps: int,
    rng,
    pin_first_z: bool = False,
) -> ChainState:
    """Advance `steps` transitions; with pin_first_z the first transition keeps
    the state's current z instead of resampling it (used by the zK init)."""
    gen = _gen_of(rng)
    first = 0
    if pin_first_z and steps > 0 and params.variant.ordered:
        if state.z is None:
            raise ValueError("pin_first_z needs a state with z set")
        z_eff = np.minimum(state.z, params.num_hidden)
        h = sample_h_given_vz(params, state.v, z_eff, gen)
        v = sample_v_given_h(params, h, gen)
        state = ChainState(v=v, z=state.z.copy(), grew=np.zeros(state.size, dtype=bool))
        first = 1
    for _ in range(first, steps):
        state = gibbs_step(params, state, gen)
    return state
