"""CD/PCD training with ADAGRAD, weight decay, and irbm capacity lifecycle.

One train_update performs, in order: negative-phase sampling, the
two-phase gradient estimate, the ADAGRAD step, the regularization step
(on W and b_h only, never b_v), and finally the irbm lifecycle. The
lifecycle shrinks the trailing block of exactly-zero units first (L1
only) and then grows at most one unit if any negative chain's z draw
landed in the tail during this update; shrinking first keeps a freshly
added all-zero unit from being removed in the same update it appears.

L1 uses the proximal soft-threshold with the per-dimension ADAGRAD step
size, which produces exact zeros and therefore lets trained-away units
actually disappear.
"""

from __future__ import annotations

import csv
import os
import time
from dataclasses import dataclass, field

import numpy as np

from .energy import _as_batch, free_energy
from .gradients import GradientSet, nll_gradient_estimate
from .model import (
    ModelParams,
    Variant,
    grow_hidden_unit,
    save_model,
    shrink_trailing_zero_units,
)
from .sampling import ChainState, RngStream, gibbs_step, init_chain

REG_KINDS = ("none", "l1", "l2")
METHODS = ("cd", "pcd")


@dataclass
class TrainConfig:
    lr: float = 0.01
    adagrad_eps: float = 1e-6
    reg_kind: str = "none"
    lam: float = 0.0
    batch_size: int = 64
    gibbs_steps: int = 10
    epochs: int = 1
    method: str = "pcd"
    seed: int = 0
    beta: float = 1.01
    max_hidden_cap: int | None = None  # None: 10 * num_visible
    checkpoint_every: int = 0  # 0: final checkpoint only

    def __post_init__(self):
        if self.lr < 0:
            raise ValueError("lr must be nonnegative")
        if self.adagrad_eps <= 0:
            raise ValueError("adagrad_eps must be positive")
        if self.lam < 0:
            raise ValueError("lambda must be nonnegative")
        if self.reg_kind not in REG_KINDS:
            raise ValueError(f"reg_kind must be one of {REG_KINDS}")
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        if self.batch_size < 1 or self.gibbs_steps < 1:
            raise ValueError("batch_size and gibbs_steps must be at least 1")
        if self.epochs < 0:
            raise ValueError("epochs must be nonnegative")
        if self.max_hidden_cap is not None and self.max_hidden_cap < 1:
            raise ValueError("max_hidden_cap must be at least 1")


@dataclass
class AdagradState:
    """Per-parameter squared-gradient accumulators; grow/shrink with the model."""

    acc_W: np.ndarray
    acc_b_v: np.ndarray
    acc_b_h: np.ndarray

    @classmethod
    def zeros(cls, params: ModelParams) -> "AdagradState":
        return cls(
            acc_W=np.zeros_like(params.W),
            acc_b_v=np.zeros_like(params.b_v),
            acc_b_h=np.zeros_like(params.b_h),
        )

    def grow(self) -> None:
        self.acc_W = np.vstack([self.acc_W, np.zeros((1, self.acc_W.shape[1]))])
        self.acc_b_h = np.concatenate([self.acc_b_h, [0.0]])

    def shrink_to(self, num_hidden: int) -> None:
        self.acc_W = self.acc_W[:num_hidden].copy()
        self.acc_b_h = self.acc_b_h[:num_hidden].copy()


def adagrad_update(
    params: ModelParams,
    grads: GradientSet,
    state: AdagradState,
    lr: float,
    eps: float,
) -> tuple[ModelParams, AdagradState]:
    """theta -= lr * g / (eps + sqrt(acc)) after acc += g^2; updates in place."""
    state.acc_W += grads.dW * grads.dW
    state.acc_b_v += grads.db_v * grads.db_v
    state.acc_b_h += grads.db_h * grads.db_h
    params.W -= lr * grads.dW / (eps + np.sqrt(state.acc_W))
    params.b_v -= lr * grads.db_v / (eps + np.sqrt(state.acc_b_v))
    params.b_h -= lr * grads.db_h / (eps + np.sqrt(state.acc_b_h))
    return params, state


def apply_regularization(
    params: ModelParams,
    kind: str,
    lam: float,
    lr_effective_w,
    lr_effective_bh=None,
) -> ModelParams:
    """Decay W and b_h (never b_v) by the effective step size, in place.

    l2: theta -= lr_eff * lam * theta.
    l1: proximal soft-threshold sign(theta) * max(|theta| - lr_eff * lam, 0),
        which snaps small entries to exactly zero.
    The effective step sizes may be scalars or per-parameter arrays (the
    training loop passes the per-dimension ADAGRAD step).
    """
    if kind not in REG_KINDS:
        raise ValueError(f"reg_kind must be one of {REG_KINDS}")
    if kind == "none" or lam == 0.0:
        return params
    if lr_effective_bh is None:
        lr_effective_bh = lr_effective_w
    if kind == "l2":
        params.W -= lr_effective_w * lam * params.W
        params.b_h -= lr_effective_bh * lam * params.b_h
    else:
        params.W = np.sign(params.W) * np.maximum(
            np.abs(params.W) - lr_effective_w * lam, 0.0
        )
        params.b_h = np.sign(params.b_h) * np.maximum(
            np.abs(params.b_h) - lr_effective_bh * lam, 0.0
        )
    return params


def _hidden_cap(params: ModelParams, config: TrainConfig) -> int:
    if config.max_hidden_cap is not None:
        return config.max_hidden_cap
    return 10 * params.num_visible


def train_update(
    params: ModelParams,
    minibatch,
    config: TrainConfig,
    rng,
    pcd_state: ChainState | None = None,
    adagrad_state: AdagradState | None = None,
) -> tuple[ModelParams, ChainState | None, AdagradState, dict]:
    """One stochastic update; returns (params, pcd_state, adagrad_state, metrics).

    CD re-seeds its chains from the minibatch every call; PCD carries
    pcd_state across calls (it is created from the first minibatch when
    passed as None). The irbm grows at most one unit per update.
    """
    batch, _ = _as_batch(minibatch)
    if batch.shape[0] == 0:
        raise ValueError("empty batch")
    if adagrad_state is None:
        adagrad_state = AdagradState.zeros(params)
    mean_f = float(np.mean(np.atleast_1d(free_energy(params, batch))))

    if config.method == "cd":
        chains = init_chain(params, rng, mode="from-example", example=batch)
    else:
        if pcd_state is None:
            seed_rows = np.resize(batch, (config.batch_size, batch.shape[1]))
            pcd_state = init_chain(params, rng, mode="from-example", example=seed_rows)
        chains = pcd_state
    grew_any = False
    for _ in range(config.gibbs_steps):
        chains = gibbs_step(params, chains, rng)
        grew_any = grew_any or chains.any_grew()
    if config.method == "pcd":
        pcd_state = chains

    grads = nll_gradient_estimate(params, batch, chains.v)
    adagrad_update(params, grads, adagrad_state, config.lr, config.adagrad_eps)
    lr_eff_w = config.lr / (config.adagrad_eps + np.sqrt(adagrad_state.acc_W))
    lr_eff_bh = config.lr / (config.adagrad_eps + np.sqrt(adagrad_state.acc_b_h))
    apply_regularization(params, config.reg_kind, config.lam, lr_eff_w, lr_eff_bh)

    grew = 0
    shrunk = 0
    capped = False
    if params.variant is Variant.IRBM:
        if config.reg_kind == "l1":
            smaller = shrink_trailing_zero_units(params)
            shrunk = params.num_hidden - smaller.num_hidden
            if shrunk:
                params = smaller
                adagrad_state.shrink_to(params.num_hidden)
        if grew_any:
            if params.num_hidden < _hidden_cap(params, config):
                params = grow_hidden_unit(params)
                adagrad_state.grow()
                grew = 1
            else:
                capped = True
        if pcd_state is not None and pcd_state.z is not None:
            np.minimum(pcd_state.z, max(params.num_hidden, 1), out=pcd_state.z)

    metrics = {
        "mean_free_energy": mean_f,
        "num_hidden": params.num_hidden,
        "grew": grew,
        "shrunk": shrunk,
        "capped": capped,
    }
    return params, pcd_state, adagrad_state, metrics


@dataclass
class TrainRun:
    params: ModelParams
    history: list[dict] = field(default_factory=list)
    adagrad_state: AdagradState | None = None
    pcd_state: ChainState | None = None


def train(
    params: ModelParams,
    examples,
    config: TrainConfig,
    out_dir: str | None = None,
) -> TrainRun:
    """Epoch loop over seeded shuffled minibatches.

    History rows carry (epoch, mean_free_energy, K, wall_seconds); the
    final checkpoint (and optional periodic ones) land in out_dir.
    """
    examples = np.asarray(examples)
    n = examples.shape[0]
    if n == 0:
        raise ValueError("empty dataset")
    shuffle_rng = RngStream(config.seed, stream=1).generator()
    chain_rng = RngStream(config.seed, stream=2).generator()
    adagrad_state = AdagradState.zeros(params)
    pcd_state: ChainState | None = None
    history: list[dict] = []
    start_time = time.perf_counter()
    for epoch in range(1, config.epochs + 1):
        order = shuffle_rng.permutation(n)
        epoch_f = []
        capped = False
        for lo in range(0, n, config.batch_size):
            batch = examples[order[lo : lo + config.batch_size]].astype(np.float64)
            params, pcd_state, adagrad_state, metrics = train_update(
                params, batch, config, chain_rng, pcd_state, adagrad_state
            )
            epoch_f.append(metrics["mean_free_energy"])
            capped = capped or metrics["capped"]
        history.append(
            {
                "epoch": epoch,
                "mean_free_energy": float(np.mean(epoch_f)),
                "K": params.num_hidden,
                "wall_seconds": time.perf_counter() - start_time,
                "capped": capped,
            }
        )
        if (
            out_dir
            and config.checkpoint_every
            and epoch % config.checkpoint_every == 0
            and epoch < config.epochs
        ):
            save_checkpoint(
                os.path.join(out_dir, f"epoch_{epoch:05d}"),
                params,
                adagrad_state,
                pcd_state,
                seed=config.seed,
                epoch=epoch,
            )
    if out_dir:
        save_checkpoint(
            out_dir, params, adagrad_state, pcd_state, seed=config.seed, epoch=config.epochs
        )
        write_history_csv(os.path.join(out_dir, "history.csv"), history)
    return TrainRun(params, history, adagrad_state, pcd_state)


# ---------------------------------------------------------------------------
# training-state checkpoint extension
# ---------------------------------------------------------------------------

_OPT_FILES = {"acc_W": "adagrad_W.f64", "acc_b_v": "adagrad_bv.f64", "acc_b_h": "adagrad_bh.f64"}
PCD_V_FILE = "pcd_v.u8"
PCD_Z_FILE = "pcd_z.i64"


def save_checkpoint(
    directory: str,
    params: ModelParams,
    adagrad_state: AdagradState | None = None,
    pcd_state: ChainState | None = None,
    seed: int = 0,
    epoch: int = 0,
) -> None:
    """Model checkpoint plus optimizer accumulators and persistent chains."""
    save_model(directory, params, seed=seed, epoch=epoch)
    if adagrad_state is not None:
        for attr, fname in _OPT_FILES.items():
            arr = getattr(adagrad_state, attr)
            with open(os.path.join(directory, fname), "wb") as f:
                f.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    if pcd_state is not None:
        with open(os.path.join(directory, PCD_V_FILE), "wb") as f:
            f.write(np.ascontiguousarray(pcd_state.v, dtype=np.uint8).tobytes())
        if pcd_state.z is not None:
            with open(os.path.join(directory, PCD_Z_FILE), "wb") as f:
                f.write(np.ascontiguousarray(pcd_state.z, dtype="<i8").tobytes())


def load_train_state(
    directory: str, params: ModelParams
) -> tuple[AdagradState | None, ChainState | None]:
    """Read back the optimizer/chain files written by save_checkpoint, if present."""
    adagrad_state = None
    first = os.path.join(directory, _OPT_FILES["acc_W"])
    if os.path.isfile(first):
        arrs = {}
        for attr, fname in _OPT_FILES.items():
            with open(os.path.join(directory, fname), "rb") as f:
                arrs[attr] = np.frombuffer(f.read(), dtype="<f8").copy()
        adagrad_state = AdagradState(
            acc_W=arrs["acc_W"].reshape(params.num_hidden, params.num_visible),
            acc_b_v=arrs["acc_b_v"],
            acc_b_h=arrs["acc_b_h"],
        )
    pcd_state = None
    v_path = os.path.join(directory, PCD_V_FILE)
    if os.path.isfile(v_path):
        with open(v_path, "rb") as f:
            flat = np.frombuffer(f.read(), dtype=np.uint8)
        v = flat.reshape(-1, params.num_visible).astype(np.float64)
        z = None
        z_path = os.path.join(directory, PCD_Z_FILE)
        if os.path.isfile(z_path):
            with open(z_path, "rb") as f:
                z = np.frombuffer(f.read(), dtype="<i8").copy()
        grew = None if z is None else np.zeros(v.shape[0], dtype=bool)
        pcd_state = ChainState(v=v, z=z, grew=grew)
    return adagrad_state, pcd_state


def write_history_csv(path: str, history: list[dict]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["epoch", "mean_free_energy", "K", "wall_seconds"])
        for row in history:
            writer.writerow(
                [
                    row["epoch"],
                    repr(row["mean_free_energy"]),
                    row["K"],
                    f"{row['wall_seconds']:.3f}",
                ]
            )
