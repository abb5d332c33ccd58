"""Partition-function estimation, likelihood evaluation, and diagnostics.

AIS anneals from a zero-weight base model to the target along inverse
temperatures t_k = k / num_intermediate. The temperature scales the
hidden-side parameters (W, b_h) inside their softplus terms, so every
intermediate distribution is itself a valid machine of the same variant
with parameters (t W, t b_h) and stays exactly marginalizable; the
visible bias is interpolated linearly from the base's bias (zero by
default, optionally fitted to data marginals) to the target's. At t = 0
the hidden factor is constant in v, so the base partition function is
closed-form for all three variants, including the irbm's geometric tail.

Each chain contributes one importance weight in the log domain; the
estimate is their log-mean-exp plus ln Z_base, with a +-3 sigma interval
from the delta method applied to the weight population.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import gradients
from .energy import (
    _as_batch,
    exact_log_partition_small,
    free_energy,
    log_geometric_tail,
    z_posterior,
)
from .gradients import GradientSet
from .model import ModelParams, Variant
from .numeric import LN2, log_sum_exp, sigmoid, softplus
from .sampling import RngStream


@dataclass
class AisConfig:
    num_intermediate: int = 100_000
    num_chains: int = 5000
    seed: int = 0

    def __post_init__(self):
        if self.num_intermediate < 1:
            raise ValueError("num_intermediate must be at least 1")
        if self.num_chains < 2:
            raise ValueError("num_chains must be at least 2")


@dataclass
class AisResult:
    ln_z_hat: float
    ln_z_lo3sigma: float
    ln_z_hi3sigma: float
    ess: float


def _log_z_base(params: ModelParams, bv_base: np.ndarray) -> float:
    """Closed-form ln Z of the t = 0 model (zero weights, bias bv_base)."""
    base = float(np.sum(softplus(bv_base)))
    if params.variant is Variant.RBM:
        return base + params.num_hidden * LN2
    log_r = (1.0 - params.beta) * LN2
    if params.variant is Variant.ORBM:
        k = params.num_hidden
        return base + log_r + np.log1p(-np.exp(k * log_r)) - np.log1p(-np.exp(log_r))
    return base + log_geometric_tail(params.beta)


def _annealed_log_pstar(
    params: ModelParams,
    raw: np.ndarray,
    vis: np.ndarray,
    t: float,
    log_tail: float | None,
):
    """(ln p*_t(v), per-z cumulative table or None) at inverse temperature t.

    raw is the unscaled preactivation W v + b_h, so the t-model's
    preactivation is just t * raw; vis is v . bv_eff(t).
    """
    if params.variant is Variant.RBM:
        return vis + softplus(t * raw).sum(axis=1), None
    terms = softplus(t * raw) - params.beta * softplus(t * params.b_h)
    cum = np.cumsum(terms, axis=1)
    if params.variant is Variant.ORBM:
        return vis + log_sum_exp(cum, axis=1), cum
    if params.num_hidden == 0:
        return vis + log_tail, cum
    tail_col = cum[:, -1] + log_tail
    full = np.hstack([cum, tail_col[:, None]])
    return vis + log_sum_exp(full, axis=1), cum


def _annealed_transition(
    params: ModelParams,
    v: np.ndarray,
    raw: np.ndarray,
    cum: np.ndarray | None,
    t: float,
    bv_eff: np.ndarray,
    log_tail: float | None,
    gen: np.random.Generator,
) -> np.ndarray:
    """One Gibbs transition of the t-model; returns the new visible batch."""
    n = v.shape[0]
    k = params.num_hidden
    if params.variant is Variant.RBM:
        h = (gen.random(raw.shape) < sigmoid(t * raw)).astype(np.float64)
    else:
        if k == 0:
            z_eff = np.zeros(n, dtype=np.int64)
        else:
            table = cum
            if params.variant is Variant.IRBM:
                table = np.hstack([cum, (cum[:, -1] + log_tail)[:, None]])
            shift = table - table.max(axis=1, keepdims=True)
            w = np.exp(shift)
            cdf = np.cumsum(w, axis=1)
            u = gen.random(n)
            z = (u[:, None] > cdf / cdf[:, -1:]).sum(axis=1).astype(np.int64) + 1
            z_eff = np.minimum(z, k)
        active = np.arange(k)[None, :] < z_eff[:, None]
        h = ((gen.random((n, k)) < sigmoid(t * raw)) & active).astype(np.float64)
    p_v = sigmoid(t * (h @ params.W) + bv_eff)
    return (gen.random(p_v.shape) < p_v).astype(np.float64)


def _ais_block(
    params: ModelParams,
    bv_base: np.ndarray,
    num_chains: int,
    num_intermediate: int,
    gen: np.random.Generator,
) -> np.ndarray:
    log_tail = log_geometric_tail(params.beta) if params.variant is Variant.IRBM else None
    ts = np.arange(num_intermediate + 1) / num_intermediate
    v = (gen.random((num_chains, params.num_visible)) < sigmoid(bv_base)).astype(
        np.float64
    )
    logw = np.zeros(num_chains)
    t_prev = 0.0
    for k in range(1, num_intermediate + 1):
        t = float(ts[k])
        raw = v @ params.W.T + params.b_h
        dot_base = v @ bv_base
        dot_tgt = v @ params.b_v
        lp_prev, _ = _annealed_log_pstar(
            params, raw, (1.0 - t_prev) * dot_base + t_prev * dot_tgt, t_prev, log_tail
        )
        vis_cur = (1.0 - t) * dot_base + t * dot_tgt
        lp_cur, cum = _annealed_log_pstar(params, raw, vis_cur, t, log_tail)
        logw += lp_cur - lp_prev
        bv_eff = (1.0 - t) * bv_base + t * params.b_v
        v = _annealed_transition(params, v, raw, cum, t, bv_eff, log_tail, gen)
        t_prev = t
    return logw


def ais_log_partition(
    params: ModelParams,
    config: AisConfig,
    base_visible_bias: np.ndarray | None = None,
    threads: int = 1,
) -> AisResult:
    """Annealed importance sampling estimate of ln Z with a 3 sigma interval.

    Chains are advanced in vectorized blocks; with threads > 1 the blocks
    run on a thread pool, each with its own RNG stream, and their weights
    are folded in block order so results are reproducible for a fixed
    (seed, threads) pair.
    """
    if threads < 1:
        raise ValueError("threads must be at least 1")
    bv_base = (
        np.zeros(params.num_visible)
        if base_visible_bias is None
        else np.asarray(base_visible_bias, dtype=np.float64)
    )
    if bv_base.shape != (params.num_visible,):
        raise ValueError("base visible bias has the wrong length")
    counts = [
        config.num_chains // threads + (1 if i < config.num_chains % threads else 0)
        for i in range(threads)
    ]
    jobs = [
        (i, c, RngStream(config.seed, stream=i).generator())
        for i, c in enumerate(counts)
        if c > 0
    ]
    if len(jobs) == 1:
        parts = [_ais_block(params, bv_base, jobs[0][1], config.num_intermediate, jobs[0][2])]
    else:
        with ThreadPoolExecutor(max_workers=len(jobs)) as pool:
            futures = [
                pool.submit(
                    _ais_block, params, bv_base, c, config.num_intermediate, gen
                )
                for _i, c, gen in jobs
            ]
            parts = [f.result() for f in futures]
    logw = np.concatenate(parts)
    if not np.all(np.isfinite(logw)):
        raise RuntimeError("AIS diverged")

    n = logw.shape[0]
    ln_z_base = _log_z_base(params, bv_base)
    log_mean = log_sum_exp(logw) - np.log(n)
    log_mean_sq = log_sum_exp(2.0 * logw) - np.log(n)
    ln_z_hat = ln_z_base + log_mean
    # delta method on the weight population, kept in the log domain
    if log_mean_sq > 2.0 * log_mean:
        log_var = log_mean_sq + np.log1p(-np.exp(2.0 * log_mean - log_mean_sq))
        log_sigma_mean = 0.5 * (log_var - np.log(n))
        log_3sigma = np.log(3.0) + log_sigma_mean
        hi = ln_z_base + np.logaddexp(log_mean, log_3sigma)
        if log_3sigma < log_mean:
            lo = ln_z_base + log_mean + np.log1p(-np.exp(log_3sigma - log_mean))
        else:
            lo = -np.inf
    else:
        hi = ln_z_hat
        lo = ln_z_hat
    ess = float(np.exp(2.0 * log_sum_exp(logw) - log_sum_exp(2.0 * logw)))
    return AisResult(
        ln_z_hat=float(ln_z_hat),
        ln_z_lo3sigma=float(lo),
        ln_z_hi3sigma=float(hi),
        ess=ess,
    )


# ---------------------------------------------------------------------------
# likelihood
# ---------------------------------------------------------------------------


def exact_nll(params: ModelParams, examples) -> float:
    """Mean negative log-likelihood using the exactly enumerated ln Z."""
    batch, _ = _as_batch(examples)
    if batch.shape[0] == 0:
        raise ValueError("empty dataset")
    ln_z = exact_log_partition_small(params)
    return float(np.mean(np.atleast_1d(free_energy(params, batch))) + ln_z)


def estimate_nll(params: ModelParams, examples, ln_z: float) -> tuple[float, float]:
    """(mean NLL, ci95) for a given ln Z estimate; ci95 = 1.96 stderr."""
    batch, _ = _as_batch(examples)
    n = batch.shape[0]
    if n == 0:
        raise ValueError("empty dataset")
    nlls = np.atleast_1d(free_energy(params, batch)) + ln_z
    ci = 0.0 if n < 2 else float(1.96 * np.std(nlls, ddof=1) / np.sqrt(n))
    return float(np.mean(nlls)), ci


# ---------------------------------------------------------------------------
# gradient checking
# ---------------------------------------------------------------------------


@dataclass
class BlockCheck:
    name: str
    max_err_ratio: float  # abs error over allowance; <= 1 passes
    worst_index: tuple | None
    passed: bool


@dataclass
class GradcheckReport:
    blocks: list[BlockCheck]
    passed: bool


def finite_difference_grads(params: ModelParams, v, step: float = 1e-5) -> GradientSet:
    """Central differences of the variant free energy w.r.t. every parameter."""
    work = params.copy()
    out = {}
    for name, arr in (("W", work.W), ("b_v", work.b_v), ("b_h", work.b_h)):
        g = np.zeros_like(arr)
        for idx in np.ndindex(arr.shape):
            orig = arr[idx]
            arr[idx] = orig + step
            f_hi = free_energy(work, v)
            arr[idx] = orig - step
            f_lo = free_energy(work, v)
            arr[idx] = orig
            g[idx] = (f_hi - f_lo) / (2.0 * step)
        out[name] = g
    return GradientSet(dW=out["W"], db_v=out["b_v"], db_h=out["b_h"])


def gradcheck(
    params: ModelParams,
    v,
    rel_tol: float = 1e-6,
    abs_floor: float = 1e-8,
    step: float = 1e-5,
    analytic: GradientSet | None = None,
) -> GradcheckReport:
    """Compare analytic free-energy gradients against central differences.

    An entry passes when |analytic - fd| <= max(rel_tol * scale, abs_floor)
    with scale = max(|analytic|, |fd|); the report localizes the worst
    entry of each block so a corrupted gradient is easy to pin down.
    """
    if analytic is None:
        analytic = gradients.free_energy_grads(params, v)
    fd = finite_difference_grads(params, v, step=step)
    blocks = []
    for (name, a), (_n2, f) in zip(analytic.blocks(), fd.blocks()):
        if a.size == 0:
            blocks.append(BlockCheck(name, 0.0, None, True))
            continue
        err = np.abs(a - f)
        allowance = np.maximum(rel_tol * np.maximum(np.abs(a), np.abs(f)), abs_floor)
        ratio = err / allowance
        worst = np.unravel_index(int(np.argmax(ratio)), ratio.shape)
        worst_ratio = float(ratio[worst])
        blocks.append(BlockCheck(name, worst_ratio, worst, worst_ratio <= 1.0))
    return GradcheckReport(blocks=blocks, passed=all(b.passed for b in blocks))


# ---------------------------------------------------------------------------
# z inspection
# ---------------------------------------------------------------------------


def inspect_z(params: ModelParams, examples) -> np.ndarray:
    """(N, S) matrix of P(z | v): S = K for the orbm, l + 1 for the irbm
    (the final bucket aggregates the tail, reported as outcome l + 1)."""
    batch, _ = _as_batch(examples)
    probs, tail = z_posterior(params, batch)
    if params.variant is Variant.IRBM:
        return np.hstack([probs, tail[:, None]])
    return probs


def interval_mass(z_probs: np.ndarray, lo: int, hi: int) -> np.ndarray:
    """P(lo <= z < hi | v) per row of an inspect_z matrix."""
    s = z_probs.shape[1]
    if lo < 1 or hi <= lo:
        raise ValueError(f"bad z interval [{lo}, {hi})")
    return z_probs[:, lo - 1 : min(hi - 1, s)].sum(axis=1)


def top_examples_by_interval(
    z_probs: np.ndarray, intervals: list[tuple[int, int]], top_k: int = 10
) -> list[dict]:
    """For each [a, b) interval, the top_k example indices by P(a <= z < b | v).

    Ties keep dataset order (stable sort), so identical examples rank
    identically across intervals.
    """
    out = []
    for lo, hi in intervals:
        mass = interval_mass(z_probs, lo, hi)
        order = np.argsort(-mass, kind="stable")[:top_k]
        out.append(
            {
                "interval": (lo, hi),
                "indices": [int(i) for i in order],
                "probs": [float(mass[i]) for i in order],
            }
        )
    return out
