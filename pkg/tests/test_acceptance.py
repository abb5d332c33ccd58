"""Acceptance suite: one test per release criterion.

Every test checks its stated tolerance and wall-clock budget and prints a
single summary line (visible with ``pytest -s`` or in captured output).
The full suite trains several small models and runs a 100-round sampling
calibration, so it takes about ten minutes end to end.
"""

import os
import time
from pathlib import Path

import numpy as np
import pytest
from scipy.stats import spearmanr

import oracles
from growrbm.data_io import synthetic_patterns
from growrbm.energy import (
    exact_log_partition_small,
    irbm_zv_log_partition,
    p_z_given_v,
    z_posterior,
)
from growrbm.evaluation import AisConfig, ais_log_partition, exact_nll, gradcheck
from growrbm.gradients import _survival_matrix, free_energy_grads, orbm_free_energy_vz_grads
from growrbm.model import ModelParams, init_model
from growrbm.training import TrainConfig, train

VARIANTS = ("rbm", "orbm", "irbm")

LNZ_ORACLES = {
    "rbm": oracles.rbm_lnz_brute,
    "orbm": oracles.orbm_lnz_brute,
    "irbm": oracles.irbm_lnz_brute,
}


def _random_model(rng, variant, **kwargs):
    W, b_v, b_h, beta = oracles.random_params(rng, variant, **kwargs)
    return ModelParams(variant, W, b_v, b_h, beta), (W, b_v, b_h, beta)


def _random_visible(rng, num_visible):
    return (rng.random(num_visible) < 0.5).astype(np.float64)


def test_criterion_1_closed_form_lnz_matches_brute_force_enumeration():
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    worst = 0.0
    for variant in VARIANTS:
        for _ in range(200):
            params, raw = _random_model(rng, variant)
            got = exact_log_partition_small(params)
            want = LNZ_ORACLES[variant](*(raw[:3] if variant == "rbm" else raw))
            rel = abs(got - want) / abs(want)
            worst = max(worst, rel)
            assert rel <= 1e-10, f"{variant}: rel err {rel:.3e}"
    elapsed = time.perf_counter() - t0
    assert elapsed <= 60.0
    print(f"\nACCEPTANCE 1: PASS - 600 models, worst rel err "
          f"{worst:.2e} <= 1e-10, {elapsed:.1f}s <= 60s")


def test_criterion_2_geometric_tail_matches_truncated_extended_sum():
    rng = np.random.default_rng(202)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        params, (W, b_v, b_h, beta) = _random_model(rng, "irbm")
        for _ in range(5):
            v = _random_visible(rng, params.num_visible)
            got = irbm_zv_log_partition(params, v)
            want = oracles.irbm_lnzv_truncated(W, b_v, b_h, beta, v, num_terms=10_000)
            rel = abs(got - want) / abs(want)
            worst = max(worst, rel)
            assert rel <= 1e-8, f"rel err {rel:.3e}"
    elapsed = time.perf_counter() - t0
    assert elapsed <= 10.0
    print(f"\nACCEPTANCE 2: PASS - 100 models x 5 inputs, worst rel err "
          f"{worst:.2e} <= 1e-8, {elapsed:.1f}s <= 10s")


def test_criterion_3_analytic_gradients_pass_central_finite_differences():
    rng = np.random.default_rng(303)
    t0 = time.perf_counter()
    worst = 0.0
    for variant in VARIANTS:
        for _ in range(100):
            params, _ = _random_model(rng, variant)
            v = _random_visible(rng, params.num_visible)
            report = gradcheck(params, v, rel_tol=1e-6, abs_floor=1e-8)
            worst = max(worst, max(b.max_err_ratio for b in report.blocks))
            assert report.passed, f"{variant}: {report.blocks}"
    elapsed = time.perf_counter() - t0
    assert elapsed <= 60.0
    print(f"\nACCEPTANCE 3: PASS - 300 (model, v) pairs, worst err/allowance "
          f"{worst:.3f} <= 1, {elapsed:.1f}s <= 60s")


def test_criterion_4_posterior_weighted_per_z_gradients_mix_to_marginal():
    rng = np.random.default_rng(404)
    worst = 0.0
    for _ in range(100):
        params, _ = _random_model(rng, "orbm")
        v = _random_visible(rng, params.num_visible)
        z_probs = p_z_given_v(params, v).probs
        mixed = {"W": 0.0, "b_v": 0.0, "b_h": 0.0}
        for z in range(1, params.num_hidden + 1):
            for name, block in orbm_free_energy_vz_grads(params, v, z).blocks():
                mixed[name] = mixed[name] + z_probs[z - 1] * block
        for name, block in free_energy_grads(params, v).blocks():
            diff = np.max(np.abs(mixed[name] - block))
            worst = max(worst, diff)
            assert diff <= 1e-12, f"{name}: max abs diff {diff:.3e}"
    print(f"\nACCEPTANCE 4: PASS - 100 models, worst abs deviation "
          f"{worst:.2e} <= 1e-12")


def test_criterion_5_ais_calibration_against_exact_lnz():
    rng = np.random.default_rng(12345)
    W = rng.uniform(-0.5, 0.5, size=(8, 10))
    b_v = rng.uniform(-0.2, 0.2, size=10)
    b_h = rng.uniform(-0.2, 0.2, size=8)
    params = ModelParams("rbm", W, b_v, b_h)
    ln_z = exact_log_partition_small(params)

    t0 = time.perf_counter()
    errors, hits = [], 0
    for seed in range(100):
        result = ais_log_partition(
            params, AisConfig(num_intermediate=10_000, num_chains=500, seed=seed)
        )
        errors.append(abs(result.ln_z_hat - ln_z))
        hits += result.ln_z_lo3sigma <= ln_z <= result.ln_z_hi3sigma
    elapsed = time.perf_counter() - t0
    median_err = float(np.median(errors))

    assert hits >= 95, f"interval covered exact lnZ in only {hits}/100 runs"
    assert median_err <= 0.05, f"median |error| {median_err:.4f} nats"
    assert elapsed <= 600.0
    print(f"\nACCEPTANCE 5: PASS - interval hits {hits}/100 >= 95, median "
          f"|err| {median_err:.4f} <= 0.05 nats, {elapsed:.0f}s <= 600s")


def test_criterion_6_grown_model_matches_equally_sized_fixed_model():
    all_data = synthetic_patterns(16, 4, 0.05, 2512, seed=0)
    train_x = all_data.to_float()[:2000]
    test_x = all_data.to_float()[2000:]
    config = TrainConfig(lr=0.05, reg_kind="l1", lam=1e-4, batch_size=64,
                         gibbs_steps=10, epochs=200, method="pcd", seed=0)

    t0 = time.perf_counter()
    grown = train(init_model("irbm", 16, 1, beta=1.01, init_scale=0.01, seed=1),
                  train_x, config)
    final_width = grown.params.num_hidden
    assert final_width > 1, "hidden layer never grew"
    nll_grown = exact_nll(grown.params, test_x)

    fixed = train(init_model("rbm", 16, final_width, beta=1.01, init_scale=0.01,
                             seed=1), train_x, config)
    nll_fixed = exact_nll(fixed.params, test_x)
    elapsed = time.perf_counter() - t0

    diff = abs(nll_grown - nll_fixed)
    assert diff <= 0.1, (f"test NLL gap {diff:.4f} nats (grown {nll_grown:.4f} "
                         f"vs fixed {nll_fixed:.4f})")
    assert elapsed <= 900.0
    print(f"\nACCEPTANCE 6: PASS - grew 1 -> {final_width} units, test NLL "
          f"{nll_grown:.4f} vs fixed-width {nll_fixed:.4f} (gap {diff:.4f} "
          f"<= 0.1 nats), {elapsed:.0f}s <= 900s")


def test_criterion_7_training_orders_units_by_decreasing_filter_norm():
    train_x = synthetic_patterns(16, 4, 0.05, 2000, seed=0).to_float()
    params = init_model("orbm", 16, 16, beta=1.5, init_scale=0.01, seed=0)
    config = TrainConfig(lr=0.05, reg_kind="l1", lam=1e-4, batch_size=64,
                         gibbs_steps=10, epochs=200, method="pcd", seed=0,
                         beta=1.5)
    run = train(params, train_x, config)
    norms = np.linalg.norm(run.params.W, axis=1)
    rho = spearmanr(np.arange(16), norms).statistic
    assert rho <= 0.0, f"Spearman(index, row norm) = {rho:.3f} > 0"
    print(f"\nACCEPTANCE 7: PASS - trained 16-unit ordered model has "
          f"Spearman(index, row norm) = {rho:.3f} <= 0")


def test_criterion_8_survival_function_never_increases():
    rng = np.random.default_rng(808)
    rows = 0
    violations = 0
    num_models = 0
    while rows < 100_000:
        num_models += 1
        variant = "orbm" if num_models % 2 else "irbm"
        scale = float(rng.choice([0.1, 1.0, 10.0]))
        params, _ = _random_model(rng, variant, max_visible=10, max_hidden=8,
                                  scale=scale)
        if params.num_hidden == 0:
            continue
        batch = (rng.random((2000, params.num_visible)) < 0.5).astype(np.float64)
        probs, tail = z_posterior(params, batch)
        if variant == "irbm":
            probs = np.concatenate([probs, tail[:, None]], axis=1)
        survival = _survival_matrix(probs)
        violations += int(np.count_nonzero(np.diff(survival, axis=1) > 0.0))
        violations += int(np.count_nonzero(survival[:, 0] != 1.0))
        rows += batch.shape[0]
    assert violations == 0, f"{violations} monotonicity violations in {rows} rows"
    print(f"\nACCEPTANCE 8: PASS - {rows} random inputs, 0 violations of "
          f"nonincreasing survival")


def test_criterion_9_full_scale_reproduction_scripts_ship():
    # The published-scale benchmarks take weeks of compute, so the release
    # gate is that the exact end-to-end scripts exist and drive this CLI.
    scripts_dir = Path(__file__).resolve().parents[1] / "scripts"
    for name in ("reproduce_mnist.sh", "reproduce_caltech101.sh"):
        path = scripts_dir / name
        assert path.is_file(), f"missing {path}"
        assert os.access(path, os.X_OK), f"{name} is not executable"
        text = path.read_text()
        assert "growrbm train" in text
        assert "growrbm eval" in text
        assert "--ais-inter 100000" in text and "--ais-chains 5000" in text
        assert "--cd-steps 10" in text and "--batch 64" in text
        assert "--checkpoint-every 1000" in text
    print("\nACCEPTANCE 9: PASS - full-scale reproduction scripts ship "
          "(not executed: multi-week compute)")
