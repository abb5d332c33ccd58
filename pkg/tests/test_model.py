"""Tests for model containers, initialization, and checkpoint serialization."""

import json

import numpy as np
import numpy.testing as npt
import pytest

from growrbm.model import (
    ModelParams,
    Variant,
    grow_hidden_unit,
    init_model,
    load_model,
    save_model,
    shrink_trailing_zero_units,
)


class TestVariant:
    def test_values(self):
        assert Variant("rbm") is Variant.RBM
        assert Variant("orbm") is Variant.ORBM
        assert Variant("irbm") is Variant.IRBM

    def test_ordered_flag(self):
        assert not Variant.RBM.ordered
        assert Variant.ORBM.ordered
        assert Variant.IRBM.ordered


class TestModelParams:
    def test_shapes_and_dtypes(self, rng):
        W = rng.normal(size=(3, 5))
        m = ModelParams("rbm", W, np.zeros(5), np.zeros(3))
        assert m.num_visible == 5
        assert m.num_hidden == 3
        assert m.W.dtype == np.float64
        assert m.W.flags.c_contiguous

    def test_defensive_copy(self, rng):
        W = rng.normal(size=(2, 2))
        m = ModelParams("rbm", W, np.zeros(2), np.zeros(2))
        W[0, 0] = 99.0
        assert m.W[0, 0] != 99.0

    def test_shape_mismatch_rejected(self, rng):
        with pytest.raises(ValueError):
            ModelParams("rbm", rng.normal(size=(2, 3)), np.zeros(4), np.zeros(2))
        with pytest.raises(ValueError):
            ModelParams("rbm", rng.normal(size=(2, 3)), np.zeros(3), np.zeros(5))

    def test_zero_hidden_only_for_infinite_variant(self):
        ModelParams("irbm", np.zeros((0, 4)), np.zeros(4), np.zeros(0))
        for variant in ("rbm", "orbm"):
            with pytest.raises(ValueError):
                ModelParams(variant, np.zeros((0, 4)), np.zeros(4), np.zeros(0))

    @pytest.mark.parametrize("variant", ["orbm", "irbm"])
    def test_ordered_variants_need_beta_above_one(self, variant):
        with pytest.raises(ValueError, match="beta"):
            ModelParams(variant, np.zeros((1, 2)), np.zeros(2), np.zeros(1), beta=1.0)

    def test_plain_rbm_ignores_beta_constraint(self):
        ModelParams("rbm", np.zeros((1, 2)), np.zeros(2), np.zeros(1), beta=1.0)

    def test_copy_is_independent(self, small_rbm):
        dup = small_rbm.copy()
        dup.W[0, 0] += 1.0
        assert small_rbm.W[0, 0] != dup.W[0, 0]


class TestInitModel:
    def test_deterministic_given_seed(self):
        a = init_model("rbm", 7, 3, seed=42)
        b = init_model("rbm", 7, 3, seed=42)
        npt.assert_array_equal(a.W, b.W)
        assert a.W.tobytes() == b.W.tobytes()

    def test_seed_changes_weights(self):
        a = init_model("rbm", 7, 3, seed=42)
        b = init_model("rbm", 7, 3, seed=43)
        assert not np.array_equal(a.W, b.W)

    def test_biases_start_at_zero_and_weights_are_small(self):
        m = init_model("orbm", 10, 4, beta=1.01, init_scale=0.01, seed=0)
        npt.assert_array_equal(m.b_v, 0.0)
        npt.assert_array_equal(m.b_h, 0.0)
        assert np.all(np.abs(m.W) <= 0.01)
        assert np.any(m.W != 0.0)

    def test_infinite_variant_starts_with_one_unit(self):
        m = init_model("irbm", 5, 1, beta=1.01, seed=0)
        assert m.num_hidden == 1


class TestGrowShrink:
    def test_grow_appends_exact_zero_unit(self, small_irbm):
        before = small_irbm.num_hidden
        grown = grow_hidden_unit(small_irbm)
        assert grown.num_hidden == before + 1
        npt.assert_array_equal(grown.W[-1], 0.0)
        assert grown.b_h[-1] == 0.0
        npt.assert_array_equal(grown.W[:before], small_irbm.W)

    def test_grow_rejected_for_fixed_variants(self, small_rbm):
        with pytest.raises(ValueError):
            grow_hidden_unit(small_rbm)

    def test_shrink_removes_maximal_zero_suffix(self):
        W = np.array([[1.0, 2.0], [0.0, 0.0], [0.0, 0.0]])
        m = ModelParams("irbm", W, np.zeros(2), np.zeros(3), beta=1.01)
        shrunk = shrink_trailing_zero_units(m)
        assert shrunk.num_hidden == 1
        npt.assert_array_equal(shrunk.W, [[1.0, 2.0]])

    def test_shrink_keeps_interior_zero_rows(self):
        W = np.array([[0.0, 0.0], [1.0, 0.0]])
        m = ModelParams("irbm", W, np.zeros(2), np.zeros(2), beta=1.01)
        assert shrink_trailing_zero_units(m).num_hidden == 2

    def test_shrink_respects_nonzero_hidden_bias(self):
        W = np.zeros((2, 2))
        m = ModelParams("irbm", W, np.zeros(2), np.array([0.0, 0.5]), beta=1.01)
        assert shrink_trailing_zero_units(m).num_hidden == 2

    def test_shrink_can_empty_the_model(self):
        m = ModelParams("irbm", np.zeros((2, 3)), np.zeros(3), np.zeros(2), beta=1.01)
        assert shrink_trailing_zero_units(m).num_hidden == 0


class TestCheckpointRoundTrip:
    def test_bit_exact_round_trip(self, tmp_path, rng):
        W = rng.normal(size=(4, 9)) * np.pi
        m = ModelParams("orbm", W, rng.normal(size=9), rng.normal(size=4), beta=1.25)
        save_model(tmp_path / "ckpt", m, seed=7, epoch=3)
        back, meta = load_model(tmp_path / "ckpt")
        assert back.variant == m.variant
        assert back.beta == m.beta
        assert back.W.tobytes() == m.W.tobytes()
        assert back.b_v.tobytes() == m.b_v.tobytes()
        assert back.b_h.tobytes() == m.b_h.tobytes()
        assert meta["seed"] == 7 and meta["epoch"] == 3

    def test_meta_is_sorted_json(self, tmp_path, small_rbm):
        save_model(tmp_path / "ckpt", small_rbm)
        text = (tmp_path / "ckpt" / "meta.json").read_text()
        meta = json.loads(text)
        assert list(meta) == sorted(meta)
        assert meta["variant"] == "rbm"

    def test_weights_stored_little_endian_row_major(self, tmp_path):
        W = np.array([[1.0, 2.0], [3.0, 4.0]])
        m = ModelParams("rbm", W, np.zeros(2), np.zeros(2))
        save_model(tmp_path / "ckpt", m)
        raw = (tmp_path / "ckpt" / "W.f64").read_bytes()
        npt.assert_array_equal(np.frombuffer(raw, dtype="<f8"), [1.0, 2.0, 3.0, 4.0])

    def test_missing_checkpoint_raises(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_model(tmp_path / "nope")

    def test_zero_unit_model_round_trip(self, tmp_path):
        m = ModelParams("irbm", np.zeros((0, 3)), np.zeros(3), np.zeros(0), beta=1.01)
        save_model(tmp_path / "ckpt", m)
        back, _ = load_model(tmp_path / "ckpt")
        assert back.num_hidden == 0
        assert back.num_visible == 3
