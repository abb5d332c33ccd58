"""Shared fixtures for the test suite."""

import numpy as np
import pytest

from growrbm.model import ModelParams

from oracles import random_params


@pytest.fixture
def rng():
    return np.random.default_rng(20260814)


def make_model(rng, variant, max_visible=6, max_hidden=4, scale=2.0, beta=1.01):
    """Random small model plus the raw arrays its oracle twin needs."""
    W, b_v, b_h, beta = random_params(rng, variant, max_visible, max_hidden, scale, beta)
    return ModelParams(variant, W, b_v, b_h, beta=beta), (W, b_v, b_h, beta)


@pytest.fixture
def small_rbm(rng):
    return make_model(rng, "rbm")[0]


@pytest.fixture
def small_orbm(rng):
    return make_model(rng, "orbm")[0]


@pytest.fixture
def small_irbm(rng):
    params, _ = make_model(rng, "irbm")
    while params.num_hidden == 0:
        params, _ = make_model(rng, "irbm")
    return params


@pytest.fixture
def random_batch(rng):
    def _draw(num_examples, num_visible):
        return (rng.random((num_examples, num_visible)) < 0.5).astype(np.float64)

    return _draw
