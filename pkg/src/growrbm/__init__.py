"""Binary restricted Boltzmann machines with ordered and growing hidden layers.

The three variants share one parameterization (ModelParams):

* rbm   - the classic machine with an unordered hidden layer.
* orbm  - a fixed-size hidden layer with an ordering: a random variable z
          picks how many leading units participate, and each participating
          unit pays a penalty beta * softplus(b_h).
* irbm  - the K -> infinity limit of the orbm; only a finite prefix of
          units has been trained, the rest are exactly zero and contribute
          a closed-form geometric tail. Training grows the prefix on demand.
"""

from .model import ModelParams, Variant, grow_hidden_unit, init_model, load_model, save_model, shrink_trailing_zero_units
from .energy import (
    ZDistribution,
    exact_log_partition_small,
    free_energy,
    irbm_zv_log_partition,
    orbm_energy,
    orbm_free_energy,
    orbm_free_energy_vz,
    p_z_given_v,
    rbm_energy,
    rbm_free_energy,
)
from .gradients import (
    GradientSet,
    free_energy_grads,
    irbm_hybrid_grads,
    nll_gradient_estimate,
    orbm_free_energy_grads,
    orbm_free_energy_vz_grads,
    rbm_free_energy_grads,
)
from .sampling import ChainState, RngStream, gibbs_step, init_chain, run_chain
from .training import AdagradState, TrainConfig, adagrad_update, apply_regularization, train, train_update
from .evaluation import (
    AisConfig,
    AisResult,
    ais_log_partition,
    estimate_nll,
    exact_nll,
    gradcheck,
    inspect_z,
)
from .data_io import Dataset, load_idx_images, read_packed, stochastic_binarize, synthetic_patterns, write_packed

__version__ = "0.1.0"
