"""Shared fixtures: the canonical dataset, trained models, and param builders.

Training is expensive relative to everything else here, so trained models are
session-scoped and reused by both the unit tests and the acceptance suite.
The canonical configuration is the tuned two-moons setup: 750 points at noise
0.125 (data seed 101) split 500/250 (split seed 7).
"""

from __future__ import annotations

import numpy as np
import pytest

from relulimits import (
    AnchorConfig,
    Dataset,
    InstanceSet,
    MLPParams,
    SplitMix64,
    TrainConfig,
    build_anchored_ensemble,
    build_ensemble,
    make_half_moons,
    mc_dropout_instances,
    single_instance_set,
    split,
    train,
)

DATA_SEED = 101
SPLIT_SEED = 7

NN_CONFIG = TrainConfig(
    hidden_sizes=(25, 25, 25),
    lr=0.000538,
    dropout_rate=0.014552,
    batch_size=64,
    max_epochs=20,
    patience=5,
    seed=0,
)

MCD_CONFIG = TrainConfig(
    hidden_sizes=(25, 25, 25, 25),
    lr=0.000526,
    dropout_rate=0.205046,
    batch_size=64,
    max_epochs=20,
    patience=5,
    seed=0,
)


def random_params(layer_sizes: tuple[int, ...], seed: int, scale: float = 1.0) -> MLPParams:
    """Random dense net for unit tests; Gaussian entries, no training."""
    rng = SplitMix64(seed)
    ws, bs = [], []
    for fan_in, fan_out in zip(layer_sizes, layer_sizes[1:]):
        ws.append(scale * rng.normal(fan_out * fan_in).reshape(fan_out, fan_in))
        bs.append(scale * rng.normal(fan_out))
    return MLPParams(tuple(ws), tuple(bs))


@pytest.fixture(scope="session")
def moons() -> Dataset:
    return make_half_moons(750, 0.125, DATA_SEED)


@pytest.fixture(scope="session")
def train_val(moons) -> tuple[Dataset, Dataset]:
    return split(moons, 500, 250, SPLIT_SEED)


@pytest.fixture(scope="session")
def single_params(train_val) -> MLPParams:
    params, report = train(NN_CONFIG, train_val[0], train_val[1])
    assert report.val_accuracy is not None and report.val_accuracy >= 0.85
    return params


@pytest.fixture(scope="session")
def single_set(single_params) -> InstanceSet:
    return single_instance_set(single_params, seed=NN_CONFIG.seed)


@pytest.fixture(scope="session")
def ensemble5(train_val) -> InstanceSet:
    instance_set, _ = build_ensemble(NN_CONFIG, train_val[0], train_val[1], 5, 0)
    return instance_set


@pytest.fixture(scope="session")
def anchored5(train_val) -> InstanceSet:
    config = TrainConfig(
        hidden_sizes=NN_CONFIG.hidden_sizes,
        lr=NN_CONFIG.lr,
        dropout_rate=NN_CONFIG.dropout_rate,
        batch_size=NN_CONFIG.batch_size,
        max_epochs=NN_CONFIG.max_epochs,
        patience=NN_CONFIG.patience,
        seed=NN_CONFIG.seed,
        anchored=AnchorConfig(prior_std=1.0),
    )
    instance_set, _ = build_anchored_ensemble(config, train_val[0], train_val[1], 5, 0)
    return instance_set


@pytest.fixture(scope="session")
def mcd_base(train_val) -> MLPParams:
    params, _ = train(MCD_CONFIG, train_val[0], train_val[1])
    return params


@pytest.fixture(scope="session")
def mcdropout50(mcd_base) -> InstanceSet:
    return mc_dropout_instances(mcd_base, MCD_CONFIG.dropout_rate, 50, seed=77)


@pytest.fixture()
def rng() -> SplitMix64:
    return SplitMix64(2024)


@pytest.fixture()
def tiny_params() -> MLPParams:
    """2-5-5-2 random net, enough structure for region geometry."""
    return random_params((2, 5, 5, 2), seed=11)


def sample_box(rng: SplitMix64, n: int, lo: float = -3.0, hi: float = 3.0) -> np.ndarray:
    return lo + (hi - lo) * rng.uniform(2 * n).reshape(n, 2)
