"""Shared fixtures: standard worlds and pre-trained expert sets.

Session scope keeps the expensive pieces (QW-4 experts, surface stages)
trained once for the whole run.
"""

from __future__ import annotations

import numpy as np
import pytest

from mergemix.seeding import stable_seed
from mergemix.surface import run_search_stage
from mergemix.training import TrainConfig, train_expert
from mergemix.worlds import fixture_qw2, fixture_qw4, fixture_qw_separable, fixture_toy

RUN_SEED = 11

QW2_TRAIN = TrainConfig(learning_rate=0.05, steps=10, checkpoint_interval=2,
                        seed=stable_seed(RUN_SEED, "train"))
QW4_TRAIN = TrainConfig(learning_rate=0.05, steps=3, checkpoint_interval=1,
                        seed=stable_seed(RUN_SEED, "train"))


@pytest.fixture(scope="session")
def qw2():
    return fixture_qw2()


@pytest.fixture(scope="session")
def qw4():
    return fixture_qw4()


@pytest.fixture(scope="session")
def qw_sep():
    return fixture_qw_separable()


@pytest.fixture(scope="session")
def toy_world():
    return fixture_toy()


@pytest.fixture(scope="session")
def qw2_experts(qw2):
    base = qw2.base_params()
    return [train_expert(qw2, k, base, QW2_TRAIN) for k in range(qw2.num_domains)]


@pytest.fixture(scope="session")
def qw4_experts(qw4):
    base = qw4.base_params()
    return [train_expert(qw4, k, base, QW4_TRAIN) for k in range(qw4.num_domains)]


@pytest.fixture(scope="session")
def qw4_stage(qw4, qw4_experts):
    return run_search_stage(
        qw4, qw4.base_params(), qw4_experts,
        design_size=40, seed=stable_seed(RUN_SEED, "design"),
    )
