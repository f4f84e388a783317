import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("fl", deadline=None)
settings.load_profile("fl")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def base_config_dict():
    """Small, fast, valid config dict; sections can be overridden per test."""
    def make(**overrides):
        doc = {
            "model": {"kind": "softmax-regression", "input_dim": 4, "num_classes": 3},
            "loss": {"weight_decay": 1e-4},
            "data": {"num_clients": 6, "dirichlet_alpha": 0.5, "train_per_class": 30,
                     "test_per_class": 20, "spread": 1.0},
            "server_data": {"n0": 30, "mean_shift": 0.5, "drop_classes": [0]},
            "clients": {"sampled_per_round": 4, "epochs": 1, "batch_size": 10,
                        "learning_rate": 0.1},
            "server": {"gamma": 0.1, "learning_rate": 0.1, "epochs": 1, "batch_size": 10,
                       "tau": 1.0},
            "defense": {"filter": "none", "aggregator": "geomed"},
            "attack": {"beta": 0.0},
            "run": {"rounds": 3, "master_seed": 99, "repeats": 1, "rolling_window": 2},
        }
        for section, value in overrides.items():
            doc[section] = {**doc[section], **value}
        return doc
    return make
