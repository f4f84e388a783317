"""Byzantine client behaviors: sign-flipping and label-flipping, each with a
per-attacker strength drawn once at experiment start."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .data import Dataset, shift_labels
from .models import LossSpec, ModelArch
from .training import SgdPlan, local_sgd

HONEST = "honest"
SIGN_FLIP = "sign_flip"
LABEL_FLIP = "label_flip"

SIGN_FLIP_NU_RANGE = (0.1, 10.1)
LABEL_FLIP_NU_RANGE = (0.1, 2.1)
LABEL_SHIFT = 1


@dataclass(frozen=True)
class Behavior:
    kind: str
    nu: float | None = None

    def __post_init__(self):
        if self.kind not in (HONEST, SIGN_FLIP, LABEL_FLIP):
            raise ValueError(f"unknown behavior kind {self.kind!r}")
        if self.kind != HONEST and (self.nu is None or self.nu <= 0):
            raise ValueError("malicious behaviors need nu > 0")

    @property
    def malicious(self) -> bool:
        return self.kind != HONEST


def assign_attackers(num_clients: int, beta: float, rng: np.random.Generator,
                     sign_flip_nu=SIGN_FLIP_NU_RANGE,
                     label_flip_nu=LABEL_FLIP_NU_RANGE) -> list:
    """Mark round(beta*N) clients malicious, half sign-flip half label-flip.

    Malicious ids are drawn uniformly without replacement; an odd count gives
    the extra attacker to sign-flip. Strengths nu are uniform in the per-kind
    range and fixed for the whole experiment.
    """
    if not 0 <= beta < 1:
        raise ValueError(f"beta must lie in [0, 1), got {beta}")
    num_malicious = int(math.floor(beta * num_clients + 0.5))
    malicious_ids = rng.choice(num_clients, size=num_malicious, replace=False)
    num_sign = (num_malicious + 1) // 2
    behaviors = [Behavior(HONEST)] * num_clients
    for j, cid in enumerate(malicious_ids):
        kind, (lo, hi) = (SIGN_FLIP, sign_flip_nu) if j < num_sign else (LABEL_FLIP, label_flip_nu)
        behaviors[int(cid)] = Behavior(kind, nu=float(rng.uniform(lo, hi)))
    return behaviors


def sign_flip_update(arch: ModelArch, spec: LossSpec, x_t: np.ndarray, shard: Dataset,
                     nu: float, plan: SgdPlan, rng: np.random.Generator) -> np.ndarray:
    """Train exactly like an honest client, then report -nu times the update."""
    delta = local_sgd(arch, spec, x_t, shard, plan, rng) - x_t
    return -nu * delta


def label_flip_update(arch: ModelArch, spec: LossSpec, x_t: np.ndarray, shard: Dataset,
                      nu: float, plan: SgdPlan, rng: np.random.Generator) -> np.ndarray:
    """Train on labels shifted by one class with the rate scaled by nu."""
    poisoned = shift_labels(shard, LABEL_SHIFT)
    scaled = replace(plan, learning_rate=nu * plan.learning_rate)
    return local_sgd(arch, spec, x_t, poisoned, scaled, rng) - x_t
