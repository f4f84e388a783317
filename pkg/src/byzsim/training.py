"""Local minibatch SGD: the per-round training routine shared by honest
clients, attackers (as a subroutine), and the server."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .models import LossSpec, ModelArch, gradient


@dataclass(frozen=True)
class SgdPlan:
    """Step size, step count, batch size, and a multiplier on the loss.

    loss_scale is 1 for clients and the server-learning weight for the server;
    zero rates/scales are allowed so that disabled phases stay in the loop.
    """

    learning_rate: float
    num_steps: int
    batch_size: int
    loss_scale: float = 1.0

    def __post_init__(self):
        if self.learning_rate < 0 or self.loss_scale < 0:
            raise ValueError("learning_rate and loss_scale must be nonnegative")
        if self.num_steps < 1 or self.batch_size < 1:
            raise ValueError("num_steps and batch_size must be positive")


def epochs_to_steps(num_epochs: int, shard_size: int, batch_size: int) -> int:
    """Step count equivalent to num_epochs passes over shard_size examples."""
    if num_epochs < 1 or shard_size < 1 or batch_size < 1:
        raise ValueError("epochs, shard size, and batch size must be positive")
    return num_epochs * math.ceil(shard_size / batch_size)


def local_sgd(arch: ModelArch, spec: LossSpec, x0: np.ndarray, data: Dataset,
              plan: SgdPlan, rng: np.random.Generator) -> np.ndarray:
    """Run exactly plan.num_steps SGD steps from x0 and return the final model.

    Minibatches are epoch-shuffled without replacement (reshuffle once the
    epoch is exhausted); a short final batch of an epoch is used as-is. The
    loss scale folds into the step size, so the trajectory with scale s and
    rate r is bitwise the trajectory with scale 1 and rate s*r.
    """
    if len(data) == 0:
        raise ValueError("data must be nonempty")
    step = plan.learning_rate * plan.loss_scale
    n = len(data)
    y = np.array(x0, dtype=np.float64)
    order = rng.permutation(n)
    pos = 0
    for _ in range(plan.num_steps):
        if pos >= n:
            order = rng.permutation(n)
            pos = 0
        batch = data.subset(order[pos:pos + plan.batch_size])
        pos += plan.batch_size
        y = y - step * gradient(arch, spec, y, batch)
    return y


def honest_update(arch: ModelArch, spec: LossSpec, x_t: np.ndarray, shard: Dataset,
                  plan: SgdPlan, rng: np.random.Generator) -> np.ndarray:
    """Update an honest client reports: local SGD from the broadcast model."""
    return local_sgd(arch, spec, x_t, shard, plan, rng) - x_t
