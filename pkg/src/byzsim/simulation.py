"""Orchestration of the federated round loop: client sampling, honest and
byzantine updates, the robust aggregation step, server learning with norm
clipping, and per-round evaluation. Everything is driven by deterministic RNG
substreams of a single master seed, so runs are bit-reproducible."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import models
from .attacks import (HONEST, SIGN_FLIP, Behavior, assign_attackers,
                      label_flip_update, sign_flip_update)
from .config import ExperimentConfig
from .data import BlobModel, Dataset, dirichlet_partition, load_csv, make_blobs, make_server_dataset
from .defense import FilterReport, average, robust_aggregate
from .models import LossSpec, ModelArch, gradient, init_params
from .params import clip_norm, norm
from .training import SgdPlan, epochs_to_steps, honest_update, local_sgd

log = logging.getLogger(__name__)

# substream tags; fixed so that stored results stay reproducible
STREAM_TRAIN_DATA = 1
STREAM_TEST_DATA = 2
STREAM_SERVER_DATA = 3
STREAM_PARTITION = 4
STREAM_BEHAVIOR = 5
STREAM_INIT = 6
STREAM_SAMPLE = 7
STREAM_CLIENT = 8
STREAM_SERVER_SGD = 9
STREAM_REPEAT = 10


def substream(master_seed: int, *key) -> np.random.Generator:
    """Independent deterministic generator for (master_seed, *key)."""
    return np.random.default_rng(np.random.SeedSequence([int(master_seed), *map(int, key)]))


@dataclass(frozen=True)
class ClientSpec:
    id: int
    shard: Dataset
    weight: float
    behavior: Behavior


@dataclass(frozen=True)
class RoundState:
    round: int
    model: np.ndarray


@dataclass(frozen=True)
class RoundRecord:
    round: int
    test_accuracy: float
    test_loss: float
    accepted_ids: tuple
    num_malicious_sampled: int
    num_malicious_accepted: int
    aggregate_update_norm: float
    server_update_norm: float
    honest_objective: float | None = None


def sample_clients(num_clients: int, num_sampled: int, rng: np.random.Generator) -> list:
    """num_sampled distinct ids, uniform without replacement."""
    if not 1 <= num_sampled <= num_clients:
        raise ValueError("need 1 <= sampled_per_round <= num_clients")
    return [int(i) for i in rng.choice(num_clients, size=num_sampled, replace=False)]


def evaluate(arch: ModelArch, params_vec: np.ndarray, test: Dataset) -> tuple:
    """(accuracy, mean cross-entropy without decay); argmax ties go to the
    lowest class index."""
    if len(test) == 0:
        raise ValueError("test set must be nonempty")
    z = models.logits(arch, params_vec, test.features)
    accuracy = float((z.argmax(axis=1) == test.labels).mean())
    test_loss = models.loss(arch, LossSpec(0.0), params_vec, test)
    return accuracy, test_loss


class Experiment:
    """A fully built federated world, ready to run rounds.

    Construction derives all datasets, the partition, attacker assignment, and
    the initial model from the config's master seed; per-(round, client) RNG
    streams make client execution order irrelevant.
    """

    def __init__(self, config: ExperimentConfig):
        self.config = config
        self.seed = config.run.master_seed
        self.arch = config.model
        self.loss_spec = config.loss
        c, m = self.arch.num_classes, self.arch.input_dim

        if config.data.source == "blobs":
            self.train = make_blobs(c, m, config.data.train_per_class, config.data.spread,
                                    substream(self.seed, STREAM_TRAIN_DATA))
            self.test = make_blobs(c, m, config.data.test_per_class, config.data.spread,
                                   substream(self.seed, STREAM_TEST_DATA))
            blob = BlobModel(c, m, config.data.spread)
            self.server_data = make_server_dataset(
                blob, config.server_data.n0, config.server_data.mean_shift,
                config.server_data.drop_classes, substream(self.seed, STREAM_SERVER_DATA))
        else:
            self.train = self._load_csv_checked(config.data.csv_train)
            self.test = self._load_csv_checked(config.data.csv_test)
            self.server_data = self._load_csv_checked(config.server_data.csv)

        n_clients = config.data.num_clients
        plan = dirichlet_partition(self.train, n_clients, config.data.dirichlet_alpha,
                                   substream(self.seed, STREAM_PARTITION))
        behaviors = assign_attackers(n_clients, config.attack.beta,
                                     substream(self.seed, STREAM_BEHAVIOR),
                                     config.attack.sign_flip_nu, config.attack.label_flip_nu)
        total = len(self.train)
        self.clients = []
        self.client_plans = []
        for i in range(n_clients):
            shard = self.train.subset(plan.shards[i])
            self.clients.append(ClientSpec(i, shard, len(shard) / total, behaviors[i]))
            steps = (config.clients.steps if config.clients.steps is not None
                     else epochs_to_steps(config.clients.epochs, len(shard),
                                          config.clients.batch_size))
            self.client_plans.append(SgdPlan(config.clients.learning_rate, steps,
                                             config.clients.batch_size))
        server_steps = (config.server.steps if config.server.steps is not None
                        else epochs_to_steps(config.server.epochs, len(self.server_data),
                                             config.server.batch_size))
        self.server_plan = SgdPlan(config.server.learning_rate, server_steps,
                                   config.server.batch_size, loss_scale=config.server.gamma)
        self.x0 = init_params(self.arch, substream(self.seed, STREAM_INIT))
        self._last_eval = None

    def _load_csv_checked(self, path) -> Dataset:
        ds = load_csv(path, num_classes=self.arch.num_classes)
        if ds.input_dim != self.arch.input_dim:
            raise ValueError(f"{path}: {ds.input_dim} features, model expects {self.arch.input_dim}")
        return ds

    def initial_state(self) -> RoundState:
        return RoundState(round=0, model=self.x0)

    def client_delta(self, client: ClientSpec, x_t: np.ndarray, t: int) -> np.ndarray:
        """The update client reports at round t, per its behavior."""
        rng = substream(self.seed, STREAM_CLIENT, t, client.id)
        plan = self.client_plans[client.id]
        b = client.behavior
        if b.kind == HONEST:
            return honest_update(self.arch, self.loss_spec, x_t, client.shard, plan, rng)
        if b.kind == SIGN_FLIP:
            return sign_flip_update(self.arch, self.loss_spec, x_t, client.shard, b.nu, plan, rng)
        return label_flip_update(self.arch, self.loss_spec, x_t, client.shard, b.nu, plan, rng)

    def run_round(self, state: RoundState) -> tuple:
        t = state.round
        x_t = state.model
        sampled = sample_clients(self.config.data.num_clients,
                                 self.config.clients.sampled_per_round,
                                 substream(self.seed, STREAM_SAMPLE, t))
        updates = {cid: self.client_delta(self.clients[cid], x_t, t) for cid in sorted(sampled)}
        server_grad = gradient(self.arch, self.loss_spec, x_t, self.server_data)

        tau = self.config.server.tau
        if self.config.server.eta_g != 1.0:
            # pseudo-gradient variant: scaled mean update, then the usual clip
            points = [updates[i] for i in sorted(updates)]
            pseudo = self.config.server.eta_g * average(points, np.ones(len(points)))
            x_bar = x_t + clip_norm(pseudo, tau)
            report = FilterReport(accepted=set(updates), server_grad_norm=norm(server_grad))
        else:
            x_bar, report = robust_aggregate(x_t, updates, server_grad, self.config.filter,
                                             self.config.aggregator, tau)

        y = local_sgd(self.arch, self.loss_spec, x_bar, self.server_data, self.server_plan,
                      substream(self.seed, STREAM_SERVER_SGD, t))
        server_update = clip_norm(y - x_bar, tau)
        x_next = x_bar + server_update
        if not np.all(np.isfinite(x_next)):
            raise RuntimeError(f"non-finite model parameters after round {t}")

        if self._last_eval is None or (t + 1) % self.config.run.eval_every == 0:
            self._last_eval = evaluate(self.arch, x_next, self.test)
        accuracy, test_loss = self._last_eval

        malicious = {c.id for c in self.clients if c.behavior.malicious}
        honest_obj = None
        if self.config.run.log_honest_objective:
            honest_obj = self.honest_objective(x_next)
            log.info("round %d honest objective %.6f", t, honest_obj)
        record = RoundRecord(
            round=t,
            test_accuracy=accuracy,
            test_loss=test_loss,
            accepted_ids=tuple(sorted(report.accepted)),
            num_malicious_sampled=len(malicious.intersection(sampled)),
            num_malicious_accepted=len(malicious.intersection(report.accepted)),
            aggregate_update_norm=norm(x_bar - x_t),
            server_update_norm=norm(x_next - x_bar),
            honest_objective=honest_obj,
        )
        return RoundState(round=t + 1, model=x_next), record

    def honest_objective(self, params_vec: np.ndarray) -> float:
        """Weighted full-batch loss over the honest clients only."""
        return float(sum(c.weight * models.loss(self.arch, self.loss_spec, params_vec, c.shard)
                         for c in self.clients if not c.behavior.malicious))

    def run(self) -> list:
        state = self.initial_state()
        records = []
        for _ in range(self.config.run.rounds):
            state, record = self.run_round(state)
            records.append(record)
        return records


def run_experiment(config: ExperimentConfig) -> list:
    """Build the world from config and run all rounds; returns RoundRecords."""
    return Experiment(config).run()
