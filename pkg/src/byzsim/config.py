"""Experiment configuration: YAML parsing, validation with key-named errors,
defaults, and round-trippable serialization of the resolved document."""
from __future__ import annotations

from dataclasses import dataclass

import yaml

from .attacks import LABEL_FLIP_NU_RANGE, SIGN_FLIP_NU_RANGE
from .defense import (AGG_KINDS, FILTER_KINDS, FILTER_NONE, AggregatorSpec, FilterSpec)
from .models import MLP_1H, MODEL_KINDS, SOFTMAX_REGRESSION, LossSpec, ModelArch


class ConfigError(ValueError):
    """Invalid or missing configuration; the message names the offending key."""


@dataclass(frozen=True)
class DataConfig:
    source: str = "blobs"
    num_clients: int = 50
    dirichlet_alpha: float = 0.3
    train_per_class: int = 1000
    test_per_class: int = 200
    spread: float = 1.0
    csv_train: str | None = None
    csv_test: str | None = None


@dataclass(frozen=True)
class ServerDataConfig:
    n0: int = 100
    mean_shift: float = 1.0
    drop_classes: tuple = ()
    csv: str | None = None


@dataclass(frozen=True)
class ClientTrainConfig:
    sampled_per_round: int = 20
    epochs: int | None = 2
    steps: int | None = None
    batch_size: int = 50
    learning_rate: float = 0.1


@dataclass(frozen=True)
class ServerTrainConfig:
    gamma: float = 0.0
    learning_rate: float = 0.1
    epochs: int | None = 2
    steps: int | None = None
    batch_size: int = 50
    tau: float = 1.0
    eta_g: float = 1.0


@dataclass(frozen=True)
class AttackConfig:
    beta: float = 0.0
    sign_flip_nu: tuple = SIGN_FLIP_NU_RANGE
    label_flip_nu: tuple = LABEL_FLIP_NU_RANGE


@dataclass(frozen=True)
class RunConfig:
    rounds: int
    master_seed: int
    repeats: int = 3
    rolling_window: int = 20
    eval_every: int = 1
    log_honest_objective: bool = False


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelArch
    loss: LossSpec
    data: DataConfig
    server_data: ServerDataConfig
    clients: ClientTrainConfig
    server: ServerTrainConfig
    filter: FilterSpec
    aggregator: AggregatorSpec
    attack: AttackConfig
    run: RunConfig


_REQUIRED = object()


class _Section:
    """One config block; tracks consumed keys so typos are reported."""

    def __init__(self, name: str, mapping):
        if mapping is None:
            mapping = {}
        if not isinstance(mapping, dict):
            raise ConfigError(f"{name} must be a mapping")
        self.name = name
        self.mapping = mapping
        self.seen = set()

    def get(self, key, default=_REQUIRED, convert=None, check=None, constraint=""):
        self.seen.add(key)
        full = f"{self.name}.{key}"
        if key not in self.mapping or self.mapping[key] is None:
            if default is _REQUIRED:
                raise ConfigError(f"missing required key {full}")
            return default
        value = self.mapping[key]
        if convert is not None:
            value = convert(full, value)
        if check is not None and not check(value):
            raise ConfigError(f"{full} must be {constraint}, got {value!r}")
        return value

    def finish(self):
        unknown = sorted(set(self.mapping) - self.seen)
        if unknown:
            raise ConfigError(f"unknown key {self.name}.{unknown[0]}")


def _as_int(full, v):
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{full} must be an integer, got {v!r}")
    return v


def _as_float(full, v):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{full} must be a number, got {v!r}")
    return float(v)


def _as_str(full, v):
    if not isinstance(v, str):
        raise ConfigError(f"{full} must be a string, got {v!r}")
    return v


def _as_bool(full, v):
    if not isinstance(v, bool):
        raise ConfigError(f"{full} must be true or false, got {v!r}")
    return v


def _as_int_list(full, v):
    if not isinstance(v, (list, tuple)):
        raise ConfigError(f"{full} must be a list of integers, got {v!r}")
    return tuple(_as_int(full, x) for x in v)


def _as_range(full, v):
    if not isinstance(v, (list, tuple)) or len(v) != 2:
        raise ConfigError(f"{full} must be a [low, high] pair, got {v!r}")
    lo, hi = (_as_float(full, x) for x in v)
    if not 0 < lo <= hi:
        raise ConfigError(f"{full} must satisfy 0 < low <= high, got {v!r}")
    return (lo, hi)


def _epochs_or_steps(section: _Section):
    epochs = section.get("epochs", None, _as_int, lambda v: v >= 1, "a positive integer")
    steps = section.get("steps", None, _as_int, lambda v: v >= 1, "a positive integer")
    if epochs is not None and steps is not None:
        raise ConfigError(f"{section.name}.epochs and {section.name}.steps are mutually exclusive")
    if epochs is None and steps is None:
        epochs = 2
    return epochs, steps


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a YAML config document, filling all defaults."""
    raw = yaml.safe_load(text)
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError("config document must be a mapping")
    return parse_config_dict(raw)


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        return parse_config(fh.read())


def parse_config_dict(raw: dict) -> ExperimentConfig:
    known = {"model", "loss", "data", "server_data", "clients", "server",
             "defense", "attack", "run"}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"unknown key {unknown[0]}")

    sec = _Section("model", raw.get("model"))
    kind = sec.get("kind", convert=_as_str, check=lambda v: v in MODEL_KINDS,
                   constraint=f"one of {MODEL_KINDS}")
    input_dim = sec.get("input_dim", convert=_as_int, check=lambda v: v >= 1,
                        constraint="a positive integer")
    num_classes = sec.get("num_classes", convert=_as_int, check=lambda v: v >= 2,
                          constraint="an integer >= 2")
    hidden_dim = sec.get("hidden_dim", None, _as_int, lambda v: v >= 1, "a positive integer")
    sec.finish()
    if kind == MLP_1H and hidden_dim is None:
        raise ConfigError("missing required key model.hidden_dim (mlp-1h)")
    if kind == SOFTMAX_REGRESSION and hidden_dim is not None:
        raise ConfigError("model.hidden_dim is only valid for mlp-1h")
    model = ModelArch(kind, input_dim, num_classes, hidden_dim)

    sec = _Section("loss", raw.get("loss"))
    loss = LossSpec(sec.get("weight_decay", 1e-4, _as_float, lambda v: v >= 0, "nonnegative"))
    sec.finish()

    sec = _Section("data", raw.get("data"))
    source = sec.get("source", "blobs", _as_str, lambda v: v in ("blobs", "csv"),
                     "one of ('blobs', 'csv')")
    data = DataConfig(
        source=source,
        num_clients=sec.get("num_clients", 50, _as_int, lambda v: v >= 1, "a positive integer"),
        dirichlet_alpha=sec.get("dirichlet_alpha", 0.3, _as_float, lambda v: v > 0, "positive"),
        train_per_class=sec.get("train_per_class", 1000, _as_int, lambda v: v >= 1,
                                "a positive integer"),
        test_per_class=sec.get("test_per_class", 200, _as_int, lambda v: v >= 1,
                               "a positive integer"),
        spread=sec.get("spread", 1.0, _as_float, lambda v: v > 0, "positive"),
        csv_train=sec.get("csv_train", None, _as_str),
        csv_test=sec.get("csv_test", None, _as_str),
    )
    sec.finish()
    if source == "csv":
        if data.csv_train is None or data.csv_test is None:
            raise ConfigError("data.csv_train and data.csv_test are required when data.source is csv")
    elif data.csv_train is not None or data.csv_test is not None:
        raise ConfigError("data.csv_train/csv_test require data.source: csv")
    if source == "blobs" and model.input_dim < 2:
        raise ConfigError("model.input_dim must be >= 2 for blob data")

    sec = _Section("server_data", raw.get("server_data"))
    server_data = ServerDataConfig(
        n0=sec.get("n0", 100, _as_int, lambda v: v >= 1, "a positive integer"),
        mean_shift=sec.get("mean_shift", 1.0, _as_float, lambda v: v >= 0, "nonnegative"),
        drop_classes=sec.get("drop_classes", (), _as_int_list),
        csv=sec.get("csv", None, _as_str),
    )
    sec.finish()
    dropped = set(server_data.drop_classes)
    if any(c < 0 or c >= model.num_classes for c in dropped):
        raise ConfigError(f"server_data.drop_classes must lie in [0, {model.num_classes})")
    if len(dropped) >= model.num_classes:
        raise ConfigError("server_data.drop_classes must leave at least one class")
    server_data = ServerDataConfig(server_data.n0, server_data.mean_shift,
                                   tuple(sorted(dropped)), server_data.csv)
    if source == "csv" and server_data.csv is None:
        raise ConfigError("server_data.csv is required when data.source is csv")
    if source == "blobs" and server_data.csv is not None:
        raise ConfigError("server_data.csv requires data.source: csv")

    sec = _Section("clients", raw.get("clients"))
    c_epochs, c_steps = _epochs_or_steps(sec)
    clients = ClientTrainConfig(
        sampled_per_round=sec.get("sampled_per_round", 20, _as_int, lambda v: v >= 1,
                                  "a positive integer"),
        epochs=c_epochs,
        steps=c_steps,
        batch_size=sec.get("batch_size", 50, _as_int, lambda v: v >= 1, "a positive integer"),
        learning_rate=sec.get("learning_rate", 0.1, _as_float, lambda v: v >= 0, "nonnegative"),
    )
    sec.finish()
    if clients.sampled_per_round > data.num_clients:
        raise ConfigError("clients.sampled_per_round must not exceed data.num_clients")

    sec = _Section("server", raw.get("server"))
    s_epochs, s_steps = _epochs_or_steps(sec)
    server = ServerTrainConfig(
        gamma=sec.get("gamma", 0.0, _as_float, lambda v: v >= 0, "nonnegative"),
        learning_rate=sec.get("learning_rate", 0.1, _as_float, lambda v: v >= 0, "nonnegative"),
        epochs=s_epochs,
        steps=s_steps,
        batch_size=sec.get("batch_size", 50, _as_int, lambda v: v >= 1, "a positive integer"),
        tau=sec.get("tau", 1.0, _as_float, lambda v: v > 0, "positive"),
        eta_g=sec.get("eta_g", 1.0, _as_float, lambda v: v > 0, "positive"),
    )
    sec.finish()

    sec = _Section("defense", raw.get("defense"))
    filter_spec = FilterSpec(
        kind=sec.get("filter", FILTER_NONE, _as_str, lambda v: v in FILTER_KINDS,
                     f"one of {FILTER_KINDS}"),
        alpha=sec.get("alpha", 0.0, _as_float, lambda v: 0 <= v <= 1, "in [0, 1]"),
        rho=sec.get("rho", 0.1, _as_float, lambda v: v >= 0, "nonnegative"),
        theta=sec.get("theta", 0.5, _as_float, lambda v: 0 < v < 1, "in (0, 1)"),
    )
    aggregator = AggregatorSpec(
        kind=sec.get("aggregator", "geomed", _as_str, lambda v: v in AGG_KINDS,
                     f"one of {AGG_KINDS}"),
        weiszfeld_max_iters=sec.get("weiszfeld_max_iters", 4, _as_int, lambda v: v >= 1,
                                    "a positive integer"),
        weiszfeld_rel_tol=sec.get("weiszfeld_rel_tol", 1e-6, _as_float, lambda v: v > 0,
                                  "positive"),
        weiszfeld_smoothing=sec.get("weiszfeld_smoothing", 1e-8, _as_float, lambda v: v > 0,
                                    "positive"),
    )
    sec.finish()
    if server.eta_g != 1.0 and (aggregator.kind != "average" or filter_spec.kind != FILTER_NONE):
        raise ConfigError("server.eta_g != 1 requires defense.aggregator: average "
                          "and defense.filter: none")

    sec = _Section("attack", raw.get("attack"))
    attack = AttackConfig(
        beta=sec.get("beta", 0.0, _as_float, lambda v: 0 <= v < 1, "in [0, 1)"),
        sign_flip_nu=sec.get("sign_flip_nu", SIGN_FLIP_NU_RANGE, _as_range),
        label_flip_nu=sec.get("label_flip_nu", LABEL_FLIP_NU_RANGE, _as_range),
    )
    sec.finish()

    sec = _Section("run", raw.get("run"))
    run = RunConfig(
        rounds=sec.get("rounds", convert=_as_int, check=lambda v: v >= 0,
                       constraint="a nonnegative integer"),
        master_seed=sec.get("master_seed", convert=_as_int, check=lambda v: v >= 0,
                            constraint="a nonnegative integer"),
        repeats=sec.get("repeats", 3, _as_int, lambda v: v >= 1, "a positive integer"),
        rolling_window=sec.get("rolling_window", 20, _as_int, lambda v: v >= 1,
                               "a positive integer"),
        eval_every=sec.get("eval_every", 1, _as_int, lambda v: v >= 1, "a positive integer"),
        log_honest_objective=sec.get("log_honest_objective", False, _as_bool),
    )
    sec.finish()

    return ExperimentConfig(model=model, loss=loss, data=data, server_data=server_data,
                            clients=clients, server=server, filter=filter_spec,
                            aggregator=aggregator, attack=attack, run=run)


def _drop_none(d: dict) -> dict:
    return {k: v for k, v in d.items() if v is not None}


def config_to_dict(cfg: ExperimentConfig) -> dict:
    """Nested plain-python dict mirroring the YAML schema (tuples as lists)."""
    return {
        "model": _drop_none({
            "kind": cfg.model.kind,
            "input_dim": cfg.model.input_dim,
            "num_classes": cfg.model.num_classes,
            "hidden_dim": cfg.model.hidden_dim,
        }),
        "loss": {"weight_decay": cfg.loss.weight_decay},
        "data": _drop_none({
            "source": cfg.data.source,
            "num_clients": cfg.data.num_clients,
            "dirichlet_alpha": cfg.data.dirichlet_alpha,
            "train_per_class": cfg.data.train_per_class,
            "test_per_class": cfg.data.test_per_class,
            "spread": cfg.data.spread,
            "csv_train": cfg.data.csv_train,
            "csv_test": cfg.data.csv_test,
        }),
        "server_data": _drop_none({
            "n0": cfg.server_data.n0,
            "mean_shift": cfg.server_data.mean_shift,
            "drop_classes": list(cfg.server_data.drop_classes),
            "csv": cfg.server_data.csv,
        }),
        "clients": _drop_none({
            "sampled_per_round": cfg.clients.sampled_per_round,
            "epochs": cfg.clients.epochs,
            "steps": cfg.clients.steps,
            "batch_size": cfg.clients.batch_size,
            "learning_rate": cfg.clients.learning_rate,
        }),
        "server": _drop_none({
            "gamma": cfg.server.gamma,
            "learning_rate": cfg.server.learning_rate,
            "epochs": cfg.server.epochs,
            "steps": cfg.server.steps,
            "batch_size": cfg.server.batch_size,
            "tau": cfg.server.tau,
            "eta_g": cfg.server.eta_g,
        }),
        "defense": {
            "filter": cfg.filter.kind,
            "alpha": cfg.filter.alpha,
            "rho": cfg.filter.rho,
            "theta": cfg.filter.theta,
            "aggregator": cfg.aggregator.kind,
            "weiszfeld_max_iters": cfg.aggregator.weiszfeld_max_iters,
            "weiszfeld_rel_tol": cfg.aggregator.weiszfeld_rel_tol,
            "weiszfeld_smoothing": cfg.aggregator.weiszfeld_smoothing,
        },
        "attack": {
            "beta": cfg.attack.beta,
            "sign_flip_nu": list(cfg.attack.sign_flip_nu),
            "label_flip_nu": list(cfg.attack.label_flip_nu),
        },
        "run": {
            "rounds": cfg.run.rounds,
            "master_seed": cfg.run.master_seed,
            "repeats": cfg.run.repeats,
            "rolling_window": cfg.run.rolling_window,
            "eval_every": cfg.run.eval_every,
            "log_honest_objective": cfg.run.log_honest_objective,
        },
    }


def resolved_document(cfg: ExperimentConfig) -> str:
    """YAML echo of the fully resolved config; reparsing yields an equal config."""
    return yaml.safe_dump(config_to_dict(cfg), sort_keys=False, default_flow_style=False)
