"""Deterministic, seedable simulator of federated learning under byzantine
attacks: local-SGD clients, sign/label-flipping adversaries, update filtering,
geometric-median aggregation with norm clipping, and server-side learning."""

from .attacks import Behavior, assign_attackers, label_flip_update, sign_flip_update
from .config import (AttackConfig, ClientTrainConfig, ConfigError, DataConfig,
                     ExperimentConfig, RunConfig, ServerDataConfig, ServerTrainConfig,
                     load_config, parse_config, parse_config_dict, resolved_document)
from .data import BlobModel, Dataset, LabeledExample, PartitionPlan, dirichlet_partition, \
    load_csv, make_blobs, make_server_dataset, save_csv, shift_labels
from .defense import (AggregatorSpec, DegenerateGradientError, FilterReport, FilterSpec,
                      angle_filter, average, geometric_median, geomed_objective, lf_score,
                      loss_filter, robust_aggregate)
from .models import LossSpec, ModelArch, forward, gradient, init_params, loss, predict_proba
from .params import axpy, clip_norm, cos_sim, dot, norm
from .runner import SWEEP_AXES, rolling_mean, run_and_persist, sweep
from .simulation import (ClientSpec, Experiment, RoundRecord, RoundState, evaluate,
                         run_experiment, sample_clients, substream)
from .training import SgdPlan, epochs_to_steps, honest_update, local_sgd

__version__ = "0.1.0"
