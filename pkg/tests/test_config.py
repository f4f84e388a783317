from pathlib import Path

import pytest

from byzsim.config import (ConfigError, config_to_dict, parse_config, parse_config_dict,
                           resolved_document)

MINIMAL = """
model:
  kind: softmax-regression
  input_dim: 10
  num_classes: 5
run:
  rounds: 10
  master_seed: 1
"""


def test_minimal_config_fills_paper_defaults():
    cfg = parse_config(MINIMAL)
    assert cfg.filter.kind == "none"
    assert cfg.filter.alpha == 0.0
    assert cfg.filter.rho == 0.1
    assert cfg.filter.theta == 0.5
    assert cfg.aggregator.kind == "geomed"
    assert cfg.aggregator.weiszfeld_max_iters == 4
    assert cfg.aggregator.weiszfeld_rel_tol == 1e-6
    assert cfg.server.tau == 1.0
    assert cfg.server.eta_g == 1.0
    assert cfg.clients.sampled_per_round == 20
    assert cfg.clients.epochs == 2 and cfg.server.epochs == 2
    assert cfg.attack.beta == 0.0
    assert cfg.attack.sign_flip_nu == (0.1, 10.1)
    assert cfg.attack.label_flip_nu == (0.1, 2.1)
    assert cfg.run.repeats == 3
    assert cfg.run.rolling_window == 20


def test_theta_out_of_range_names_key():
    with pytest.raises(ConfigError, match=r"defense\.theta.*\(0, 1\)"):
        parse_config(MINIMAL + "defense:\n  theta: 1.5\n")


def test_negative_tau_names_key():
    with pytest.raises(ConfigError, match=r"server\.tau.*positive"):
        parse_config(MINIMAL + "server:\n  tau: -1\n")


def test_unknown_top_level_key():
    with pytest.raises(ConfigError, match="unknown key defence"):
        parse_config(MINIMAL + "defence: {}\n")


def test_unknown_nested_key():
    with pytest.raises(ConfigError, match=r"unknown key attack\.betas"):
        parse_config(MINIMAL + "attack:\n  betas: 0.3\n")


def test_missing_required_keys():
    with pytest.raises(ConfigError, match=r"missing required key run\.rounds"):
        parse_config("model:\n  kind: softmax-regression\n  input_dim: 4\n"
                     "  num_classes: 3\nrun:\n  master_seed: 1\n")
    with pytest.raises(ConfigError, match=r"missing required key model\.kind"):
        parse_config("run:\n  rounds: 1\n  master_seed: 1\n")


def test_epochs_and_steps_mutually_exclusive():
    with pytest.raises(ConfigError, match=r"clients\.epochs and clients\.steps"):
        parse_config(MINIMAL + "clients:\n  epochs: 2\n  steps: 5\n")


def test_steps_alone_accepted():
    cfg = parse_config(MINIMAL + "clients:\n  steps: 5\n")
    assert cfg.clients.steps == 5
    assert cfg.clients.epochs is None


def test_mlp_requires_hidden_dim():
    text = MINIMAL.replace("softmax-regression", "mlp-1h")
    with pytest.raises(ConfigError, match=r"model\.hidden_dim"):
        parse_config(text)
    cfg = parse_config(text.replace("input_dim: 10", "input_dim: 10\n  hidden_dim: 16"))
    assert cfg.model.hidden_dim == 16


def test_hidden_dim_rejected_for_softmax():
    with pytest.raises(ConfigError, match=r"model\.hidden_dim"):
        parse_config(MINIMAL.replace("input_dim: 10", "input_dim: 10\n  hidden_dim: 16"))


def test_eta_g_requires_plain_averaging():
    with pytest.raises(ConfigError, match=r"server\.eta_g"):
        parse_config(MINIMAL + "server:\n  eta_g: 2.0\n")
    cfg = parse_config(MINIMAL + "server:\n  eta_g: 2.0\n"
                       "defense:\n  filter: none\n  aggregator: average\n")
    assert cfg.server.eta_g == 2.0


def test_beta_range_validated():
    with pytest.raises(ConfigError, match=r"attack\.beta"):
        parse_config(MINIMAL + "attack:\n  beta: 1.0\n")


def test_sampled_per_round_bounded_by_clients():
    with pytest.raises(ConfigError, match=r"sampled_per_round"):
        parse_config(MINIMAL + "data:\n  num_clients: 5\nclients:\n  sampled_per_round: 6\n")


def test_drop_classes_validated():
    with pytest.raises(ConfigError, match=r"server_data\.drop_classes"):
        parse_config(MINIMAL + "server_data:\n  drop_classes: [0, 1, 2, 3, 4]\n")
    with pytest.raises(ConfigError, match=r"server_data\.drop_classes"):
        parse_config(MINIMAL + "server_data:\n  drop_classes: [7]\n")


def test_csv_keys_require_csv_source():
    with pytest.raises(ConfigError, match=r"data\.csv_train"):
        parse_config(MINIMAL + "data:\n  csv_train: x.csv\n")
    with pytest.raises(ConfigError, match=r"csv_train and data\.csv_test|csv_test"):
        parse_config(MINIMAL + "data:\n  source: csv\n")


def test_nu_range_validation():
    with pytest.raises(ConfigError, match=r"attack\.sign_flip_nu"):
        parse_config(MINIMAL + "attack:\n  sign_flip_nu: [2.0, 1.0]\n")
    with pytest.raises(ConfigError, match=r"attack\.label_flip_nu"):
        parse_config(MINIMAL + "attack:\n  label_flip_nu: [0.5]\n")


def test_wrong_types_rejected():
    with pytest.raises(ConfigError, match=r"run\.rounds must be an integer"):
        parse_config(MINIMAL.replace("rounds: 10", "rounds: ten"))
    with pytest.raises(ConfigError, match=r"data\.spread must be a number"):
        parse_config(MINIMAL + "data:\n  spread: wide\n")


def test_empty_document_reports_missing_model():
    with pytest.raises(ConfigError, match=r"missing required key model\.kind"):
        parse_config("")


@pytest.mark.parametrize("extra", [
    "",
    "defense:\n  filter: loss\n  rho: 0.3\n",
    "defense:\n  filter: angle\n  alpha: 0.25\n  aggregator: average\n",
    "clients:\n  steps: 7\n",
    "attack:\n  beta: 0.6\n  sign_flip_nu: [0.5, 2.0]\n",
])
def test_resolved_document_round_trips(extra):
    cfg = parse_config(MINIMAL + extra)
    assert parse_config(resolved_document(cfg)) == cfg


def test_config_to_dict_reparses_equal(base_config_dict):
    cfg = parse_config_dict(base_config_dict(attack={"beta": 0.3}))
    assert parse_config_dict(config_to_dict(cfg)) == cfg


def test_shipped_example_config_is_valid():
    example = Path(__file__).parent.parent / "configs" / "example.yaml"
    cfg = parse_config(example.read_text())
    assert cfg.run.rounds == 300
    assert cfg.filter.kind == "loss"
    assert parse_config(resolved_document(cfg)) == cfg
