"""Dense classifiers with hand-coded loss and gradient: multinomial softmax
regression and a one-hidden-layer ReLU MLP, cross-entropy plus L2 decay on
weight matrices (biases are not decayed)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset

SOFTMAX_REGRESSION = "softmax-regression"
MLP_1H = "mlp-1h"
MODEL_KINDS = (SOFTMAX_REGRESSION, MLP_1H)


@dataclass(frozen=True)
class ModelArch:
    kind: str
    input_dim: int
    num_classes: int
    hidden_dim: int | None = None

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.input_dim < 1 or self.num_classes < 2:
            raise ValueError("need input_dim >= 1 and num_classes >= 2")
        if self.kind == MLP_1H and (self.hidden_dim is None or self.hidden_dim < 1):
            raise ValueError("mlp-1h requires hidden_dim >= 1")
        if self.kind == SOFTMAX_REGRESSION and self.hidden_dim is not None:
            raise ValueError("hidden_dim is only valid for mlp-1h")

    def param_count(self) -> int:
        m, c = self.input_dim, self.num_classes
        if self.kind == SOFTMAX_REGRESSION:
            return m * c + c
        h = self.hidden_dim
        return m * h + h + h * c + c


@dataclass(frozen=True)
class LossSpec:
    weight_decay: float = 0.0

    def __post_init__(self):
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be nonnegative")


def _unpack(arch: ModelArch, params: np.ndarray):
    """Views (no copies) of the layer matrices inside the flat vector."""
    m, c = arch.input_dim, arch.num_classes
    if params.shape != (arch.param_count(),):
        raise ValueError(f"expected {arch.param_count()} parameters, got {params.shape}")
    if arch.kind == SOFTMAX_REGRESSION:
        w = params[:m * c].reshape(m, c)
        b = params[m * c:]
        return w, b
    h = arch.hidden_dim
    o = 0
    w1 = params[o:o + m * h].reshape(m, h); o += m * h
    b1 = params[o:o + h]; o += h
    w2 = params[o:o + h * c].reshape(h, c); o += h * c
    b2 = params[o:]
    return w1, b1, w2, b2


def init_params(arch: ModelArch, rng: np.random.Generator) -> np.ndarray:
    """Uniform(-b, b) weights with b = sqrt(6/(fan_in+fan_out)); zero biases."""
    def layer(fan_in, fan_out):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-bound, bound, size=(fan_in, fan_out))

    m, c = arch.input_dim, arch.num_classes
    if arch.kind == SOFTMAX_REGRESSION:
        return np.concatenate([layer(m, c).ravel(), np.zeros(c)])
    h = arch.hidden_dim
    return np.concatenate([layer(m, h).ravel(), np.zeros(h),
                           layer(h, c).ravel(), np.zeros(c)])


def decay_mask(arch: ModelArch) -> np.ndarray:
    """Boolean mask selecting the decayed (weight-matrix) coordinates."""
    m, c = arch.input_dim, arch.num_classes
    mask = np.zeros(arch.param_count(), dtype=bool)
    if arch.kind == SOFTMAX_REGRESSION:
        mask[:m * c] = True
        return mask
    h = arch.hidden_dim
    mask[:m * h] = True
    mask[m * h + h:m * h + h + h * c] = True
    return mask


def logits(arch: ModelArch, params: np.ndarray, features: np.ndarray) -> np.ndarray:
    x = np.atleast_2d(np.asarray(features, dtype=np.float64))
    if x.shape[1] != arch.input_dim:
        raise ValueError(f"expected {arch.input_dim} features, got {x.shape[1]}")
    if arch.kind == SOFTMAX_REGRESSION:
        w, b = _unpack(arch, params)
        return x @ w + b
    w1, b1, w2, b2 = _unpack(arch, params)
    return np.maximum(x @ w1 + b1, 0.0) @ w2 + b2


def _softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    p = np.exp(shifted)
    return p / p.sum(axis=1, keepdims=True)


def predict_proba(arch: ModelArch, params: np.ndarray, features: np.ndarray) -> np.ndarray:
    return _softmax(logits(arch, params, features))


def forward(arch: ModelArch, params: np.ndarray, features) -> np.ndarray:
    """Class-probability vector for a single example."""
    return predict_proba(arch, params, features)[0]


def _mean_cross_entropy(z: np.ndarray, labels: np.ndarray) -> float:
    # log-sum-exp form stays finite for any finite logits
    zmax = z.max(axis=1)
    lse = zmax + np.log(np.exp(z - zmax[:, None]).sum(axis=1))
    return float((lse - z[np.arange(len(labels)), labels]).mean())


def loss(arch: ModelArch, spec: LossSpec, params: np.ndarray, batch: Dataset) -> float:
    """Mean cross-entropy plus (weight_decay/2)*||weights||^2."""
    if len(batch) == 0:
        raise ValueError("batch must be nonempty")
    ce = _mean_cross_entropy(logits(arch, params, batch.features), batch.labels)
    if spec.weight_decay == 0.0:
        return ce
    w = params[decay_mask(arch)]
    return ce + 0.5 * spec.weight_decay * float(np.dot(w, w))


def gradient(arch: ModelArch, spec: LossSpec, params: np.ndarray, batch: Dataset) -> np.ndarray:
    """Analytic gradient of loss() with respect to the flat parameter vector."""
    if len(batch) == 0:
        raise ValueError("batch must be nonempty")
    x = batch.features
    n = len(batch)
    wd = spec.weight_decay
    if arch.kind == SOFTMAX_REGRESSION:
        w, _ = _unpack(arch, params)
        p = predict_proba(arch, params, x)
        p[np.arange(n), batch.labels] -= 1.0
        g = p / n
        dw = x.T @ g + wd * w
        db = g.sum(axis=0)
        return np.concatenate([dw.ravel(), db])
    w1, b1, w2, b2 = _unpack(arch, params)
    z1 = x @ w1 + b1
    a1 = np.maximum(z1, 0.0)
    p = _softmax(a1 @ w2 + b2)
    p[np.arange(n), batch.labels] -= 1.0
    g = p / n
    dw2 = a1.T @ g + wd * w2
    db2 = g.sum(axis=0)
    da1 = g @ w2.T
    dz1 = np.where(z1 > 0.0, da1, 0.0)
    dw1 = x.T @ dz1 + wd * w1
    db1 = dz1.sum(axis=0)
    return np.concatenate([dw1.ravel(), db1, dw2.ravel(), db2])
