"""Dataset construction: synthetic Gaussian blobs, Dirichlet non-IID client
splits, label shifting, and the server's small shifted/incomplete dataset."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

# class centers sit on a circle of this radius in the first two coordinates
BLOB_RADIUS = 3.0


class LabeledExample(NamedTuple):
    features: np.ndarray
    label: int


@dataclass(frozen=True)
class Dataset:
    """Immutable feature matrix plus integer labels in [0, num_classes)."""

    features: np.ndarray
    labels: np.ndarray
    num_classes: int

    def __post_init__(self):
        feats = np.ascontiguousarray(self.features, dtype=np.float64)
        labs = np.ascontiguousarray(self.labels, dtype=np.int64)
        if feats.ndim != 2 or labs.ndim != 1 or len(feats) != len(labs):
            raise ValueError("features must be (n, d) and labels (n,)")
        if not np.all(np.isfinite(feats)):
            raise ValueError("features must be finite")
        if self.num_classes < 1:
            raise ValueError("num_classes must be positive")
        if labs.size and (labs.min() < 0 or labs.max() >= self.num_classes):
            raise ValueError("labels must lie in [0, num_classes)")
        feats.setflags(write=False)
        labs.setflags(write=False)
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labs)

    def __len__(self) -> int:
        return len(self.labels)

    def __getitem__(self, i: int) -> LabeledExample:
        return LabeledExample(self.features[i], int(self.labels[i]))

    @property
    def input_dim(self) -> int:
        return self.features.shape[1]

    def subset(self, indices) -> "Dataset":
        return Dataset(self.features[indices], self.labels[indices], self.num_classes)

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.num_classes)


@dataclass(frozen=True)
class BlobModel:
    """Parameters of the synthetic Gaussian-blob generator."""

    num_classes: int
    input_dim: int
    spread: float


@dataclass(frozen=True)
class PartitionPlan:
    alpha: float
    num_clients: int
    shards: tuple


def class_means(num_classes: int, input_dim: int, radius: float = BLOB_RADIUS) -> np.ndarray:
    """Deterministic, distinct class centers on a circle in the first two axes."""
    if input_dim < 2:
        raise ValueError("blob data needs input_dim >= 2")
    angles = 2.0 * np.pi * np.arange(num_classes) / num_classes
    means = np.zeros((num_classes, input_dim))
    means[:, 0] = radius * np.cos(angles)
    means[:, 1] = radius * np.sin(angles)
    return means


def make_blobs(num_classes: int, input_dim: int, per_class: int, spread: float,
               rng: np.random.Generator) -> Dataset:
    """per_class isotropic Gaussian examples around each class mean."""
    if num_classes < 2 or per_class < 1 or spread <= 0:
        raise ValueError("need num_classes >= 2, per_class >= 1, spread > 0")
    means = class_means(num_classes, input_dim)
    feats = np.empty((num_classes * per_class, input_dim))
    labs = np.empty(num_classes * per_class, dtype=np.int64)
    for c in range(num_classes):
        block = slice(c * per_class, (c + 1) * per_class)
        feats[block] = means[c] + spread * rng.standard_normal((per_class, input_dim))
        labs[block] = c
    return Dataset(feats, labs, num_classes)


def _largest_remainder(proportions: np.ndarray, total: int) -> np.ndarray:
    """Integer counts summing to total, apportioned by largest remainder."""
    raw = proportions * total
    counts = np.floor(raw).astype(np.int64)
    short = total - int(counts.sum())
    if short > 0:
        order = np.argsort(-(raw - counts), kind="stable")
        counts[order[:short]] += 1
    return counts


def dirichlet_partition(data: Dataset, num_clients: int, alpha: float,
                        rng: np.random.Generator) -> PartitionPlan:
    """Split per class by Dirichlet(alpha) proportions over clients.

    Shards are disjoint, cover the dataset, and are all nonempty (an empty
    shard is repaired by borrowing one example from the largest shard).
    """
    if num_clients < 1:
        raise ValueError("num_clients must be positive")
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if len(data) < num_clients:
        raise ValueError("dataset smaller than the number of clients")
    shards = [[] for _ in range(num_clients)]
    for c in range(data.num_classes):
        idx = np.flatnonzero(data.labels == c)
        if idx.size == 0:
            continue
        rng.shuffle(idx)
        proportions = rng.dirichlet(np.full(num_clients, alpha))
        counts = _largest_remainder(proportions, idx.size)
        start = 0
        for i, cnt in enumerate(counts):
            shards[i].extend(idx[start:start + cnt].tolist())
            start += cnt
    while True:
        empty = [i for i, s in enumerate(shards) if not s]
        if not empty:
            break
        largest = max(range(num_clients), key=lambda i: (len(shards[i]), -i))
        shards[empty[0]].append(shards[largest].pop())
    frozen = tuple(np.array(sorted(s), dtype=np.int64) for s in shards)
    return PartitionPlan(alpha=alpha, num_clients=num_clients, shards=frozen)


def shift_labels(data: Dataset, shift: int) -> Dataset:
    """Relabel every class c as (c + shift) mod C; features are shared."""
    labs = (data.labels + shift) % data.num_classes
    return Dataset(data.features, labs, data.num_classes)


def make_server_dataset(model: BlobModel, n0: int, mean_shift: float, drop_classes,
                        rng: np.random.Generator) -> Dataset:
    """Server-side blob sample with translated class means and missing classes.

    Each class mean is moved by mean_shift along a fixed random direction, and
    dropped classes generate no examples; n0 is split as evenly as possible
    among the kept classes (remainder to the lowest class indices).
    """
    if n0 < 1:
        raise ValueError("n0 must be positive")
    dropped = set(int(c) for c in drop_classes)
    kept = [c for c in range(model.num_classes) if c not in dropped]
    if not kept:
        raise ValueError("drop_classes must leave at least one class")
    means = class_means(model.num_classes, model.input_dim)
    directions = rng.standard_normal((model.num_classes, model.input_dim))
    directions /= np.maximum(np.linalg.norm(directions, axis=1, keepdims=True), 1e-300)
    base, extra = divmod(n0, len(kept))
    feats, labs = [], []
    for j, c in enumerate(kept):
        cnt = base + (1 if j < extra else 0)
        if cnt == 0:
            continue
        center = means[c] + mean_shift * directions[c]
        feats.append(center + model.spread * rng.standard_normal((cnt, model.input_dim)))
        labs.append(np.full(cnt, c, dtype=np.int64))
    return Dataset(np.concatenate(feats), np.concatenate(labs), model.num_classes)


def csv_header(input_dim: int) -> list:
    return [f"f{j}" for j in range(input_dim)] + ["label"]


def save_csv(data: Dataset, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(csv_header(data.input_dim))
        for i in range(len(data)):
            writer.writerow([repr(float(v)) for v in data.features[i]] + [int(data.labels[i])])


def load_csv(path, num_classes: int | None = None) -> Dataset:
    """Load `f0,...,f{m-1},label` rows; labels are 0-based integers."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValueError(f"{path}: empty file")
        input_dim = len(header) - 1
        if input_dim < 1 or header != csv_header(input_dim):
            raise ValueError(f"{path}: expected header f0,...,f{{m-1}},label")
        feats, labs = [], []
        for row in reader:
            if not row:
                continue
            if len(row) != input_dim + 1:
                raise ValueError(f"{path}: row with {len(row)} fields, expected {input_dim + 1}")
            feats.append([float(v) for v in row[:input_dim]])
            labs.append(int(row[input_dim]))
    if not feats:
        raise ValueError(f"{path}: no examples")
    labels = np.array(labs, dtype=np.int64)
    if num_classes is None:
        num_classes = int(labels.max()) + 1
    return Dataset(np.array(feats), labels, num_classes)
