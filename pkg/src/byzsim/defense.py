"""Server-side defense pipeline: update filters (none / angle / loss score),
geometric median via smoothed Weiszfeld iteration, plain averaging, and norm
clipping, composed as clip(aggregate(filter(updates)))."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .params import clip_norm, cos_sim, dot, norm

log = logging.getLogger(__name__)

FILTER_NONE = "none"
FILTER_ANGLE = "angle"
FILTER_LOSS = "loss"
FILTER_KINDS = (FILTER_NONE, FILTER_ANGLE, FILTER_LOSS)

AGG_AVERAGE = "average"
AGG_GEOMED = "geomed"
AGG_KINDS = (AGG_AVERAGE, AGG_GEOMED)

# server gradients below this norm give the angle filter no direction to test
DEGENERATE_GRAD_TOL = 1e-12

REFERENCE_MAX_ITERS = 10_000
REFERENCE_REL_TOL = 1e-12


class DegenerateGradientError(RuntimeError):
    """Server gradient too small for the angle filter to be meaningful."""


@dataclass(frozen=True)
class FilterSpec:
    kind: str = FILTER_NONE
    alpha: float = 0.0
    rho: float = 0.1
    theta: float = 0.5

    def __post_init__(self):
        if self.kind not in FILTER_KINDS:
            raise ValueError(f"unknown filter kind {self.kind!r}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if self.rho < 0:
            raise ValueError("rho must be nonnegative")
        if not 0.0 < self.theta < 1.0:
            raise ValueError("theta must lie in (0, 1)")


@dataclass(frozen=True)
class AggregatorSpec:
    kind: str = AGG_GEOMED
    weiszfeld_max_iters: int = 4
    weiszfeld_rel_tol: float = 1e-6
    weiszfeld_smoothing: float = 1e-8

    def __post_init__(self):
        if self.kind not in AGG_KINDS:
            raise ValueError(f"unknown aggregator kind {self.kind!r}")
        if self.weiszfeld_max_iters < 1:
            raise ValueError("weiszfeld_max_iters must be positive")
        if self.weiszfeld_rel_tol <= 0 or self.weiszfeld_smoothing <= 0:
            raise ValueError("weiszfeld tolerances must be positive")


@dataclass
class FilterReport:
    accepted: set
    scores: dict = field(default_factory=dict)
    server_grad_norm: float = 0.0
    fallback: bool = False


def lf_score(delta: np.ndarray, server_grad: np.ndarray, rho: float) -> float:
    """Descent score -<delta, grad> - rho*||delta||^2 (higher is better)."""
    if rho < 0:
        raise ValueError("rho must be nonnegative")
    return -dot(delta, server_grad) - rho * norm(delta) ** 2


def angle_filter(updates: dict, server_grad: np.ndarray, alpha: float) -> FilterReport:
    """Accept updates whose cosine with -server_grad is at least alpha."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    grad_norm = norm(server_grad)
    if grad_norm < DEGENERATE_GRAD_TOL:
        raise DegenerateGradientError(
            f"server gradient norm {grad_norm:.3e} below {DEGENERATE_GRAD_TOL}")
    reference = -np.asarray(server_grad, dtype=np.float64)
    scores = {i: cos_sim(updates[i], reference) for i in sorted(updates)}
    accepted = {i for i, c in scores.items() if c >= alpha}
    return FilterReport(accepted=accepted, scores=scores, server_grad_norm=grad_norm)


def loss_filter(updates: dict, server_grad: np.ndarray, rho: float, theta: float) -> FilterReport:
    """Reject the floor(theta*|S|) lowest-scoring updates, ties to lower ids."""
    if not 0.0 < theta < 1.0:
        raise ValueError("theta must lie in (0, 1)")
    if not updates:
        raise ValueError("updates must be nonempty")
    scores = {i: lf_score(updates[i], server_grad, rho) for i in sorted(updates)}
    num_reject = int(math.floor(theta * len(updates)))
    ranked = sorted(scores, key=lambda i: (scores[i], i))
    return FilterReport(accepted=set(ranked[num_reject:]), scores=scores,
                        server_grad_norm=norm(server_grad))


def average(points, weights) -> np.ndarray:
    """Weighted mean of equal-length vectors."""
    stacked = np.stack([np.asarray(p, dtype=np.float64) for p in points])
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (len(stacked),):
        raise ValueError("one weight per point required")
    if (w < 0).any() or w.sum() <= 0:
        raise ValueError("weights must be nonnegative with positive sum")
    return (w[:, None] * stacked).sum(axis=0) / w.sum()


def _smoothed_distances(distances: np.ndarray, eps: float) -> np.ndarray:
    # quadratic smoothing below eps keeps the objective differentiable at the points
    return np.where(distances >= eps, distances, distances ** 2 / (2.0 * eps) + eps / 2.0)


def geomed_objective(z: np.ndarray, points) -> float:
    """Sum of Euclidean distances from z to the points (unsmoothed)."""
    pts = np.stack([np.asarray(p, dtype=np.float64) for p in points])
    return float(np.linalg.norm(pts - z, axis=1).sum())


def geometric_median(points, spec: AggregatorSpec | None = None, mode: str = "online",
                     return_trace: bool = False):
    """Smoothed Weiszfeld iteration from the coordinate-wise mean.

    Weights are 1/max(eps, ||z - x_i||). `online` stops after spec.max_iters
    iterations or once the smoothed objective's relative decrease falls below
    spec.rel_tol; `reference` iterates to 1e-12 (max 10000) as a test oracle.
    With return_trace the smoothed objective after every iterate is returned
    alongside the point; it is non-increasing.
    """
    spec = spec if spec is not None else AggregatorSpec()
    points = list(points)
    if not points:
        raise ValueError("need at least one point")
    pts = np.stack([np.asarray(p, dtype=np.float64) for p in points])
    if mode == "reference":
        max_iters, rel_tol = REFERENCE_MAX_ITERS, REFERENCE_REL_TOL
    elif mode == "online":
        max_iters, rel_tol = spec.weiszfeld_max_iters, spec.weiszfeld_rel_tol
    else:
        raise ValueError(f"unknown mode {mode!r}")
    eps = spec.weiszfeld_smoothing
    z = pts.mean(axis=0)
    dists = np.linalg.norm(pts - z, axis=1)
    obj = float(_smoothed_distances(dists, eps).sum())
    trace = [obj]
    for _ in range(max_iters):
        w = 1.0 / np.maximum(dists, eps)
        z = (w[:, None] * pts).sum(axis=0) / w.sum()
        dists = np.linalg.norm(pts - z, axis=1)
        new_obj = float(_smoothed_distances(dists, eps).sum())
        trace.append(new_obj)
        converged = abs(obj - new_obj) <= rel_tol * new_obj
        obj = new_obj
        if converged:
            break
    if return_trace:
        return z, np.array(trace)
    return z


def robust_aggregate(x_t: np.ndarray, updates: dict, server_grad: np.ndarray,
                     filter_spec: FilterSpec, agg_spec: AggregatorSpec,
                     tau: float) -> tuple:
    """Filter client updates, aggregate the survivors, clip, and apply.

    Returns (x_t + clipped aggregate update, filter report). A degenerate
    server gradient downgrades the angle filter to no filtering for the round;
    if nothing is accepted the round's aggregate update is the zero vector.
    """
    if not updates:
        raise ValueError("updates must be nonempty")
    if tau <= 0:
        raise ValueError(f"tau must be positive, got {tau}")
    if filter_spec.kind == FILTER_ANGLE:
        try:
            report = angle_filter(updates, server_grad, filter_spec.alpha)
        except DegenerateGradientError:
            log.warning("degenerate server gradient; angle filter skipped this round")
            report = FilterReport(accepted=set(updates), server_grad_norm=norm(server_grad),
                                  fallback=True)
    elif filter_spec.kind == FILTER_LOSS:
        report = loss_filter(updates, server_grad, filter_spec.rho, filter_spec.theta)
    else:
        report = FilterReport(accepted=set(updates), server_grad_norm=norm(server_grad))
    accepted = sorted(report.accepted)
    if not accepted:
        log.warning("filter accepted no client; applying zero update")
        aggregate = np.zeros_like(np.asarray(x_t, dtype=np.float64))
    else:
        points = [updates[i] for i in accepted]
        if agg_spec.kind == AGG_GEOMED:
            aggregate = geometric_median(points, agg_spec)
        else:
            aggregate = average(points, np.ones(len(points)))
    return x_t + clip_norm(aggregate, tau), report
