"""Flat parameter-vector algebra shared by models, clients, and the server."""
import numpy as np

# below this norm a vector is treated as having no direction
ZERO_NORM_TOL = 1e-12
# relative slack on the clip threshold so clipping is exactly idempotent
_CLIP_SLACK = 1e-12


def _check_same_dim(a, b):
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")


def dot(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _check_same_dim(a, b)
    return float(np.dot(a, b))


def norm(a) -> float:
    a = np.asarray(a, dtype=np.float64)
    return float(np.linalg.norm(a))


def cos_sim(a, b) -> float:
    """Cosine similarity; a vanishing input counts as anti-aligned (-1)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _check_same_dim(a, b)
    na = norm(a)
    nb = norm(b)
    if na < ZERO_NORM_TOL or nb < ZERO_NORM_TOL:
        return -1.0
    return dot(a, b) / (na * nb)


def clip_norm(a, tau: float) -> np.ndarray:
    """Rescale a onto the ball of radius tau, preserving direction."""
    if tau <= 0:
        raise ValueError(f"tau must be positive, got {tau}")
    a = np.asarray(a, dtype=np.float64)
    n = norm(a)
    if n <= tau * (1.0 + _CLIP_SLACK):
        return a
    return a * (tau / n)


def axpy(alpha: float, x, y) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    _check_same_dim(x, y)
    return alpha * x + y
