"""Linear hinge-loss classifier trained by stochastic subgradient descent.

The update is the Pegasos rule: at global step ``t`` with step size
``eta = 1 / (lambda * t)``::

    w <- (1 - eta * lambda) * w + eta * y * f     if y * (w.f + b) < 1
    w <- (1 - eta * lambda) * w                   otherwise

The bias follows the same step without shrinkage (it is not regularized).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, DegeneracyError, DimensionError, ParameterError

DEFAULT_LAMBDA = 1e-4
DEFAULT_EPOCHS = 20


@dataclass(frozen=True, eq=False)
class LinearModel:
    weights: np.ndarray
    bias: float
    lam: float | None = None
    epochs: int | None = None
    seed: int | None = None

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64)
        if w.ndim != 1:
            raise ParameterError("weights must be a vector")
        if not (np.all(np.isfinite(w)) and np.isfinite(self.bias)):
            raise DataError("classifier parameters must be finite")
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", float(self.bias))

    @property
    def dim(self) -> int:
        return self.weights.shape[0]


def as_signed_labels(labels) -> np.ndarray:
    """Map labels given as {0, 1} or {-1, +1} to {-1, +1}."""
    y = np.asarray(labels)
    vals = set(np.unique(y).tolist())
    if vals <= {0, 1}:
        return np.where(y == 1, 1.0, -1.0)
    if vals <= {-1, 1}:
        return y.astype(np.float64)
    raise ParameterError(f"labels must be in {{0, 1}} or {{-1, +1}}, got {sorted(vals)}")


def objective(w, b, features, labels, lam) -> float:
    """(lam/2)|w|^2 + mean hinge loss."""
    F = np.asarray(features, dtype=np.float64)
    y = as_signed_labels(labels)
    margins = y * (F @ w + b)
    return 0.5 * lam * float(w @ w) + float(np.mean(np.maximum(0.0, 1.0 - margins)))


def subgradient(w, b, features, labels, lam) -> tuple[np.ndarray, float]:
    """Subgradient of :func:`objective` with respect to ``(w, b)``.

    At a kink (margin exactly 1) the zero branch is taken.
    """
    F = np.asarray(features, dtype=np.float64)
    y = as_signed_labels(labels)
    active = y * (F @ w + b) < 1.0
    n = F.shape[0]
    gw = lam * np.asarray(w, dtype=np.float64) - (y[active] @ F[active]) / n
    gb = -float(np.sum(y[active])) / n
    return gw, gb


def train_linear(
    features,
    labels,
    lam: float = DEFAULT_LAMBDA,
    epochs: int = DEFAULT_EPOCHS,
    rng: np.random.Generator | None = None,
    seed: int | None = None,
) -> LinearModel:
    """Fit a linear hinge-loss model.

    Parameters
    ----------
    features : array, shape (n, D)
    labels : array, shape (n,)
        ``{0, 1}`` or ``{-1, +1}``; 1 / +1 is the changed class.
    lam : float
        L2 regularization strength (> 0).
    epochs : int
        Passes over the data; each pass visits samples in an order drawn from ``rng``.
    rng : numpy Generator
        Source of the per-epoch permutations. Built from ``seed`` when omitted.

    Returns
    -------
    LinearModel
        The final iterate.
    """
    F = np.ascontiguousarray(features, dtype=np.float64)
    if F.ndim != 2 or F.shape[0] == 0:
        raise ParameterError("features must be a non-empty (n, D) array")
    if not np.all(np.isfinite(F)):
        raise DataError("features contain NaN or infinite values")
    y = as_signed_labels(labels)
    if y.shape != (F.shape[0],):
        raise DimensionError(f"{F.shape[0]} feature rows but {y.shape[0]} labels")
    if not (np.any(y > 0) and np.any(y < 0)):
        raise DegeneracyError("training data must contain both classes")
    if not lam > 0:
        raise ParameterError(f"lambda must be positive, got {lam}")
    if epochs < 1:
        raise ParameterError(f"epochs must be >= 1, got {epochs}")
    if rng is None:
        rng = np.random.default_rng(seed)

    n, d = F.shape
    w = np.zeros(d)
    b = 0.0
    t = 0
    for _ in range(epochs):
        for i in rng.permutation(n):
            t += 1
            eta = 1.0 / (lam * t)
            fi = F[i]
            violated = y[i] * (float(w @ fi) + b) < 1.0
            w *= 1.0 - eta * lam
            if violated:
                w += (eta * y[i]) * fi
                b += eta * y[i]
    return LinearModel(w, b, lam=lam, epochs=epochs, seed=seed)


def decision_value(m: LinearModel, f) -> float:
    f = np.asarray(f, dtype=np.float64)
    if f.shape != m.weights.shape:
        raise DimensionError(f"feature length {f.shape} does not match classifier length {m.dim}")
    return float(np.sum(m.weights * f)) + m.bias


def decision_values(m: LinearModel, features) -> np.ndarray:
    """Row-wise :func:`decision_value`; bit-identical to calling it per row."""
    F = np.asarray(features, dtype=np.float64)
    if F.ndim != 2 or F.shape[1] != m.dim:
        raise DimensionError(f"feature matrix {F.shape} does not match classifier length {m.dim}")
    return np.sum(F * m.weights, axis=1) + m.bias


def predict(m: LinearModel, f) -> int:
    # ties go to unchanged
    return int(decision_value(m, f) > 0)


def predict_many(m: LinearModel, features) -> np.ndarray:
    return (decision_values(m, features) > 0).astype(np.uint8)
