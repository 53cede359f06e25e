"""Softmax-linear learner, model distance and the proximal update.

Parameters are one flat vector: the ``C x f`` weight matrix row-major, then
the ``C`` biases.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from ..domain import LearnerSpec
from ..errors import DimensionMismatch, DivergedLoss, EmptyTestSet
from .data import SyntheticDataset

MAX_HALVINGS = 20

ValueGrad = Callable[[np.ndarray], tuple[float, np.ndarray]]


def _unpack(params: np.ndarray, classes: int, features: int):
    if params.shape != (classes * (features + 1),):
        raise DimensionMismatch(f"expected {classes * (features + 1)} parameters, got {params.shape}")
    W = params[: classes * features].reshape(classes, features)
    b = params[classes * features:]
    return W, b


def softmax_loss_grad(params, X, y, classes: int, l2: float = 0.0) -> tuple[float, np.ndarray]:
    """Mean cross-entropy plus ``l2/2 * ||W||^2`` and its gradient."""
    params = np.asarray(params, dtype=float)
    n, f = X.shape
    W, b = _unpack(params, classes, f)
    logits = X @ W.T + b
    logits = logits - logits.max(axis=1, keepdims=True)
    logZ = np.log(np.exp(logits).sum(axis=1))
    loss = float(np.mean(logZ - logits[np.arange(n), y])) + 0.5 * l2 * float(np.sum(W * W))
    P = np.exp(logits - logZ[:, None])
    P[np.arange(n), y] -= 1.0
    P /= n
    gW = P.T @ X + l2 * W
    gb = P.sum(axis=0)
    return loss, np.concatenate([gW.ravel(), gb])


def local_loss(params, data: SyntheticDataset, spec: LearnerSpec) -> float:
    X = data.X_train
    if X.shape[1] != spec.feature_dim:
        raise DimensionMismatch(f"data has {X.shape[1]} features, learner expects {spec.feature_dim}")
    return softmax_loss_grad(np.asarray(params, dtype=float), X, data.y_train, spec.classes, spec.l2)[0]


def local_loss_grad(params, data: SyntheticDataset, spec: LearnerSpec) -> tuple[float, np.ndarray]:
    X = data.X_train
    if X.shape[1] != spec.feature_dim:
        raise DimensionMismatch(f"data has {X.shape[1]} features, learner expects {spec.feature_dim}")
    return softmax_loss_grad(np.asarray(params, dtype=float), X, data.y_train, spec.classes, spec.l2)


def model_distance(a, b, normalized: bool = False) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise DimensionMismatch(f"cannot compare parameter vectors of shapes {a.shape} and {b.shape}")
    diff = a - b
    d = float(diff @ diff)
    return d / a.size if normalized else d


def distance_matrix(params: Sequence[np.ndarray], normalized: bool = False) -> np.ndarray:
    """Pairwise :func:`model_distance`, symmetric with an exact zero diagonal."""
    m = len(params)
    D = np.zeros((m, m))
    for i in range(m):
        for j in range(i + 1, m):
            D[i, j] = D[j, i] = model_distance(params[i], params[j], normalized)
    return D


def prox_center(own, row, all_params: Sequence[np.ndarray], sizes, eta: float, own_size: float,
                normalized: bool = False) -> np.ndarray:
    """Own model moved ``eta`` along the size-weighted pull of the selected collaborators.

    With squared-L2 distance the pull toward ``theta_j`` is ``2 (own - theta_j)``,
    divided by the dimension when distances are normalized.
    """
    own = np.asarray(own, dtype=float)
    sizes = np.asarray(sizes, dtype=float)
    pull = np.zeros_like(own)
    for j in np.flatnonzero(np.asarray(row)):
        theta_j = np.asarray(all_params[j], dtype=float)
        if theta_j.shape != own.shape:
            raise DimensionMismatch("collaborator parameters have a different dimension")
        pull += sizes[j] * 2.0 * (own - theta_j)
    if normalized:
        pull /= own.size
    return own - (eta / own_size) * pull


def prox_weights(row, sizes, eta: float, own_size: float, normalized: bool = False, dim: int = 1) -> tuple[float, np.ndarray]:
    """Coefficients of the prox center as a combination of own and collaborator models."""
    scale = 2.0 * eta / own_size / (dim if normalized else 1)
    w = scale * np.asarray(row, dtype=float) * np.asarray(sizes, dtype=float)
    return 1.0 - float(w.sum()), w


def stability_eta(own_size: float, row, sizes, normalized: bool = False, dim: int = 1) -> float:
    """Largest eta that keeps the prox center a convex combination."""
    pulled = float(np.dot(np.asarray(row), np.asarray(sizes, dtype=float)))
    if pulled == 0:
        return np.inf
    return own_size * (dim if normalized else 1) / (2.0 * pulled)


def prox_descent(value_grad: ValueGrad, start, center, mu: float, steps: int, learn_rate: float) -> np.ndarray:
    """Proximal gradient on ``f(x) + mu/2 ||x - center||^2``.

    The quadratic is handled in closed form each step:
    ``x+ = (x - lr grad f(x) + lr mu center) / (1 + lr mu)``. A step that
    raises the objective halves the rate; after ``MAX_HALVINGS`` halvings with
    finite but non-improving candidates the iterate is already stationary to
    rounding and is returned, while non-finite candidates raise DivergedLoss.
    """
    x = np.asarray(start, dtype=float).copy()
    center = np.asarray(center, dtype=float)
    lr = float(learn_rate)

    def objective(v):
        fv, g = value_grad(v)
        diff = v - center
        return fv + 0.5 * mu * float(diff @ diff), g

    F, g = objective(x)
    if not np.isfinite(F):
        raise DivergedLoss(f"objective is not finite at the starting point: {F}")
    for _ in range(steps):
        saw_finite = False
        for _ in range(MAX_HALVINGS + 1):
            cand = (x - lr * g + lr * mu * center) / (1.0 + lr * mu)
            Fc, gc = objective(cand)
            if np.isfinite(Fc):
                saw_finite = True
                if Fc <= F:
                    break
            lr *= 0.5
        else:
            if not saw_finite:
                raise DivergedLoss("objective stayed non-finite after repeated step halving")
            return x
        x, F, g = cand, Fc, gc
    return x


def local_train(start, center, data: SyntheticDataset, spec: LearnerSpec, lam: float, eta: float) -> np.ndarray:
    """Minimise local loss plus ``lam/(2 eta) ||theta - center||^2`` from ``start``."""
    start = np.asarray(start, dtype=float)
    center = np.asarray(center, dtype=float)
    if start.shape != (spec.dim,) or center.shape != (spec.dim,):
        raise DimensionMismatch(f"parameters must have dimension {spec.dim}")
    if not (np.all(np.isfinite(start)) and np.all(np.isfinite(center))):
        raise DivergedLoss("non-finite parameters passed to local training")
    X, y = data.X_train, data.y_train

    def vg(theta):
        return softmax_loss_grad(theta, X, y, spec.classes, spec.l2)

    return prox_descent(vg, start, center, lam / eta, spec.steps, spec.learn_rate)


def predict(params, X, classes: int) -> np.ndarray:
    W, b = _unpack(np.asarray(params, dtype=float), classes, X.shape[1])
    return np.argmax(X @ W.T + b, axis=1)  # argmax keeps the lowest index on ties


def evaluate(params, data: SyntheticDataset, spec: LearnerSpec) -> float:
    if len(data.test_idx) == 0:
        raise EmptyTestSet("client has no held-out points")
    pred = predict(params, data.X_test, spec.classes)
    return float(np.mean(pred == data.y_test))
