"""Multinomial logistic regression trained from scratch.

The objective is mean softmax cross-entropy plus (l2_strength/2)*||W||^2
with unregularized biases, minimized from zero initialization by either a
limited-memory quasi-Newton method or plain gradient descent, both with
Armijo backtracking line search.  Training is fully deterministic, so
episode results are reproducible bit for bit under a fixed seed.

``SoftmaxRegression`` exposes the usual estimator surface (fit/predict/
predict_proba/get_params) so the classifier composes with scikit-learn
tooling; the numeric core below it is free of sklearn.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import (
    DimMismatchError,
    LabelRangeError,
    NumericalDivergenceError,
    TooFewClassesError,
)
from .validation import as_matrix, as_vector, check_labels

OPTIMIZER_QUASI_NEWTON = "quasi-newton"
OPTIMIZER_GRADIENT_DESCENT = "gradient-descent"

_ARMIJO_C1 = 1e-4
_MIN_STEP = 1e-20


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def loss_and_gradient(
    weights: np.ndarray,
    biases: np.ndarray,
    X: np.ndarray,
    y: np.ndarray,
    l2_strength: float,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Exact value and gradient of the regularized mean cross-entropy.

    Duplicating every row leaves both outputs unchanged (mean formulation),
    and biases carry no penalty.
    """
    weights = np.asarray(weights, dtype=np.float64)
    biases = np.asarray(biases, dtype=np.float64)
    X = as_matrix(X, name="X")
    n_classes = weights.shape[0]
    y = check_labels(y, n_classes)
    if y.shape[0] != X.shape[0]:
        raise ValueError("X and y row counts differ")
    if l2_strength < 0:
        raise ValueError("l2_strength must be non-negative")

    n = X.shape[0]
    logits = X @ weights.T + biases
    log_probs = _log_softmax(logits)
    nll = -log_probs[np.arange(n), y].mean()
    loss = nll + 0.5 * l2_strength * float(np.sum(weights * weights))

    probs = np.exp(log_probs)
    probs[np.arange(n), y] -= 1.0
    probs /= n
    grad_w = probs.T @ X + l2_strength * weights
    grad_b = probs.sum(axis=0)
    return float(loss), grad_w, grad_b


@dataclass
class OptimResult:
    x: np.ndarray
    loss: float
    n_iter: int
    converged: bool
    loss_history: list[float]


def _check_finite(loss: float, grad: np.ndarray) -> None:
    if not np.isfinite(loss) or not np.all(np.isfinite(grad)):
        raise NumericalDivergenceError("optimizer produced a non-finite loss or gradient")


def _line_search(value_and_grad, x, loss, grad, direction, step0):
    """Backtracking Armijo search; returns (step, new_x, new_loss, new_grad)."""
    slope = float(np.dot(grad, direction))
    if slope >= 0:
        direction = -grad
        slope = -float(np.dot(grad, grad))
    step = step0
    while step > _MIN_STEP:
        candidate = x + step * direction
        new_loss, new_grad = value_and_grad(candidate)
        _check_finite(new_loss, new_grad)
        if new_loss <= loss + _ARMIJO_C1 * step * slope:
            return step, candidate, new_loss, new_grad
        step *= 0.5
    return 0.0, x, loss, grad


def _minimize_lbfgs(value_and_grad, x0, *, gtol, max_iter, memory=10) -> OptimResult:
    """Two-loop-recursion L-BFGS with Armijo backtracking.

    Curvature pairs with non-positive y.s are skipped, which keeps the
    inverse-Hessian proxy positive definite on this convex objective.
    """
    x = np.asarray(x0, dtype=np.float64).copy()
    loss, grad = value_and_grad(x)
    _check_finite(loss, grad)
    history: list[float] = [loss]
    s_list: list[np.ndarray] = []
    y_list: list[np.ndarray] = []
    rho_list: list[float] = []

    for iteration in range(max_iter):
        gnorm = float(np.abs(grad).max())
        if gnorm <= gtol:
            return OptimResult(x, loss, iteration, True, history)

        q = grad.copy()
        alphas = []
        for s, yv, rho in zip(reversed(s_list), reversed(y_list), reversed(rho_list)):
            a = rho * float(np.dot(s, q))
            alphas.append(a)
            q -= a * yv
        if y_list:
            ys = float(np.dot(s_list[-1], y_list[-1]))
            yy = float(np.dot(y_list[-1], y_list[-1]))
            q *= ys / yy
        for (s, yv, rho), a in zip(zip(s_list, y_list, rho_list), reversed(alphas)):
            b = rho * float(np.dot(yv, q))
            q += (a - b) * s
        direction = -q

        step0 = 1.0 if s_list else min(1.0, 1.0 / max(gnorm, 1.0))
        step, new_x, new_loss, new_grad = _line_search(
            value_and_grad, x, loss, grad, direction, step0
        )
        if step == 0.0:
            return OptimResult(x, loss, iteration, False, history)

        s = new_x - x
        yv = new_grad - grad
        ys = float(np.dot(s, yv))
        if ys > 1e-10:
            s_list.append(s)
            y_list.append(yv)
            rho_list.append(1.0 / ys)
            if len(s_list) > memory:
                s_list.pop(0)
                y_list.pop(0)
                rho_list.pop(0)

        x, loss, grad = new_x, new_loss, new_grad
        history.append(loss)

    return OptimResult(x, loss, max_iter, float(np.abs(grad).max()) <= gtol, history)


def _minimize_gd(value_and_grad, x0, *, gtol, max_iter) -> OptimResult:
    """Steepest descent with backtracking; the step doubles after success."""
    x = np.asarray(x0, dtype=np.float64).copy()
    loss, grad = value_and_grad(x)
    _check_finite(loss, grad)
    history = [loss]
    step0 = 1.0
    for iteration in range(max_iter):
        if float(np.abs(grad).max()) <= gtol:
            return OptimResult(x, loss, iteration, True, history)
        step, x, loss, grad = _line_search(value_and_grad, x, loss, grad, -grad, step0)
        if step == 0.0:
            return OptimResult(x, loss, iteration, False, history)
        step0 = step * 2.0
        history.append(loss)
    return OptimResult(x, loss, max_iter, float(np.abs(grad).max()) <= gtol, history)


def train_parameters(
    X: np.ndarray,
    y: np.ndarray,
    *,
    n_classes: int,
    l2_strength: float = 1.0,
    max_iterations: int = 1000,
    gradient_tolerance: float = 1e-6,
    optimizer: str = OPTIMIZER_QUASI_NEWTON,
    init: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray, OptimResult]:
    """Optimize (weights, biases) for labels already indexed 0..n_classes-1."""
    X = as_matrix(X, name="X")
    y = check_labels(y, n_classes)
    if gradient_tolerance <= 0:
        raise ValueError("gradient_tolerance must be positive")
    if max_iterations < 1:
        raise ValueError("max_iterations must be at least 1")
    dim = X.shape[1]

    def value_and_grad(flat: np.ndarray):
        w = flat[: n_classes * dim].reshape(n_classes, dim)
        b = flat[n_classes * dim :]
        loss, gw, gb = loss_and_gradient(w, b, X, y, l2_strength)
        return loss, np.concatenate([gw.ravel(), gb])

    x0 = np.zeros(n_classes * dim + n_classes) if init is None else np.asarray(
        init, dtype=np.float64
    )
    if optimizer == OPTIMIZER_QUASI_NEWTON:
        result = _minimize_lbfgs(
            value_and_grad, x0, gtol=gradient_tolerance, max_iter=max_iterations
        )
    elif optimizer == OPTIMIZER_GRADIENT_DESCENT:
        result = _minimize_gd(
            value_and_grad, x0, gtol=gradient_tolerance, max_iter=max_iterations
        )
    else:
        raise ValueError(f"unknown optimizer {optimizer!r}")

    weights = result.x[: n_classes * dim].reshape(n_classes, dim).copy()
    biases = result.x[n_classes * dim :].copy()
    # Softmax is invariant to a global bias shift and biases carry no
    # penalty, so the optimizer's endpoint has an arbitrary offset; centering
    # pins the unique canonical optimum without changing any prediction.
    biases -= biases.mean()
    return weights, biases, result


class SoftmaxRegression(BaseEstimator, ClassifierMixin):
    """Multinomial logistic regression with a deterministic from-scratch solver.

    Parameters
    ----------
    l2_strength : float, default=1.0
        Weight-penalty strength; biases are never penalized.
    max_iterations : int, default=1000
        Optimizer iteration cap.
    gradient_tolerance : float, default=1e-6
        Stop when the gradient infinity-norm falls below this.
    optimizer : {"quasi-newton", "gradient-descent"}, default="quasi-newton"

    Attributes
    ----------
    classes_ : ndarray of the distinct labels seen in fit, ascending.
    weights_ : ndarray of shape (n_classes, n_features).
    biases_ : ndarray of shape (n_classes,).
    """

    def __init__(
        self,
        l2_strength: float = 1.0,
        max_iterations: int = 1000,
        gradient_tolerance: float = 1e-6,
        optimizer: str = OPTIMIZER_QUASI_NEWTON,
    ):
        self.l2_strength = l2_strength
        self.max_iterations = max_iterations
        self.gradient_tolerance = gradient_tolerance
        self.optimizer = optimizer

    def fit(self, X, y):
        X = as_matrix(X, name="X")
        y = check_labels(y)
        if y.shape[0] != X.shape[0]:
            raise ValueError("X and y row counts differ")
        classes = np.unique(y)
        if classes.shape[0] < 2:
            raise TooFewClassesError("training needs at least two distinct classes")
        index_of = {int(c): i for i, c in enumerate(classes)}
        y_idx = np.array([index_of[int(label)] for label in y], dtype=np.int64)

        weights, biases, result = train_parameters(
            X,
            y_idx,
            n_classes=classes.shape[0],
            l2_strength=self.l2_strength,
            max_iterations=self.max_iterations,
            gradient_tolerance=self.gradient_tolerance,
            optimizer=self.optimizer,
        )
        self.classes_ = classes
        self.weights_ = weights
        self.biases_ = biases
        self.n_features_in_ = X.shape[1]
        self.n_iter_ = result.n_iter
        self.converged_ = result.converged
        self.initial_loss_ = result.loss_history[0]
        self.final_loss_ = result.loss
        return self

    def _check_X(self, X) -> np.ndarray:
        check_is_fitted(self, "weights_")
        X = as_matrix(X, name="X")
        if X.shape[1] != self.n_features_in_:
            raise DimMismatchError(
                f"X has {X.shape[1]} features, model expects {self.n_features_in_}"
            )
        return X

    def predict_proba(self, X) -> np.ndarray:
        X = self._check_X(X)
        probs = np.exp(_log_softmax(X @ self.weights_.T + self.biases_))
        return probs / probs.sum(axis=1, keepdims=True)

    def predict(self, X) -> np.ndarray:
        probs = self.predict_proba(X)
        # argmax returns the first maximum, i.e. ties break to the lowest class id
        return self.classes_[np.argmax(probs, axis=1)]

    def predict_one(self, v) -> tuple[int, np.ndarray]:
        """Label and probability vector for a single embedding."""
        vec = as_vector(v)
        probs = self.predict_proba(vec[None, :])[0]
        return int(self.classes_[int(np.argmax(probs))]), probs


class UncertainPolicy(Enum):
    # Absorber predictions are scored as plain misses.
    COUNT_WRONG = "count-wrong"
    # Absorber predictions fall back to the most probable real class.
    FALLBACK_SECOND_BEST = "fallback-second-best"


@dataclass(frozen=True)
class QueryOutcome:
    true_label: int
    predicted: int
    final: int
    correct: bool


@dataclass(frozen=True)
class ScoreResult:
    accuracy: float
    outcomes: tuple[QueryOutcome, ...]
    n_absorbed: int


def score_queries(
    model: SoftmaxRegression,
    X,
    y,
    policy: UncertainPolicy = UncertainPolicy.COUNT_WRONG,
    absorber_id: int | None = None,
) -> ScoreResult:
    """Score labeled queries under the configured absorber policy.

    Query labels must be real classes; the absorber id never appears among
    them.  Without an absorber the two policies coincide.
    """
    if isinstance(policy, str):
        policy = UncertainPolicy(policy)
    X = as_matrix(X, name="queries")
    y = check_labels(y)
    if y.shape[0] != X.shape[0]:
        raise ValueError("queries and labels differ in length")
    if absorber_id is not None and np.any(y == absorber_id):
        raise LabelRangeError("query labels must never be the absorber id")

    probs = model.predict_proba(X)
    predicted = model.classes_[np.argmax(probs, axis=1)]
    final = predicted.copy()
    n_absorbed = 0
    if absorber_id is not None:
        absorbed = predicted == absorber_id
        n_absorbed = int(absorbed.sum())
        if policy is UncertainPolicy.FALLBACK_SECOND_BEST and n_absorbed:
            masked = probs.copy()
            masked[:, model.classes_ == absorber_id] = -np.inf
            fallback = model.classes_[np.argmax(masked, axis=1)]
            final[absorbed] = fallback[absorbed]

    correct = final == y
    outcomes = tuple(
        QueryOutcome(int(t), int(p), int(f), bool(c))
        for t, p, f, c in zip(y, predicted, final, correct)
    )
    return ScoreResult(
        accuracy=float(correct.mean()), outcomes=outcomes, n_absorbed=n_absorbed
    )


def dump_model(model: SoftmaxRegression, path) -> None:
    """Write fitted parameters as JSON for debugging."""
    import json

    check_is_fitted(model, "weights_")
    payload = {
        "classes": model.classes_.tolist(),
        "weights": model.weights_.tolist(),
        "biases": model.biases_.tolist(),
        "params": model.get_params(),
        "n_iter": model.n_iter_,
        "converged": model.converged_,
        "final_loss": model.final_loss_,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
