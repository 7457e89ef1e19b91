"""Classifiers and evaluation: a soft-margin SVM trained by sequential
minimal optimization, the 16-4-1 sigmoid network baseline, confusion-matrix
metrics (abnormal = positive class), and stratified k-fold cross-validation.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError
from .features import FeatureVector, StandardizationTransform, standardize_fit

log = logging.getLogger(__name__)

POSITIVE_LABEL = "abnormal"
NEGATIVE_LABEL = "normal"

_ALPHA_EPS = 1e-12
_STEP_EPS = 1e-8          # minimum relative alpha change worth applying
_MAX_SWEEPS = 10_000


@dataclass(eq=False)
class SvmModel:
    kernel: str
    gamma: float | None
    C: float
    support_vectors: np.ndarray   # standardized feature rows
    dual_coeffs: np.ndarray       # alpha_i * y_i
    bias: float
    transform: StandardizationTransform
    diagnostics: dict = field(default_factory=dict)


@dataclass(eq=False)
class MlpModel:
    """16-4-1 network with logistic-sigmoid activations.

    ``transform`` is the feature standardization expected at the input, when
    the training pipeline used one; the network itself is trained on whatever
    it is given.
    """

    w_hidden: np.ndarray   # (16, 4)
    b_hidden: np.ndarray   # (4,)
    w_out: np.ndarray      # (4, 1)
    b_out: np.ndarray      # (1,)
    seed: int
    transform: StandardizationTransform | None = None


@dataclass(frozen=True)
class Metrics:
    tp: int
    fn: int
    tn: int
    fp: int
    sensitivity: float
    specificity: float
    accuracy: float

    @classmethod
    def from_counts(cls, tp: int, fn: int, tn: int, fp: int) -> "Metrics":
        sens = tp / (tp + fn) if tp + fn > 0 else math.nan
        spec = tn / (tn + fp) if tn + fp > 0 else math.nan
        total = tp + fn + tn + fp
        acc = (tp + tn) / total if total > 0 else math.nan
        return cls(tp=tp, fn=fn, tn=tn, fp=fp, sensitivity=sens,
                   specificity=spec, accuracy=acc)


def _signed_labels(labels) -> np.ndarray:
    y = np.empty(len(labels))
    for i, lab in enumerate(labels):
        if lab == POSITIVE_LABEL:
            y[i] = 1.0
        elif lab == NEGATIVE_LABEL:
            y[i] = -1.0
        else:
            raise InvalidArgumentError(f"unknown label {lab!r}")
    return y


def _kernel_matrix(kernel: str, gamma: float | None, A: np.ndarray,
                   B: np.ndarray) -> np.ndarray:
    if kernel == "linear":
        return A @ B.T
    if kernel == "rbf":
        d2 = (np.sum(A * A, axis=1)[:, None] + np.sum(B * B, axis=1)[None, :]
              - 2.0 * (A @ B.T))
        return np.exp(-gamma * np.maximum(d2, 0.0))
    raise InvalidArgumentError(f"kernel must be 'linear' or 'rbf', got {kernel!r}")


class _Smo:
    """Platt-style SMO on a precomputed kernel matrix.

    Pair selection is deterministic: the second-choice heuristic picks the
    non-bound example with the largest |E1 - E2| (lowest index on ties) and
    the fallback scans start at a seeded offset.
    """

    def __init__(self, K, y, C, tol, seed):
        self.K = K
        self.y = y
        self.C = C
        self.tol = tol
        self.n = len(y)
        self.alpha = np.zeros(self.n)
        self.b = 0.0
        self.errors = -y.astype(float)   # f(x)=0 initially, E = f - y
        self.rng = np.random.Generator(np.random.Philox(seed))

    def decision(self, i):
        return float((self.alpha * self.y) @ self.K[:, i] + self.b)

    def dual_objective(self):
        ay = self.alpha * self.y
        return float(np.sum(self.alpha) - 0.5 * ay @ self.K @ ay)

    def _non_bound(self):
        return np.flatnonzero((self.alpha > _ALPHA_EPS)
                              & (self.alpha < self.C - _ALPHA_EPS))

    def take_step(self, i1, i2):
        if i1 == i2:
            return False
        a1, a2 = self.alpha[i1], self.alpha[i2]
        y1, y2 = self.y[i1], self.y[i2]
        e1, e2 = self.errors[i1], self.errors[i2]
        s = y1 * y2
        if s > 0:
            lo, hi = max(0.0, a1 + a2 - self.C), min(self.C, a1 + a2)
        else:
            lo, hi = max(0.0, a2 - a1), min(self.C, self.C + a2 - a1)
        if lo >= hi:
            return False
        k11, k12, k22 = self.K[i1, i1], self.K[i1, i2], self.K[i2, i2]
        eta = k11 + k22 - 2.0 * k12
        if eta > 0:
            a2_new = a2 + y2 * (e1 - e2) / eta
            a2_new = min(max(a2_new, lo), hi)
        else:
            # evaluate the pair objective at both clip ends
            f1 = y1 * e1 - a1 * k11 - s * a2 * k12
            f2 = y2 * e2 - a2 * k22 - s * a1 * k12
            l1 = a1 + s * (a2 - lo)
            h1 = a1 + s * (a2 - hi)
            lo_obj = (l1 * f1 + lo * f2 + 0.5 * l1 * l1 * k11
                      + 0.5 * lo * lo * k22 + s * lo * l1 * k12)
            hi_obj = (h1 * f1 + hi * f2 + 0.5 * h1 * h1 * k11
                      + 0.5 * hi * hi * k22 + s * hi * h1 * k12)
            if lo_obj < hi_obj - 1e-12:
                a2_new = lo
            elif lo_obj > hi_obj + 1e-12:
                a2_new = hi
            else:
                return False
        if abs(a2_new - a2) < _STEP_EPS * (a2_new + a2 + _STEP_EPS):
            return False
        a1_new = a1 + s * (a2 - a2_new)
        if a1_new < _ALPHA_EPS:
            a1_new = 0.0
        elif a1_new > self.C - _ALPHA_EPS:
            a1_new = self.C
        d1 = y1 * (a1_new - a1)
        d2 = y2 * (a2_new - a2)
        b1 = self.b - e1 - d1 * k11 - d2 * k12
        b2 = self.b - e2 - d1 * k12 - d2 * k22
        if 0 < a1_new < self.C:
            b_new = b1
        elif 0 < a2_new < self.C:
            b_new = b2
        else:
            b_new = 0.5 * (b1 + b2)
        self.errors += d1 * self.K[:, i1] + d2 * self.K[:, i2] + (b_new - self.b)
        self.alpha[i1] = a1_new
        self.alpha[i2] = a2_new
        self.b = b_new
        self.errors[i1] = self.decision(i1) - self.y[i1]
        self.errors[i2] = self.decision(i2) - self.y[i2]
        return True

    def examine(self, i2):
        y2 = self.y[i2]
        a2 = self.alpha[i2]
        e2 = self.errors[i2]
        r2 = e2 * y2
        if not ((r2 < -self.tol and a2 < self.C) or (r2 > self.tol and a2 > 0)):
            return False
        nb = self._non_bound()
        if nb.size > 1:
            gaps = np.abs(self.errors[nb] - e2)
            i1 = int(nb[np.argmax(gaps)])
            if self.take_step(i1, i2):
                return True
        if nb.size:
            start = int(self.rng.integers(nb.size))
            for k in range(nb.size):
                if self.take_step(int(nb[(start + k) % nb.size]), i2):
                    return True
        start = int(self.rng.integers(self.n))
        for k in range(self.n):
            if self.take_step((start + k) % self.n, i2):
                return True
        return False

    def run(self):
        history = []
        examine_all = True
        sweeps = 0
        while sweeps < _MAX_SWEEPS:
            changed = 0
            idx = range(self.n) if examine_all else self._non_bound()
            for i in idx:
                changed += int(self.examine(int(i)))
            history.append(self.dual_objective())
            sweeps += 1
            if examine_all:
                if changed == 0:
                    break
                examine_all = False
            elif changed == 0:
                examine_all = True
        return history, sweeps


def svm_train(X, labels, kernel: str = "rbf", C: float = 1.0,
              tol: float = 1e-3, seed: int = 0,
              gamma: float | None = None) -> SvmModel:
    """Train a soft-margin SVM by SMO; features are standardized internally.

    ``gamma`` defaults to 1/n_features for the rbf kernel.  Training is
    deterministic for a given seed.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = _signed_labels(labels)
    if X.shape[0] != y.size:
        raise InvalidArgumentError("X and labels have different lengths")
    if C <= 0:
        raise InvalidArgumentError(f"C must be positive, got {C!r}")
    if not (np.any(y > 0) and np.any(y < 0)):
        raise InvalidArgumentError("training set must contain both classes")
    names = [f"x{j}" for j in range(X.shape[1])]
    tf = standardize_fit([FeatureVector(names=names, values=row) for row in X])
    Z = (X - tf.means) / tf.scales
    if kernel == "rbf" and gamma is None:
        gamma = 1.0 / X.shape[1]
    K = _kernel_matrix(kernel, gamma, Z, Z)
    smo = _Smo(K, y, float(C), float(tol), seed)
    history, sweeps = smo.run()
    sv = smo.alpha > _ALPHA_EPS
    return SvmModel(kernel=kernel, gamma=gamma, C=float(C),
                    support_vectors=Z[sv].copy(),
                    dual_coeffs=(smo.alpha[sv] * y[sv]).copy(),
                    bias=float(smo.b), transform=tf,
                    diagnostics={"dual_objective": history, "sweeps": sweeps,
                                 "alpha": smo.alpha, "signed_labels": y,
                                 "tol": float(tol)})


def svm_decision(model: SvmModel, X) -> np.ndarray:
    """Decision values for raw (unstandardized) feature rows."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != model.transform.means.size:
        raise InvalidArgumentError(
            f"feature length {X.shape[1]} does not match model "
            f"{model.transform.means.size}")
    Z = (X - model.transform.means) / model.transform.scales
    K = _kernel_matrix(model.kernel, model.gamma, Z, model.support_vectors)
    return K @ model.dual_coeffs + model.bias


def svm_predict(model: SvmModel, fv) -> tuple[str, float]:
    """(label, margin) for one feature vector; positive margin = abnormal."""
    values = fv.values if isinstance(fv, FeatureVector) else np.asarray(fv, float)
    margin = float(svm_decision(model, values.reshape(1, -1))[0])
    label = POSITIVE_LABEL if margin > 0 else NEGATIVE_LABEL
    return label, margin


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def _mlp_forward(params, X):
    w1, b1, w2, b2 = params
    hidden = _sigmoid(X @ w1 + b1)
    out = _sigmoid(hidden @ w2 + b2)
    return hidden, out


def mlp_loss_and_grads(params, X, targets):
    """Mean-squared-error loss and its gradients for the 16-4-1 network."""
    w1, b1, w2, b2 = params
    hidden, out = _mlp_forward(params, X)
    t = targets.reshape(-1, 1)
    n = X.shape[0]
    loss = float(np.mean((out - t) ** 2))
    d_out = (2.0 / n) * (out - t) * out * (1.0 - out)
    g_w2 = hidden.T @ d_out
    g_b2 = d_out.sum(axis=0)
    d_hidden = (d_out @ w2.T) * hidden * (1.0 - hidden)
    g_w1 = X.T @ d_hidden
    g_b1 = d_hidden.sum(axis=0)
    return loss, (g_w1, g_b1, g_w2, g_b2)


def mlp_init(seed: int, n_inputs: int = 16, n_hidden: int = 4):
    rng = np.random.Generator(np.random.Philox(seed))
    return (rng.uniform(-0.5, 0.5, size=(n_inputs, n_hidden)),
            rng.uniform(-0.5, 0.5, size=n_hidden),
            rng.uniform(-0.5, 0.5, size=(n_hidden, 1)),
            rng.uniform(-0.5, 0.5, size=1))


def mlp_train(X, labels, lr: float = 0.5, epochs: int = 2000,
              seed: int = 0) -> MlpModel:
    """Full-batch gradient descent on MSE with sigmoid activations."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != 16:
        raise InvalidArgumentError(
            f"network expects 16 inputs, got {X.shape[1]} features")
    y = _signed_labels(labels)
    if not (np.any(y > 0) and np.any(y < 0)):
        raise InvalidArgumentError("training set must contain both classes")
    targets = (y > 0).astype(float)
    params = mlp_init(seed)
    for _ in range(int(epochs)):
        _, grads = mlp_loss_and_grads(params, X, targets)
        params = tuple(p - lr * g for p, g in zip(params, grads))
    w1, b1, w2, b2 = params
    return MlpModel(w_hidden=w1, b_hidden=b1, w_out=w2, b_out=b2, seed=seed)


def mlp_score(model: MlpModel, X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != model.w_hidden.shape[0]:
        raise InvalidArgumentError(
            f"network expects {model.w_hidden.shape[0]} inputs, got {X.shape[1]}")
    _, out = _mlp_forward((model.w_hidden, model.b_hidden,
                           model.w_out, model.b_out), X)
    return out[:, 0]


def mlp_predict(model: MlpModel, fv) -> tuple[str, float]:
    """(label, score); a score of exactly 0.5 predicts normal."""
    values = fv.values if isinstance(fv, FeatureVector) else np.asarray(fv, float)
    score = float(mlp_score(model, values.reshape(1, -1))[0])
    label = POSITIVE_LABEL if score > 0.5 else NEGATIVE_LABEL
    return label, score


def evaluate(preds, truth) -> Metrics:
    """Confusion-matrix metrics with abnormal as the positive class.

    Ratios with a zero denominator are reported as NaN, never as 0.
    """
    preds = list(preds)
    truth = list(truth)
    if len(preds) != len(truth):
        raise InvalidArgumentError(
            f"got {len(preds)} predictions for {len(truth)} truths")
    if not preds:
        raise InvalidArgumentError("nothing to evaluate")
    tp = fn = tn = fp = 0
    for p, t in zip(preds, truth):
        if t == POSITIVE_LABEL:
            if p == POSITIVE_LABEL:
                tp += 1
            else:
                fn += 1
        elif t == NEGATIVE_LABEL:
            if p == NEGATIVE_LABEL:
                tn += 1
            else:
                fp += 1
        else:
            raise InvalidArgumentError(f"unknown truth label {t!r}")
    return Metrics.from_counts(tp, fn, tn, fp)


def stratified_folds(labels, k: int, seed: int) -> np.ndarray:
    """Fold index per item; each class is shuffled and dealt round-robin."""
    if k < 2:
        raise InvalidArgumentError(f"k must be >= 2, got {k!r}")
    labels = list(labels)
    folds = np.zeros(len(labels), dtype=int)
    rng = np.random.Generator(np.random.Philox(seed))
    for lab in sorted(set(labels)):
        idx = np.array([i for i, l in enumerate(labels) if l == lab])
        if idx.size < k:
            log.warning("class %r has %d member(s) for %d folds; "
                        "some folds will miss it", lab, idx.size, k)
        rng.shuffle(idx)
        folds[idx] = np.arange(idx.size) % k
    return folds


def kfold_cv(labels, pipeline, k: int, seed: int) -> Metrics:
    """Stratified k-fold cross-validation with pooled confusion counts.

    ``pipeline(train_idx, test_idx)`` must return predicted labels for the
    test items, fitting any transform (standardization, FPCA, classifier)
    on the training indices only.
    """
    labels = list(labels)
    folds = stratified_folds(labels, k, seed)
    preds_all = []
    truth_all = []
    for f in range(k):
        test_idx = np.flatnonzero(folds == f)
        train_idx = np.flatnonzero(folds != f)
        if test_idx.size == 0:
            continue
        preds = list(pipeline(train_idx, test_idx))
        if len(preds) != test_idx.size:
            raise InvalidArgumentError("pipeline returned wrong number of predictions")
        preds_all.extend(preds)
        truth_all.extend(labels[i] for i in test_idx)
    return evaluate(preds_all, truth_all)
