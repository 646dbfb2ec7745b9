"""Softmax head over frozen embeddings: decoupled-weight-decay training,
stratified validation, and seeded random hyperparameter search."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .metrics import classification_report

log = logging.getLogger(__name__)

LR_RANGE = (1e-6, 1e-4)
BATCH_CHOICES = (8, 16, 32)
EPOCH_RANGE = (2, 7)


class TrainError(Exception):
    pass


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float
    batch_size: int
    epochs: int
    weight_decay: float = 0.01
    seed: int = 0
    patience: int = 2

    def validate(self) -> None:
        if not (LR_RANGE[0] <= self.learning_rate <= LR_RANGE[1]):
            raise TrainError(f"learning_rate {self.learning_rate} outside {LR_RANGE}")
        if self.batch_size not in BATCH_CHOICES:
            raise TrainError(f"batch_size {self.batch_size} not in {BATCH_CHOICES}")
        if not (EPOCH_RANGE[0] <= self.epochs <= EPOCH_RANGE[1]):
            raise TrainError(f"epochs {self.epochs} outside {EPOCH_RANGE}")


@dataclass
class LinearHead:
    W: np.ndarray  # C x d
    b: np.ndarray  # C

    def save(self, path, classes) -> None:
        payload = {"classes": list(classes), "dim": int(self.W.shape[1]), "W": self.W.tolist(), "b": self.b.tolist()}
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            payload = json.load(fh)
        return cls(np.array(payload["W"], dtype=np.float64), np.array(payload["b"], dtype=np.float64)), payload["classes"]


@dataclass
class TrialResult:
    config: TrainConfig
    val_macro_f1: float
    val_loss_curve: list[float] = field(default_factory=list)
    stopped_epoch: int = 0


def stratified_split(labels, fraction: float = 0.8, seed: int = 42):
    """Per-class proportional train/val indices via largest-remainder rounding."""
    labels = np.asarray(labels)
    n = len(labels)
    rng = np.random.Generator(np.random.PCG64(seed))
    classes, counts = np.unique(labels, return_counts=True)
    for c, cnt in zip(classes, counts):
        if cnt < 2:
            raise TrainError(f"class {c!r} has only {cnt} member(s); cannot stratify")
    target_train = int(round(fraction * n))
    exact = counts * fraction
    floors = np.floor(exact).astype(int)
    remainder = target_train - floors.sum()
    order = np.argsort(-(exact - floors), kind="mergesort")  # largest fractional part first
    train_counts = floors.copy()
    for i in range(remainder):
        train_counts[order[i % len(order)]] += 1
    # never leave a class without a validation sample
    train_counts = np.minimum(train_counts, counts - 1)
    train_idx, val_idx = [], []
    for c, tc in zip(classes, train_counts):
        members = np.flatnonzero(labels == c)
        members = members[rng.permutation(len(members))]
        train_idx.extend(members[:tc])
        val_idx.extend(members[tc:])
    return np.sort(np.array(train_idx, dtype=int)), np.sort(np.array(val_idx, dtype=int))


def _softmax(logits):
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def loss_and_grads(W, b, X, y):
    """Mean cross-entropy of the softmax head and its analytic gradients."""
    n = X.shape[0]
    probs = _softmax(X @ W.T + b)
    loss = float(-np.log(np.maximum(probs[np.arange(n), y], 1e-300)).mean())
    G = probs.copy()
    G[np.arange(n), y] -= 1.0
    G /= n
    return loss, G.T @ X, G.sum(axis=0)


def _val_loss(W, b, X, y):
    probs = _softmax(X @ W.T + b)
    return float(-np.log(np.maximum(probs[np.arange(len(y)), y], 1e-300)).mean())


def train_head(X_train, y_train, X_val, y_val, config: TrainConfig, n_classes=None, enforce_ranges=True):
    """Mini-batch training with Adam moments, bias correction, and decoupled
    weight decay; early stopping on validation loss; best-epoch weights kept."""
    if enforce_ranges:
        config.validate()
    X_train = np.asarray(X_train, dtype=np.float64)
    X_val = np.asarray(X_val, dtype=np.float64)
    y_train = np.asarray(y_train, dtype=int)
    y_val = np.asarray(y_val, dtype=int)
    if n_classes is None:
        n_classes = int(max(y_train.max(), y_val.max())) + 1
    present = np.unique(y_train)
    if len(present) < n_classes:
        missing = sorted(set(range(n_classes)) - set(present.tolist()))
        raise TrainError(f"classes {missing} absent from training split")
    d = X_train.shape[1]
    rng = np.random.Generator(np.random.PCG64(config.seed))
    W = np.zeros((n_classes, d))
    b = np.zeros(n_classes)
    mW = np.zeros_like(W)
    vW = np.zeros_like(W)
    mb = np.zeros_like(b)
    vb = np.zeros_like(b)
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    t = 0
    best = (np.inf, W.copy(), b.copy(), 0)
    bad_epochs = 0
    curve = []
    stopped = config.epochs
    for epoch in range(1, config.epochs + 1):
        perm = rng.permutation(len(X_train))
        for start in range(0, len(perm), config.batch_size):
            idx = perm[start : start + config.batch_size]
            loss, gW, gb = loss_and_grads(W, b, X_train[idx], y_train[idx])
            if not np.isfinite(loss):
                raise TrainError(f"diverged (non-finite loss) with config {config}")
            t += 1
            mW = beta1 * mW + (1 - beta1) * gW
            vW = beta2 * vW + (1 - beta2) * gW * gW
            mb = beta1 * mb + (1 - beta1) * gb
            vb = beta2 * vb + (1 - beta2) * gb * gb
            step = config.learning_rate * np.sqrt(1 - beta2**t) / (1 - beta1**t)
            W -= step * mW / (np.sqrt(vW) + eps)
            b -= step * mb / (np.sqrt(vb) + eps)
            W -= config.learning_rate * config.weight_decay * W
        vloss = _val_loss(W, b, X_val, y_val)
        curve.append(vloss)
        if vloss < best[0]:
            best = (vloss, W.copy(), b.copy(), epoch)
            bad_epochs = 0
        else:
            bad_epochs += 1
            if bad_epochs >= config.patience:
                stopped = epoch
                break
    head = LinearHead(best[1], best[2])
    val_scores = predict_scores(head, X_val)
    val_pred = val_scores.argmax(axis=1)
    report = classification_report(y_val.tolist(), val_pred.tolist(), val_scores, classes=list(range(n_classes)))
    return head, TrialResult(config=config, val_macro_f1=report.f1_macro, val_loss_curve=curve, stopped_epoch=stopped)


def predict_scores(head: LinearHead, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.shape[1] != head.W.shape[1]:
        raise TrainError(f"dim mismatch: X has {X.shape[1]}, head expects {head.W.shape[1]}")
    return _softmax(X @ head.W.T + head.b)


def random_search(X, labels, n_trials: int = 20, seed: int = 42, fraction: float = 0.8):
    """Seeded random search over the fixed hyperparameter ranges.

    One stratified split, frozen across trials; best trial by validation
    macro-F1 with earliest-trial tie break.
    """
    if n_trials < 1:
        raise TrainError("n_trials must be >= 1")
    X = np.asarray(X, dtype=np.float64)
    labels = np.asarray(labels)
    classes = sorted(np.unique(labels).tolist())
    class_idx = {c: i for i, c in enumerate(classes)}
    y = np.array([class_idx[c] for c in labels])
    ss = np.random.SeedSequence(seed)
    split_seed = int(ss.generate_state(1)[0])
    train_idx, val_idx = stratified_split(y, fraction=fraction, seed=split_seed)
    rng = np.random.Generator(np.random.PCG64(ss.spawn(1)[0]))
    trials: list[TrialResult] = []
    heads: list[LinearHead | None] = []
    for trial in range(n_trials):
        config = TrainConfig(
            learning_rate=float(10 ** rng.uniform(-6, -4)),
            batch_size=int(rng.choice(BATCH_CHOICES)),
            epochs=int(rng.integers(EPOCH_RANGE[0], EPOCH_RANGE[1] + 1)),
            seed=int(rng.integers(0, 2**31)),
        )
        try:
            head, result = train_head(X[train_idx], y[train_idx], X[val_idx], y[val_idx], config, n_classes=len(classes))
        except TrainError as e:
            log.warning("trial %d failed: %s", trial, e)
            trials.append(TrialResult(config=config, val_macro_f1=float("-inf")))
            heads.append(None)
            continue
        trials.append(result)
        heads.append(head)
    best_i = max(range(n_trials), key=lambda i: (trials[i].val_macro_f1, -i))
    if heads[best_i] is None:
        raise TrainError("all random-search trials failed")
    return heads[best_i], trials[best_i], trials, (train_idx, val_idx), classes
