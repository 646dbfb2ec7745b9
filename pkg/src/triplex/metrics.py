"""Clustering and classification metrics, implemented from their definitions."""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

import numpy as np


class MetricError(Exception):
    pass


def _contingency(true_labels, pred_labels):
    """(joint, row, col) Counters; plain dicts keep the sweep's tight metric
    loops free of per-call numpy dispatch overhead."""
    if len(true_labels) != len(pred_labels):
        raise MetricError(f"label length mismatch: {len(true_labels)} vs {len(pred_labels)}")
    if len(true_labels) < 2:
        raise MetricError("need at least 2 samples")
    t = true_labels.tolist() if isinstance(true_labels, np.ndarray) else list(true_labels)
    p = pred_labels.tolist() if isinstance(pred_labels, np.ndarray) else list(pred_labels)
    return Counter(zip(t, p)), Counter(t), Counter(p)


def _comb2(x: float) -> float:
    return x * (x - 1.0) / 2.0


def ari(true_labels, pred_labels) -> float:
    """Adjusted Rand index via pair counting on the contingency table."""
    joint, row, col = _contingency(true_labels, pred_labels)
    n = len(true_labels)
    sum_nij = sum(_comb2(c) for c in joint.values())
    sum_a = sum(_comb2(c) for c in row.values())
    sum_b = sum(_comb2(c) for c in col.values())
    total = _comb2(n)
    expected = sum_a * sum_b / total
    max_index = (sum_a + sum_b) / 2.0
    if max_index == expected:
        # both partitions degenerate; identical pair structure counts as agreement
        return 1.0 if sum_nij == sum_a == sum_b else 0.0
    return float((sum_nij - expected) / (max_index - expected))


def nmi(true_labels, pred_labels) -> float:
    """Mutual information normalized by the arithmetic mean of the entropies."""
    joint, row, col = _contingency(true_labels, pred_labels)
    n = len(true_labels)
    h_t = -sum(c / n * math.log(c / n) for c in row.values())
    h_p = -sum(c / n * math.log(c / n) for c in col.values())
    if h_t == 0.0 and h_p == 0.0:
        return 1.0
    if h_t == 0.0 or h_p == 0.0:
        return 0.0
    mi = sum(c / n * math.log(c * n / (row[t] * col[p])) for (t, p), c in joint.items())
    return float(min(1.0, max(0.0, mi / ((h_t + h_p) / 2.0))))


def pairwise_distances(X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    sq = (X * X).sum(axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (X @ X.T)
    np.clip(d2, 0.0, None, out=d2)
    np.fill_diagonal(d2, 0.0)
    return np.sqrt(d2)


def silhouette(X, labels) -> float:
    """Mean silhouette coefficient; singleton-cluster points score 0."""
    labels = np.asarray(labels)
    uniq = np.unique(labels)
    if uniq.size < 2:
        raise MetricError("silhouette undefined for a single cluster")
    D = pairwise_distances(np.asarray(X, dtype=np.float64))
    n = len(labels)
    masks = {c: labels == c for c in uniq}
    sizes = {c: int(m.sum()) for c, m in masks.items()}
    s = np.zeros(n)
    for i in range(n):
        own = labels[i]
        if sizes[own] == 1:
            s[i] = 0.0
            continue
        a = D[i][masks[own]].sum() / (sizes[own] - 1)
        b = min(D[i][masks[c]].mean() for c in uniq if c != own)
        denom = max(a, b)
        s[i] = 0.0 if denom == 0.0 else (b - a) / denom
    return float(s.mean())


@dataclass(frozen=True)
class ConfusionMatrix:
    classes: tuple
    counts: np.ndarray  # rows = true, cols = pred

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def confusion_matrix(true_labels, pred_labels, classes) -> ConfusionMatrix:
    index = {c: i for i, c in enumerate(classes)}
    counts = np.zeros((len(classes), len(classes)), dtype=np.int64)
    for t, p in zip(true_labels, pred_labels):
        if t not in index:
            raise MetricError(f"true label {t!r} not in class set")
        if p not in index:
            raise MetricError(f"predicted label {p!r} not in class set")
        counts[index[t], index[p]] += 1
    return ConfusionMatrix(tuple(classes), counts)


def cohen_kappa(cm: ConfusionMatrix) -> float:
    n = cm.total
    po = float(np.trace(cm.counts)) / n
    pe = float((cm.counts.sum(axis=1) * cm.counts.sum(axis=0)).sum()) / (n * n)
    if pe == 1.0:
        return 1.0 if po == 1.0 else 0.0
    return (po - pe) / (1.0 - pe)


def matthews_corrcoef(cm: ConfusionMatrix) -> float:
    """Generalized multiclass MCC from the confusion matrix."""
    C = cm.counts.astype(np.float64)
    t = C.sum(axis=1)  # true per class
    p = C.sum(axis=0)  # predicted per class
    n = C.sum()
    cov = float(np.trace(C)) * n - float(p @ t)
    denom = np.sqrt(n * n - float(p @ p)) * np.sqrt(n * n - float(t @ t))
    return 0.0 if denom == 0.0 else cov / denom


def _midranks(x: np.ndarray) -> np.ndarray:
    order = np.argsort(x, kind="mergesort")
    ranks = np.empty(len(x), dtype=np.float64)
    i = 0
    while i < len(x):
        j = i
        while j + 1 < len(x) and x[order[j + 1]] == x[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def roc_auc_ovr_macro(true_idx, scores) -> float:
    """One-vs-rest AUC per class (midrank tie handling), macro-averaged over
    classes present in the truth."""
    true_idx = np.asarray(true_idx)
    scores = np.asarray(scores, dtype=np.float64)
    aucs = []
    for c in np.unique(true_idx):
        pos = true_idx == c
        n_pos, n_neg = int(pos.sum()), int((~pos).sum())
        if n_pos == 0 or n_neg == 0:
            continue
        ranks = _midranks(scores[:, c])
        auc = (ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)
        aucs.append(auc)
    if not aucs:
        raise MetricError("ROC-AUC undefined: need at least two classes in truth")
    return float(np.mean(aucs))


def top_k_accuracy(true_idx, scores, k: int = 3) -> float:
    """Fraction of rows whose true class is among the k best scores.

    Ties prefer the lower class index, matching the documented convention.
    """
    true_idx = np.asarray(true_idx)
    scores = np.asarray(scores, dtype=np.float64)
    n, n_classes = scores.shape
    if k > n_classes:
        raise MetricError(f"k={k} exceeds class count {n_classes}")
    hits = 0
    for i in range(n):
        # stable sort on negated scores keeps the lowest class index first on ties
        top = np.argsort(-scores[i], kind="mergesort")[:k]
        if true_idx[i] in top:
            hits += 1
    return hits / n


@dataclass(frozen=True)
class MetricReport:
    accuracy: float
    f1_macro: float
    f1_weighted: float
    precision_macro: float
    precision_weighted: float
    recall_macro: float
    recall_weighted: float
    kappa: float
    mcc: float
    top3_accuracy: float
    roc_auc_macro: float

    CSV_COLUMNS = ("acc", "f1_m", "f1_w", "p_m", "p_w", "r_m", "r_w", "kappa", "mcc", "top3_acc", "roc")

    def to_row(self) -> list[float]:
        return [
            self.accuracy,
            self.f1_macro,
            self.f1_weighted,
            self.precision_macro,
            self.precision_weighted,
            self.recall_macro,
            self.recall_weighted,
            self.kappa,
            self.mcc,
            self.top3_accuracy,
            self.roc_auc_macro,
        ]


def classification_report(true_labels, pred_labels, scores, classes=None, top_k: int = 3) -> MetricReport:
    """Full Table-2 metric suite from labels and an n x C score matrix."""
    true_labels = list(true_labels)
    pred_labels = list(pred_labels)
    if classes is None:
        classes = sorted(set(true_labels))
    classes = list(classes)
    scores = np.asarray(scores, dtype=np.float64)
    if scores.shape != (len(true_labels), len(classes)):
        raise MetricError(f"scores shape {scores.shape} != ({len(true_labels)}, {len(classes)})")
    cm = confusion_matrix(true_labels, pred_labels, classes)
    C = cm.counts.astype(np.float64)
    n = C.sum()
    tp = np.diag(C)
    support = C.sum(axis=1)
    predicted = C.sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        precision = np.where(predicted > 0, tp / np.where(predicted > 0, predicted, 1), 0.0)
        recall = np.where(support > 0, tp / np.where(support > 0, support, 1), 0.0)
        pr = precision + recall
        f1 = np.where(pr > 0, 2 * precision * recall / np.where(pr > 0, pr, 1), 0.0)
    weights = support / n
    index = {c: i for i, c in enumerate(classes)}
    true_idx = np.array([index[t] for t in true_labels])
    top_k_eff = min(top_k, len(classes))
    return MetricReport(
        accuracy=float(tp.sum() / n),
        f1_macro=float(f1.mean()),
        f1_weighted=float((f1 * weights).sum()),
        precision_macro=float(precision.mean()),
        precision_weighted=float((precision * weights).sum()),
        recall_macro=float(recall.mean()),
        recall_weighted=float((recall * weights).sum()),
        kappa=float(cohen_kappa(cm)),
        mcc=float(matthews_corrcoef(cm)),
        top3_accuracy=float(top_k_accuracy(true_idx, scores, k=top_k_eff)),
        roc_auc_macro=float(roc_auc_ovr_macro(true_idx, scores)),
    )
