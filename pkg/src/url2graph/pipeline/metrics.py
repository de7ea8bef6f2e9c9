"""Binary detection metrics: confusion-based scores, rank AUC, TPR at fixed FPR."""

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

FPR_LEVELS = (0.1, 0.01, 0.001, 0.0001)


@dataclass
class Metrics:
    accuracy: float
    precision: float | None
    recall: float | None
    f1: float | None
    auc: float | None
    tpr_at_fpr: dict = field(default_factory=dict)
    confusion: dict = field(default_factory=dict)  # TP, FP, TN, FN
    threshold: float = 0.5

    def to_json(self):
        return {
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "auc": self.auc,
            "tpr_at_fpr": {repr(k): v for k, v in self.tpr_at_fpr.items()},
            "confusion": dict(self.confusion),
            "threshold": self.threshold,
        }


def auc(scores, labels):
    """Mann-Whitney AUC with tie-averaged ranks; None if a class is missing."""
    scores = np.asarray(scores, dtype=np.float64)
    pos = np.asarray(labels) == 1
    n_pos, n_neg = int(pos.sum()), int((~pos).sum())
    if n_pos == 0 or n_neg == 0:
        return None
    ranks = rankdata(scores, method="average")
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def roc_points(scores, labels):
    """(fpr, tpr) at every distinct threshold, descending, starting from (0, 0)."""
    scores = np.asarray(scores, dtype=np.float64)
    pos = np.asarray(labels) == 1
    order = np.argsort(-scores, kind="mergesort")
    s, y = scores[order], pos[order]
    tp = np.cumsum(y)
    fp = np.cumsum(~y)
    last = np.r_[np.flatnonzero(s[1:] != s[:-1]), len(s) - 1]
    n_pos, n_neg = max(int(pos.sum()), 1), max(int((~pos).sum()), 1)
    fpr = np.r_[0.0, fp[last] / n_neg]
    tpr = np.r_[0.0, tp[last] / n_pos]
    return fpr, tpr


def tpr_at_fpr(scores, labels, levels=FPR_LEVELS):
    """Best TPR among operating points whose FPR does not exceed each level."""
    labels = np.asarray(labels)
    if not (labels == 1).any() or not (labels != 1).any():
        raise ValueError("tpr_at_fpr needs both classes")
    fpr, tpr = roc_points(scores, labels)
    return {lvl: float(tpr[fpr <= lvl].max()) for lvl in levels}


def compute_metrics(scores, labels, threshold=0.5, levels=FPR_LEVELS):
    scores = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels) == 1
    pred = scores > threshold
    tp = int((pred & y).sum())
    fp = int((pred & ~y).sum())
    tn = int((~pred & ~y).sum())
    fn = int((~pred & y).sum())
    total = tp + fp + tn + fn
    precision = tp / (tp + fp) if tp + fp else None
    recall = tp / (tp + fn) if tp + fn else None
    f1 = None
    if precision is not None and recall is not None and precision + recall > 0:
        f1 = 2 * precision * recall / (precision + recall)
    both = y.any() and (~y).any()
    return Metrics(
        accuracy=(tp + tn) / total if total else 0.0,
        precision=precision,
        recall=recall,
        f1=f1,
        auc=auc(scores, y.astype(int)),
        tpr_at_fpr=tpr_at_fpr(scores, y.astype(int), levels) if both else {},
        confusion={"TP": tp, "FP": fp, "TN": tn, "FN": fn},
        threshold=threshold,
    )
