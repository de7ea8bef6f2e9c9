"""Report figures written next to the JSON/TSV outputs."""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .pipeline.metrics import roc_points  # noqa: E402

RC = {
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
}


def _save(fig, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path)
    plt.close(fig)
    return path


def roc_figure(scores, labels, path, title="ROC"):
    """Log-x ROC so the low-FPR operating points are visible."""
    fpr, tpr = roc_points(scores, labels)
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(4.2, 3.4))
        x = np.clip(fpr, 1e-5, 1)
        ax.step(x, tpr, where="post", color="C0")
        for lvl in (1e-4, 1e-3, 1e-2, 1e-1):
            ax.axvline(lvl, color="0.7", lw=0.6, ls=":")
        ax.set_xscale("log")
        ax.set_xlim(1e-5, 1)
        ax.set_ylim(0, 1.02)
        ax.set_xlabel("false positive rate")
        ax.set_ylabel("true positive rate")
        ax.set_title(title)
        return _save(fig, path)


def history_figure(history, path):
    epochs = [h["epoch"] for h in history]
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(4.2, 3.0))
        ax.plot(epochs, [h["train_loss"] for h in history], "o-", label="train loss", ms=3)
        ax.plot(epochs, [h["val_loss"] for h in history], "s-", label="val loss", ms=3)
        ax.set_xlabel("epoch")
        ax.set_ylabel("cross-entropy")
        ax2 = ax.twinx()
        ax2.plot(epochs, [h["val_auc"] if h["val_auc"] is not None else np.nan for h in history],
                 "^--", color="C2", label="val AUC", ms=3)
        ax2.set_ylabel("AUC")
        ax2.grid(False)
        lines = ax.get_lines() + ax2.get_lines()
        ax.legend(lines, [ln.get_label() for ln in lines], loc="center right", frameon=False)
        return _save(fig, path)


def length_histogram_figure(stats, path, bucket=10):
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(4.8, 3.0))
        for i, (name, hist) in enumerate(stats.length_histogram.items()):
            if not hist:
                continue
            xs = np.array(sorted(hist))
            ys = np.array([hist[x] for x in xs], dtype=float)
            ax.bar(xs + i * bucket / (len(stats.length_histogram) + 1), ys / ys.sum(),
                   width=bucket / (len(stats.length_histogram) + 1), align="edge", label=name)
        ax.set_xlabel("URL length (characters)")
        ax.set_ylabel("fraction of class")
        ax.legend(frameon=False)
        return _save(fig, path)


def gate_figure(alphas, labels, path, class_names=("benign", "malicious")):
    """Mean gate weight per view, split by class."""
    alphas = np.asarray(alphas)
    labels = np.asarray(labels)
    views = ["semantic", "word graph", "char graph"]
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(4.2, 3.0))
        width = 0.8 / max(len(class_names), 1)
        for c, name in enumerate(class_names):
            sel = alphas[labels == c]
            if not len(sel):
                continue
            ax.bar(np.arange(3) + c * width, sel.mean(axis=0), width=width, yerr=sel.std(axis=0),
                   capsize=2, label=name)
        ax.set_xticks(np.arange(3) + width * (len(class_names) - 1) / 2)
        ax.set_xticklabels(views)
        ax.set_ylabel("mean gate weight")
        ax.set_ylim(0, 1)
        ax.legend(frameon=False)
        return _save(fig, path)
