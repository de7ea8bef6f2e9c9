"""Artifact building, the training loop, evaluation and prediction."""

import logging
import time

import numpy as np

from .. import autodiff as ad
from ..errors import ArtifactError, EmptyDatasetError
from ..fusion import Artifacts, ModelParams, batch_loss, model_forward
from ..tokenizer import ALPHABET_SIZE, char_surface, encode_chars, encode_subwords, train_subword_vocab
from ..urlgraph import build_global_graph, count_cooccurrences
from .checkpoint import Checkpoint
from .metrics import compute_metrics

log = logging.getLogger(__name__)

EVAL_BATCH = 128


def build_vocab(dataset, cfg):
    return train_subword_vocab(dataset.urls, cfg.vocab_size, cfg.min_freq)


def build_graphs(dataset, vocab, cfg):
    """Word and char NPMI graphs from the given (training) records only."""
    word_stats = count_cooccurrences(
        [encode_subwords(u, vocab, cfg.max_subword_len).ids for u in dataset.urls], len(vocab))
    char_stats = count_cooccurrences([encode_chars(u, cfg.max_char_len).ids for u in dataset.urls], ALPHABET_SIZE)
    g_word = build_global_graph(word_stats, cfg.theta_word, "word", cfg.min_pair_count, vocab.surface)
    g_char = build_global_graph(char_stats, cfg.theta_char, "char", cfg.min_pair_count, char_surface)
    return g_word, g_char


def build_artifacts(dataset, cfg):
    vocab = build_vocab(dataset, cfg)
    g_word, g_char = build_graphs(dataset, vocab, cfg)
    return Artifacts(vocab, g_word, g_char, cfg.max_subword_len, cfg.max_char_len)


def score(params, artifacts, urls, positive=1, batch_size=EVAL_BATCH, traces=False):
    """Positive-class probability per URL (and full rows / traces if asked)."""
    rows, trace_out = [], []
    with ad.no_grad():
        for i in range(0, len(urls), batch_size):
            probs, tr = model_forward(urls[i:i + batch_size], artifacts, params, traces=traces)
            rows.append(probs.data)
            if traces:
                trace_out.extend(tr)
    probs = np.vstack(rows) if rows else np.zeros((0, params.num_classes))
    return probs[:, positive], probs, trace_out


def _class_weights(labels, C):
    counts = np.bincount(labels, minlength=C).astype(np.float64)
    return np.where(counts > 0, len(labels) / (C * np.maximum(counts, 1)), 0.0)


def _selection_key(m, val_loss):
    return m.auc if m.auc is not None else -val_loss


def train(train_set, val_set, cfg, artifacts=None, artifact_paths=None, on_epoch=None):
    """Minibatch Adam on the mean cross-entropy with best-validation-AUC early stopping.

    Returns (Checkpoint holding the best epoch's parameters, history).
    """
    if not len(train_set):
        raise EmptyDatasetError("empty training set")
    if artifacts is None:
        artifacts = build_artifacts(train_set, cfg)
    C = len(train_set.class_names)
    params = ModelParams.init(cfg.encoder(), len(artifacts.vocab), C, seed=cfg.seed)
    if cfg.freeze_semantic:
        params.freeze("semantic")
    trainable = params.trainable()
    state = ad.AdamState(lr=cfg.lr)
    urls = train_set.urls
    labels = train_set.labels
    weights = _class_weights(labels, C) if cfg.class_weighting else None
    val_urls, val_labels = (val_set.urls, val_set.labels) if val_set is not None and len(val_set) else (urls, labels)

    history = []
    best_key, best_snapshot, stale = -np.inf, None, 0
    for epoch in range(cfg.epochs):
        t0 = time.perf_counter()
        order = np.random.default_rng([cfg.seed, epoch]).permutation(len(urls))
        losses = []
        for i in range(0, len(order), cfg.batch_size):
            idx = order[i:i + cfg.batch_size]
            trainable.zero_grad()
            probs, _ = model_forward([urls[j] for j in idx], artifacts, params)
            loss = batch_loss(probs, labels[idx], weights)
            ad.backward(loss)
            ad.adam_step(trainable, state)
            losses.append(float(loss.data) * len(idx))
        train_loss = sum(losses) / len(urls)
        vscores, vprobs, _ = score(params, artifacts, val_urls)
        vloss = float(ad.cross_entropy(ad.Tensor(vprobs), val_labels).data)
        m = compute_metrics(vscores, val_labels)
        key = _selection_key(m, vloss)
        improved = key > best_key
        if improved:
            best_key, stale = key, 0
            best_snapshot = {n: t.data.copy() for n, t in params.named_tensors().items()}
        else:
            stale += 1
        rec = {"epoch": epoch, "train_loss": train_loss, "val_loss": vloss, "val_auc": m.auc,
               "val_accuracy": m.accuracy, "improved": improved, "seconds": time.perf_counter() - t0}
        history.append(rec)
        log.info("epoch %d loss %.4f val_auc %s val_acc %.4f", epoch, train_loss, m.auc, m.accuracy)
        if on_epoch is not None:
            on_epoch(rec)
        if stale >= max(cfg.patience, 1):
            break
    for n, t in params.named_tensors().items():
        t.data = best_snapshot[n]
    ckpt = Checkpoint(cfg, params, artifacts, tuple(train_set.class_names), 1, dict(artifact_paths or {}))
    return ckpt, history


def evaluate(ckpt, test_set, traces=False):
    if not len(test_set):
        raise EmptyDatasetError("empty test set")
    if tuple(test_set.class_names) != tuple(ckpt.class_names):
        raise ArtifactError(f"test classes {test_set.class_names} differ from model classes {ckpt.class_names}")
    scores, _, tr = score(ckpt.params, ckpt.artifacts, test_set.urls, ckpt.positive_class, traces=traces)
    labels = (test_set.labels == ckpt.positive_class).astype(int)
    m = compute_metrics(scores, labels)
    return (m, scores, tr) if traces else m


def predict(ckpt, urls):
    """Per-URL (score, label, alpha) with label = argmax of the probability row."""
    scores, probs, tr = score(ckpt.params, ckpt.artifacts, list(urls), ckpt.positive_class, traces=True)
    return [(float(s), int(np.argmax(p)), t.alpha.copy()) for s, p, t in zip(scores, probs, tr)]
