"""Ranking metrics for top-k suggestion lists.

Precision/recall are micro-averaged over the batch (summed hits over
summed denominators); NDCG is macro-averaged per patient with the ideal
DCG truncated at min(|relevant|, k).
"""

from __future__ import annotations

import warnings

import numpy as np

from .errors import ConfigError

__all__ = ["precision_at_k", "recall_at_k", "ndcg_at_k", "ranking_report"]


def _validate(suggestions, relevant, k):
    if k < 1:
        raise ConfigError("k must be >= 1")
    if len(suggestions) != len(relevant):
        raise ConfigError("suggestions and relevant sets must align")
    if not suggestions:
        raise ConfigError("empty evaluation batch")


def _usable(suggestions, relevant, metric):
    kept = []
    skipped = 0
    for s, r in zip(suggestions, relevant):
        if len(r) == 0:
            skipped += 1
            continue
        kept.append((list(s), set(r)))
    if skipped:
        warnings.warn(
            f"{metric}: skipped {skipped} patients with no relevant drugs",
            stacklevel=3,
        )
    if not kept:
        raise ConfigError("no patients with relevant drugs to evaluate")
    return kept


def precision_at_k(suggestions, relevant, k):
    """Micro-averaged fraction of suggested drugs that are relevant."""
    _validate(suggestions, relevant, k)
    kept = _usable(suggestions, relevant, "precision")
    hits = sum(len(set(s[:k]) & r) for s, r in kept)
    return hits / (k * len(kept))


def recall_at_k(suggestions, relevant, k):
    """Micro-averaged fraction of relevant drugs that were suggested."""
    _validate(suggestions, relevant, k)
    kept = _usable(suggestions, relevant, "recall")
    hits = sum(len(set(s[:k]) & r) for s, r in kept)
    total = sum(len(r) for _, r in kept)
    return hits / total


def ndcg_at_k(suggestions, relevant, k):
    """Macro-averaged NDCG with gains (2^rel - 1) / log2(rank + 1)."""
    _validate(suggestions, relevant, k)
    kept = _usable(suggestions, relevant, "ndcg")
    scores = []
    for s, r in kept:
        dcg = sum(
            1.0 / np.log2(rank + 2.0)
            for rank, drug in enumerate(s[:k])
            if drug in r
        )
        ideal = min(len(r), k)
        idcg = sum(1.0 / np.log2(rank + 2.0) for rank in range(ideal))
        scores.append(dcg / idcg)
    return float(np.mean(scores))


def ranking_report(suggestions, relevant, ks):
    """All three metrics at each cutoff, as {(metric, k): value}."""
    out = {}
    for k in ks:
        out[("precision", k)] = precision_at_k(suggestions, relevant, k)
        out[("recall", k)] = recall_at_k(suggestions, relevant, k)
        out[("ndcg", k)] = ndcg_at_k(suggestions, relevant, k)
    return out
