"""Treatment construction and counterfactual augmentation.

The treatment matrix starts from observed prescriptions, propagates links
within patient clusters, then along synergy edges.  For every training
pair we look up the nearest opposite-treatment pair within the distance
thresholds; its outcome becomes the counterfactual training target.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

KMEANS_MAX_ITER = 300


@dataclass
class ClusterAssignment:
    labels: np.ndarray  # cluster id per patient
    centroids: np.ndarray  # K x d1
    k: int

    def assign(self, x):
        """Nearest-centroid cluster ids for new feature rows."""
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        d = np.linalg.norm(x[:, None, :] - self.centroids[None, :, :], axis=2)
        return np.argmin(d, axis=1)


@dataclass
class CfConfig:
    gamma_p: float = None  # defaults to the 10th distance percentile
    gamma_d: float = None
    k: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError("cluster count must be >= 1")
        for g in (self.gamma_p, self.gamma_d):
            if g is not None and g <= 0:
                raise ConfigError("distance thresholds must be positive")


@dataclass
class TreatmentState:
    t: np.ndarray
    t_cf: np.ndarray
    y_cf: np.ndarray
    cf_pair: dict = field(default_factory=dict)  # (i, v) -> (j, u)
    clusters: ClusterAssignment = None

    def export_triplets(self, path):
        """Sparse triplet CSV of T / T_CF / Y_CF for audit."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["matrix", "patient", "drug", "value"])
            for name, m in (("T", self.t), ("T_CF", self.t_cf), ("Y_CF", self.y_cf)):
                for i, v in zip(*np.nonzero(m)):
                    w.writerow([name, int(i), int(v), int(m[i, v])])


def kmeans_cluster(x, k, seed=0):
    """Lloyd's iterations from k-means++ seeding, deterministic under seed.

    Runs to an assignment fixpoint or 300 iterations; an emptied cluster
    is re-seeded at the point farthest from its centroid.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    if k > n:
        raise ConfigError(f"k={k} exceeds {n} points")
    rng = np.random.default_rng(seed)

    # k-means++ seeding
    centroids = np.empty((k, x.shape[1]))
    centroids[0] = x[rng.integers(n)]
    closest = np.linalg.norm(x - centroids[0], axis=1) ** 2
    for j in range(1, k):
        total = closest.sum()
        if total <= 0:
            centroids[j] = x[rng.integers(n)]
        else:
            probs = closest / total
            centroids[j] = x[rng.choice(n, p=probs)]
        closest = np.minimum(closest, np.linalg.norm(x - centroids[j], axis=1) ** 2)

    labels = np.full(n, -1)
    for _ in range(KMEANS_MAX_ITER):
        d = np.linalg.norm(x[:, None, :] - centroids[None, :, :], axis=2)
        new_labels = np.argmin(d, axis=1)
        for j in range(k):
            members = new_labels == j
            if members.any():
                centroids[j] = x[members].mean(axis=0)
            else:
                far = int(np.argmax(np.min(d, axis=1)))
                centroids[j] = x[far]
                new_labels[far] = j
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
    return ClusterAssignment(labels, centroids, k)


def kmeans_objective(x, assignment):
    """Within-cluster sum of squares for a given assignment."""
    total = 0.0
    for j in range(assignment.k):
        members = x[assignment.labels == j]
        if len(members):
            total += ((members - members.mean(axis=0)) ** 2).sum()
    return total


def build_treatment_matrix(y, labels, ddi_graph):
    """Three sequential passes: observed links, cluster spread, synergy spread.

    ``y`` is the observed medication matrix for the patients being treated
    (rows align with ``labels``).
    """
    t = (np.asarray(y) > 0).astype(np.float64)
    labels = np.asarray(labels)
    # step 2: share links across each cluster
    for c in np.unique(labels):
        members = labels == c
        if members.any():
            covered = t[members].max(axis=0)
            t[members] = np.maximum(t[members], covered)
    # step 3: extend along synergy edges
    syn = ddi_graph.adjacency_by_sign()[1]
    base = t.copy()
    for v in range(ddi_graph.n_drugs):
        for u in syn[v]:
            t[:, u] = np.maximum(t[:, u], base[:, v])
    return t


def default_gammas(x, z, percentile=10.0):
    """Distance thresholds at the given percentile of pairwise distances."""
    def pct(feats):
        feats = np.asarray(feats, dtype=np.float64)
        n = feats.shape[0]
        if n < 2:
            return 1.0
        d = np.linalg.norm(feats[:, None, :] - feats[None, :, :], axis=2)
        vals = d[np.triu_indices(n, k=1)]
        v = float(np.percentile(vals, percentile))
        return v if v > 0 else float(vals.max() or 1.0)

    return pct(x), pct(z)


def find_counterfactual_link(i, v, t, x, z, gamma_p, gamma_d):
    """Nearest pair (j, u) with T_ju = 1 - T_iv within both thresholds.

    Distance is Euclidean on the provided feature rows; ties break on the
    smallest (j, u) lexicographically.  Returns None when infeasible.
    """
    x = np.asarray(x, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    dp = np.linalg.norm(x - x[i], axis=1)
    dd = np.linalg.norm(z - z[v], axis=1)
    want = 1.0 - t[i, v]
    feasible = (t == want) & (dp[:, None] < gamma_p) & (dd[None, :] < gamma_d)
    if not feasible.any():
        return None
    cost = dp[:, None] + dd[None, :]
    cost = np.where(feasible, cost, np.inf)
    flat = int(np.argmin(cost))  # first flat index = lexicographic tie-break
    return (flat // t.shape[1], flat % t.shape[1])


def find_all_counterfactual_links(t, x, z, gamma_p, gamma_d):
    """Vectorized matching for every (patient, drug) pair in one pass."""
    x = np.asarray(x, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    n, nv = t.shape
    dp = np.linalg.norm(x[:, None, :] - x[None, :, :], axis=2)
    dd = np.linalg.norm(z[:, None, :] - z[None, :, :], axis=2)
    p_ok = dp < gamma_p
    d_ok = dd < gamma_d
    matches = {}
    for i in range(n):
        for v in range(nv):
            want = 1.0 - t[i, v]
            feasible = (t == want) & p_ok[i][:, None] & d_ok[v][None, :]
            if not feasible.any():
                continue
            cost = np.where(feasible, dp[i][:, None] + dd[v][None, :], np.inf)
            flat = int(np.argmin(cost))
            matches[(i, v)] = (flat // nv, flat % nv)
    return matches


def build_counterfactual_outcomes(t, y, matches):
    """Apply matched outcomes; unmatched entries copy the factual data."""
    t_cf = t.copy()
    y_cf = (np.asarray(y) > 0).astype(np.float64)
    for (i, v), (j, u) in matches.items():
        t_cf[i, v] = 1.0 - t[i, v]
        y_cf[i, v] = y[j, u]
    return t_cf, y_cf


def build_treatment_state(cohort, ddi_graph, config):
    """Full construction over the training split of a cohort."""
    x_all = cohort.x
    clusters = kmeans_cluster(x_all, config.k, seed=config.seed)
    train = cohort.train_idx
    y_train = cohort.y[train]
    t = build_treatment_matrix(y_train, clusters.labels[train], ddi_graph)
    gamma_p, gamma_d = config.gamma_p, config.gamma_d
    if gamma_p is None or gamma_d is None:
        gp, gd = default_gammas(cohort.x[train], ddi_graph.feature_matrix())
        gamma_p = gamma_p if gamma_p is not None else gp
        gamma_d = gamma_d if gamma_d is not None else gd
    matches = find_all_counterfactual_links(
        t, cohort.x[train], ddi_graph.feature_matrix(), gamma_p, gamma_d
    )
    t_cf, y_cf = build_counterfactual_outcomes(t, y_train, matches)
    state = TreatmentState(t, t_cf, y_cf, matches, clusters)
    state.gamma_p = gamma_p
    state.gamma_d = gamma_d
    return state


def inference_treatments(x_new, clusters, y_train, train_labels, ddi_graph):
    """Treatment row for unseen patients: cluster spread then synergy spread."""
    cids = clusters.assign(x_new)
    rows = np.zeros((len(cids), ddi_graph.n_drugs))
    train_labels = np.asarray(train_labels)
    syn = ddi_graph.adjacency_by_sign()[1]
    for r, c in enumerate(cids):
        members = train_labels == c
        if members.any():
            rows[r] = (y_train[members].max(axis=0) > 0).astype(np.float64)
        base = rows[r].copy()
        for v in np.flatnonzero(base):
            for u in syn[v]:
                rows[r, u] = 1.0
    return rows
