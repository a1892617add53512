"""Synthetic cohort generator with planted group structure.

Patients fall into G groups whose feature centroids sit along a shared
direction at increasing magnitude, so groups are separable by Euclidean
distance but indistinguishable by cosine similarity.  Each group owns a
small drug set: three core drugs connected by complete synergy, one
optional drug synergy-linked to the cores, and one optional drug
antagonism-linked to them.  Remaining drugs are background with sparse
random interactions and rare adoption.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import Cohort, DdiEdge, DdiGraph, Drug, split_sizes
from .errors import ConfigError

N_CORE = 3


@dataclass
class SynthConfig:
    n_groups: int = 5
    patients_per_group: int = 40
    n_drugs: int = 40
    drugs_per_group: int = 5
    d1: int = 12  # patient feature dim
    d2: int = 10  # drug feature dim
    noise: float = 0.1
    spread: float = 4.0
    core_adoption: float = 0.95
    optional_adoption: float = 0.35
    background_adoption: float = 0.02
    background_density: float = 0.03  # random signed edges among background
    seed: int = 7

    def __post_init__(self):
        if self.n_groups * self.drugs_per_group > self.n_drugs:
            raise ConfigError(
                f"{self.n_groups} groups x {self.drugs_per_group} drugs "
                f"exceed {self.n_drugs} total drugs"
            )
        if self.drugs_per_group < 2:
            raise ConfigError("need at least two drugs per group")
        if not 0 < self.noise:
            raise ConfigError("noise must be positive")


@dataclass
class SynthTruth:
    """Planted ground truth kept out of the training artifacts."""

    group_of_patient: np.ndarray
    group_drugs: list  # per group: sorted list of drug ids
    core_drugs: list
    optional_syn: list  # O1 per group (or None)
    optional_ant: list  # O2 per group (or None)
    k_true: int = 0


def generate_cohort(config=None):
    """Returns (DdiGraph, Cohort-compatible raw arrays, SynthTruth).

    Output arrays: patient features (raw), medication matrix Y, and the
    drug graph with features and signed edges (zero edges not included;
    sample those separately before embedding training).
    """
    config = config or SynthConfig()
    rng = np.random.default_rng(config.seed)
    g, dpg = config.n_groups, config.drugs_per_group
    n_patients = g * config.patients_per_group
    n_drugs = config.n_drugs

    # --- drugs: group blocks first, background after -----------------
    group_drugs, core_drugs, opt_syn, opt_ant = [], [], [], []
    for j in range(g):
        ids = list(range(j * dpg, (j + 1) * dpg))
        group_drugs.append(ids)
        n_core = min(N_CORE, dpg)
        core_drugs.append(ids[:n_core])
        rest = ids[n_core:]
        opt_syn.append(rest[0] if len(rest) > 0 else None)
        opt_ant.append(rest[1] if len(rest) > 1 else None)

    # drug features: group signature + noise; background fully random
    z_raw = rng.normal(0.0, 1.0, size=(n_drugs, config.d2))
    signatures = rng.normal(0.0, 1.0, size=(g, config.d2))
    for j in range(g):
        for v in group_drugs[j]:
            z_raw[v] = signatures[j] + config.noise * rng.normal(size=config.d2)

    drugs = [Drug(v, f"drug-{v}", z_raw[v]) for v in range(n_drugs)]
    graph = DdiGraph(drugs)

    for j in range(g):
        cores = core_drugs[j]
        for a_idx, a in enumerate(cores):
            for b in cores[a_idx + 1 :]:
                graph.add_edge(DdiEdge(a, b, 1))
        if opt_syn[j] is not None:
            for a in cores:
                graph.add_edge(DdiEdge(opt_syn[j], a, 1))
        if opt_ant[j] is not None:
            for a in cores:
                graph.add_edge(DdiEdge(opt_ant[j], a, -1))

    background = list(range(g * dpg, n_drugs))
    for a_idx, a in enumerate(background):
        for b in background[a_idx + 1 :]:
            if rng.random() < config.background_density:
                sign = 1 if rng.random() < 0.5 else -1
                graph.add_edge(DdiEdge(a, b, sign))

    # --- patients ----------------------------------------------------
    direction = np.ones(config.d1) / np.sqrt(config.d1)
    centroids = np.outer(
        (np.arange(g) + 1.0) * config.spread, direction
    )
    group_of = np.repeat(np.arange(g), config.patients_per_group)
    x_raw = centroids[group_of] + config.noise * rng.normal(
        size=(n_patients, config.d1)
    )

    y = np.zeros((n_patients, n_drugs))
    for i in range(n_patients):
        j = group_of[i]
        for v in core_drugs[j]:
            if rng.random() < config.core_adoption:
                y[i, v] = 1.0
        for v in (opt_syn[j], opt_ant[j]):
            if v is not None and rng.random() < config.optional_adoption:
                y[i, v] = 1.0
        for v in background:
            if rng.random() < config.background_adoption:
                y[i, v] = 1.0
        if not y[i].any():  # guarantee at least one prescription
            y[i, core_drugs[j][0]] = 1.0

    truth = SynthTruth(group_of, group_drugs, core_drugs, opt_syn, opt_ant, g)
    return graph, x_raw, y, truth


def make_cohort(x_raw, y, split_ratio=(5, 3, 2), seed=0):
    """Wrap raw arrays into a standardized, split Cohort."""
    n = x_raw.shape[0]
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    n_train, n_val, _ = split_sizes(n, split_ratio)
    return Cohort(
        patient_ids=list(range(n)),
        x_raw=np.asarray(x_raw, dtype=np.float64),
        y=np.asarray(y, dtype=np.float64),
        train_idx=np.sort(perm[:n_train]),
        val_idx=np.sort(perm[n_train : n_train + n_val]),
        test_idx=np.sort(perm[n_train + n_val :]),
    )
