"""End-to-end orchestration: embeddings, causal state, recommender, eval.

A run writes a metrics CSV (``metric,k,value``) plus a JSON manifest
with every stage seed and content hashes of the key artifacts, so two
runs with the same config are byte-comparable.
"""

from __future__ import annotations

import csv
import hashlib
import json
import time
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from . import community, metrics
from .causal import CfConfig, build_treatment_state
from .data import sample_zero_edges
from .ddinet import DdigcnConfig, train_ddigcn
from .recommender import TrainConfig, train_mdgcn, suggest_top_k
from .synth import SynthConfig, generate_cohort, make_cohort

EVAL_KS = (1, 2, 3, 4, 5, 6)
SS_KS = (2, 3, 4, 5, 6)


@dataclass
class PipelineConfig:
    synth: SynthConfig = field(default_factory=SynthConfig)
    ddigcn: DdigcnConfig = field(default_factory=DdigcnConfig)
    cf: CfConfig = field(default_factory=lambda: CfConfig(k=5))
    train: TrainConfig = field(default_factory=TrainConfig)
    split_seed: int = 0
    zero_edge_seed: int = 0
    ss_alpha: float = 0.5


def _hash_array(a):
    return hashlib.sha256(
        np.ascontiguousarray(np.asarray(a, dtype=np.float64)).tobytes()
    ).hexdigest()


def _hash_file(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@dataclass
class RunManifest:
    seeds: dict
    hashes: dict
    config: dict
    wall_seconds: float = 0.0

    def save(self, path):
        Path(path).write_text(json.dumps(asdict(self), indent=2, sort_keys=True))


@dataclass
class PipelineResult:
    graph: object
    cohort: object
    treatment_state: object
    ddi_result: object
    bundle: object
    metrics: dict  # (metric, k) -> value
    manifest: RunManifest
    suggestions: dict  # test patient index -> ranked drug ids


def usersim_baseline(cohort, k):
    """Cosine-similarity neighborhood scores from the training cohort."""
    x_o = cohort.x[cohort.train_idx]
    y_o = cohort.y[cohort.train_idx]
    x_u = cohort.x[cohort.test_idx]

    def unit(m):
        norms = np.linalg.norm(m, axis=1, keepdims=True)
        return m / np.where(norms > 0, norms, 1.0)

    sim = unit(x_u) @ unit(x_o).T
    scores = sim @ y_o
    out = []
    for row in scores:
        order = np.lexsort((np.arange(len(row)), -row))
        out.append([int(v) for v in order[:k]])
    return out


def evaluate_split(bundle, cohort, graph, split_idx, ks=EVAL_KS):
    """Ranked suggestions + metric table over a patient index split."""
    k_max = max(ks)
    suggestions, relevant = [], []
    for i in split_idx:
        ranked = suggest_top_k(cohort.x_raw[i], k_max, bundle, graph)
        suggestions.append([v for v, _ in ranked])
        relevant.append(set(int(v) for v in np.flatnonzero(cohort.y[i])))
    table = metrics.ranking_report(suggestions, relevant, ks)
    return suggestions, relevant, table


def ss_at_k(graph, suggestions, ks=SS_KS, alpha=0.5):
    """Mean suggestion satisfaction of each top-k prefix over patients."""
    out = {}
    for k in ks:
        vals = []
        for s in suggestions:
            sub = community.explain_suggestion(graph, s[:k], alpha=alpha)
            if sub.ss is not None:
                vals.append(sub.ss)
        out[("ss", k)] = float(np.mean(vals)) if vals else 0.0
    return out


def write_metrics_csv(path, table):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["metric", "k", "value"])
        for (name, k) in sorted(table):
            w.writerow([name, k, repr(table[(name, k)])])


def run_training_pipeline(config=None, out_dir=None):
    """Generate data, train every stage, evaluate on the test split."""
    config = config or PipelineConfig()
    t0 = time.time()

    graph, x_raw, y, truth = generate_cohort(config.synth)
    cohort = make_cohort(x_raw, y, seed=config.split_seed)
    sample_zero_edges(graph, seed=config.zero_edge_seed)

    ddi_result = train_ddigcn(graph, config.ddigcn)
    state = build_treatment_state(cohort, graph, config.cf)
    bundle = train_mdgcn(
        cohort, state, ddi_result.embeddings.z, graph.feature_matrix(), config.train
    )

    suggestions, relevant, table = evaluate_split(
        bundle, cohort, graph, cohort.test_idx
    )
    table.update(ss_at_k(graph, suggestions, alpha=config.ss_alpha))

    manifest = RunManifest(
        seeds={
            "synth": config.synth.seed,
            "split": config.split_seed,
            "zero_edges": config.zero_edge_seed,
            "ddigcn": config.ddigcn.seed,
            "kmeans": config.cf.seed,
            "mdgcn": config.train.seed,
        },
        hashes={
            "x_raw": _hash_array(x_raw),
            "y": _hash_array(y),
            "ddi_embeddings": _hash_array(ddi_result.embeddings.z),
            "treatment": _hash_array(state.t),
            "drug_repr": _hash_array(bundle.drug_repr),
            "metrics": hashlib.sha256(
                json.dumps(
                    {f"{m}@{k}": table[(m, k)] for m, k in sorted(table)},
                    sort_keys=True,
                ).encode()
            ).hexdigest(),
        },
        config={
            "delta": config.train.delta,
            "use_ddi": config.train.use_ddi,
            "backbone": config.ddigcn.backbone,
            "epochs_ddigcn": config.ddigcn.epochs,
            "epochs_mdgcn": config.train.epochs,
            "clusters": config.cf.k,
        },
        wall_seconds=time.time() - t0,
    )

    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        write_metrics_csv(out_dir / "metrics.csv", table)
        manifest.hashes["metrics_csv"] = _hash_file(out_dir / "metrics.csv")
        manifest.save(out_dir / "manifest.json")
        bundle.save(out_dir / "model.npz")
        graph.save(out_dir / "drugs.csv", out_dir / "ddi_edges.csv")
        cohort.save(out_dir)
        state.export_triplets(out_dir / "treatments.csv")

    return PipelineResult(
        graph=graph,
        cohort=cohort,
        treatment_state=state,
        ddi_result=ddi_result,
        bundle=bundle,
        metrics=table,
        manifest=manifest,
        suggestions={
            int(i): s for i, s in zip(cohort.test_idx, suggestions)
        },
    )


def usersim_metrics(cohort, ks=EVAL_KS):
    """Metric table for the cosine-similarity baseline on the test split."""
    k_max = max(ks)
    suggestions = usersim_baseline(cohort, k_max)
    relevant = [
        set(int(v) for v in np.flatnonzero(cohort.y[i])) for i in cohort.test_idx
    ]
    return metrics.ranking_report(suggestions, relevant, ks)
