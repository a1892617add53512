"""Command line entry points.

Defaults can come from a JSON config file via ``--config`` or the
``MEDREC_CONFIG`` environment variable; explicit flags win.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import community
from .causal import CfConfig
from .data import Cohort, load_ddi_graph
from .ddinet import DdigcnConfig
from .errors import MedrecError
from .pipeline import (
    PipelineConfig,
    run_training_pipeline,
    usersim_metrics,
    write_metrics_csv,
)
from .recommender import ModelBundle, TrainConfig, suggest_top_k
from .synth import SynthConfig, generate_cohort, make_cohort


def _load_config_defaults(path):
    if not path:
        return {}
    return json.loads(Path(path).read_text())


def _pipeline_config(args, defaults):
    def get(name, fallback):
        return getattr(args, name, None) if getattr(args, name, None) is not None \
            else defaults.get(name, fallback)

    return PipelineConfig(
        synth=SynthConfig(seed=int(get("seed", 7))),
        ddigcn=DdigcnConfig(
            backbone=get("backbone", "gin"),
            epochs=int(get("ddigcn_epochs", 400)),
        ),
        cf=CfConfig(k=int(get("clusters", 5))),
        train=TrainConfig(
            delta=float(get("delta", 1.0)),
            epochs=int(get("mdgcn_epochs", 1000)),
            use_ddi=not getattr(args, "no_ddi", False),
        ),
    )


def cmd_gen_synth(args, defaults):
    config = SynthConfig(seed=args.seed if args.seed is not None
                         else int(defaults.get("seed", 7)))
    graph, x_raw, y, _ = generate_cohort(config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    graph.save(out / "drugs.csv", out / "ddi_edges.csv")
    cohort = make_cohort(x_raw, y)
    cohort.save(out)
    print(f"wrote synthetic cohort to {out}")
    return 0


def cmd_train(args, defaults):
    config = _pipeline_config(args, defaults)
    result = run_training_pipeline(config, out_dir=args.out)
    for (name, k), value in sorted(result.metrics.items()):
        print(f"{name}@{k}: {value:.4f}")
    print(f"artifacts in {args.out}")
    return 0


def cmd_eval(args, defaults):
    art = Path(args.artifacts)
    bundle = ModelBundle.load(art / "model.npz")
    graph = load_ddi_graph(art / "drugs.csv", art / "ddi_edges.csv")
    cohort = Cohort.load(art, n_drugs=graph.n_drugs)
    from .pipeline import evaluate_split, ss_at_k

    suggestions, _, table = evaluate_split(bundle, cohort, graph, cohort.test_idx)
    table.update(ss_at_k(graph, suggestions))
    if args.baseline:
        base = usersim_metrics(cohort)
        for (name, k), value in sorted(base.items()):
            print(f"usersim {name}@{k}: {value:.4f}")
    for (name, k), value in sorted(table.items()):
        print(f"{name}@{k}: {value:.4f}")
    if args.out:
        write_metrics_csv(args.out, table)
    return 0


def _load_bundle_graph(artifacts):
    art = Path(artifacts)
    bundle = ModelBundle.load(art / "model.npz")
    graph = load_ddi_graph(art / "drugs.csv", art / "ddi_edges.csv")
    return bundle, graph


def cmd_suggest(args, defaults):
    bundle, graph = _load_bundle_graph(args.artifacts)
    features = np.array([float(x) for x in args.features.split(",")])
    ranked = suggest_top_k(features, args.k, bundle, graph)
    for drug_id, score in ranked:
        name = graph.drugs[drug_id].name
        print(f"{drug_id}\t{name}\t{score:.4f}")
    return 0


def cmd_explain(args, defaults):
    _, graph = _load_bundle_graph(args.artifacts)
    ids = [int(x) for x in args.drugs.split(",")]
    sub = community.explain_suggestion(graph, ids, alpha=args.alpha)
    print(json.dumps(sub.to_json({d.id: d.name for d in graph.drugs}), indent=2))
    return 0


def cmd_serve(args, defaults):
    import uvicorn

    from .service import create_app

    bundle, graph = _load_bundle_graph(args.artifacts)
    app = create_app(bundle, graph)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="medrec")
    p.add_argument("--config", help="JSON config file with default options")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-synth", help="write a synthetic cohort to a directory")
    g.add_argument("--out", required=True)
    g.add_argument("--seed", type=int)
    g.set_defaults(fn=cmd_gen_synth)

    t = sub.add_parser("train", help="run the full training pipeline")
    t.add_argument("--out", required=True)
    t.add_argument("--seed", type=int)
    t.add_argument("--backbone", choices=["gin", "sgcn"])
    t.add_argument("--delta", type=float)
    t.add_argument("--clusters", type=int)
    t.add_argument("--ddigcn-epochs", type=int, dest="ddigcn_epochs")
    t.add_argument("--mdgcn-epochs", type=int, dest="mdgcn_epochs")
    t.add_argument("--no-ddi", action="store_true", dest="no_ddi")
    t.set_defaults(fn=cmd_train)

    e = sub.add_parser("eval", help="re-evaluate saved artifacts")
    e.add_argument("--artifacts", required=True)
    e.add_argument("--out")
    e.add_argument("--baseline", action="store_true")
    e.set_defaults(fn=cmd_eval)

    s = sub.add_parser("suggest", help="top-k drugs for one patient")
    s.add_argument("--artifacts", required=True)
    s.add_argument("--features", required=True, help="comma-separated raw features")
    s.add_argument("-k", type=int, default=4)
    s.set_defaults(fn=cmd_suggest)

    x = sub.add_parser("explain", help="explanation subgraph for a drug set")
    x.add_argument("--artifacts", required=True)
    x.add_argument("--drugs", required=True, help="comma-separated drug ids")
    x.add_argument("--alpha", type=float, default=0.5)
    x.set_defaults(fn=cmd_explain)

    v = sub.add_parser("serve", help="run the HTTP service")
    v.add_argument("--artifacts", required=True)
    v.add_argument("--host", default="127.0.0.1")
    v.add_argument("--port", type=int, default=8000)
    v.set_defaults(fn=cmd_serve)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    config_path = args.config or os.environ.get("MEDREC_CONFIG")
    defaults = _load_config_defaults(config_path)
    try:
        return args.fn(args, defaults)
    except MedrecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
