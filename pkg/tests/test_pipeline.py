import csv
import json
import warnings

import numpy as np
import pytest
from fastapi.testclient import TestClient

from medrec import cli, community
from medrec.causal import CfConfig
from medrec.data import Cohort, load_ddi_graph
from medrec.ddinet import DdigcnConfig
from medrec.pipeline import (
    EVAL_KS,
    PipelineConfig,
    evaluate_split,
    run_training_pipeline,
    ss_at_k,
    usersim_baseline,
    usersim_metrics,
    write_metrics_csv,
)
from medrec.recommender import ModelBundle, TrainConfig
from medrec.service import create_app
from medrec.synth import SynthConfig


def _tiny_config(**train_kw):
    return PipelineConfig(
        synth=SynthConfig(
            n_groups=2, patients_per_group=10, n_drugs=12, drugs_per_group=5, seed=1
        ),
        ddigcn=DdigcnConfig(epochs=30),
        cf=CfConfig(k=2),
        train=TrainConfig(epochs=40, **train_kw),
    )


@pytest.fixture(scope="module")
def tiny_run():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return run_training_pipeline(_tiny_config())


# ---------------------------------------------------------------------
# end to end
# ---------------------------------------------------------------------


def test_tiny_run_structure(tiny_run):
    r = tiny_run
    assert r.graph.n_drugs == 12
    assert set(r.metrics) >= {("recall", k) for k in EVAL_KS}
    assert ("ss", 4) in r.metrics
    assert set(r.suggestions) == set(int(i) for i in r.cohort.test_idx)
    assert all(len(s) == max(EVAL_KS) for s in r.suggestions.values())
    assert r.manifest.seeds["synth"] == 1
    assert r.manifest.wall_seconds > 0


def test_tiny_run_metric_ranges(tiny_run):
    assert all(0.0 <= v <= 1.0 for v in tiny_run.metrics.values())
    # recall can only grow with k
    recalls = [tiny_run.metrics[("recall", k)] for k in EVAL_KS]
    assert all(b >= a - 1e-12 for a, b in zip(recalls, recalls[1:]))


def test_repeat_run_hashes_identical(tiny_run):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        again = run_training_pipeline(_tiny_config())
    assert again.manifest.hashes == tiny_run.manifest.hashes
    assert again.metrics == tiny_run.metrics


def test_artifact_directory_roundtrip(tmp_path, tiny_run):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        result = run_training_pipeline(_tiny_config(), out_dir=tmp_path)
    for name in ["metrics.csv", "manifest.json", "model.npz", "drugs.csv",
                 "ddi_edges.csv", "treatments.csv"]:
        assert (tmp_path / name).exists(), name

    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert "metrics_csv" in manifest["hashes"]

    # re-evaluating the saved artifacts reproduces the metric table
    bundle = ModelBundle.load(tmp_path / "model.npz")
    graph = load_ddi_graph(tmp_path / "drugs.csv", tmp_path / "ddi_edges.csv")
    cohort = Cohort.load(tmp_path, n_drugs=graph.n_drugs)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        _, _, table = evaluate_split(bundle, cohort, graph, cohort.test_idx)
    for key in table:
        assert table[key] == pytest.approx(result.metrics[key], abs=1e-12)


def test_metrics_csv_exact_roundtrip(tmp_path):
    table = {("recall", 4): 0.8125, ("ndcg", 2): 1 / 3}
    path = tmp_path / "m.csv"
    write_metrics_csv(path, table)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["metric", "k", "value"]
    parsed = {(m, int(k)): float(v) for m, k, v in rows[1:]}
    assert parsed == table  # repr() round-trips floats exactly


# ---------------------------------------------------------------------
# baseline
# ---------------------------------------------------------------------


def _cohort(x_raw, y, n_train):
    n = len(x_raw)
    return Cohort(
        list(range(n)), np.asarray(x_raw, float), np.asarray(y, float),
        np.arange(n_train), np.array([], dtype=np.intp), np.arange(n_train, n),
    )


def test_usersim_identical_neighbor_wins():
    # standardization keeps these two train rows opposite; the test
    # patient equals train patient 0 so drug 0 (score 1) beats drug 2
    # (score 0) beats drug 1 (score -1)
    x = [[1.0, -1], [-1, 1], [1, -1]]
    y = [[1.0, 0, 0], [0, 1, 0], [0, 0, 0]]
    out = usersim_baseline(_cohort(x, y, 2), k=3)
    assert out == [[0, 2, 1]]


def test_usersim_zero_scores_tie_to_lower_ids():
    x = [[1.0, -1], [-1, 1], [0, 0]]
    y = [[0.0, 0, 0], [0, 0, 0], [0, 0, 0]]
    out = usersim_baseline(_cohort(x, y, 2), k=3)
    assert out == [[0, 1, 2]]


def test_usersim_hand_product():
    # sim = unit(x_u) unit(x_o)^T, scores = sim @ y_o, done by hand
    x = [[2.0, 0], [0, 2], [2, 2]]
    y = [[1.0, 1], [1, 0], [0, 0]]
    cohort = _cohort(x, y, 2)
    x_o = cohort.x[:2]
    x_u = cohort.x[2:]
    def unit(m):
        return m / np.linalg.norm(m, axis=1, keepdims=True)

    scores = unit(x_u) @ unit(x_o).T @ np.asarray(y[:2])
    order = np.lexsort((np.arange(2), -scores[0]))
    assert usersim_baseline(cohort, k=2) == [[int(v) for v in order]]


def test_usersim_metrics_consistent(tiny_run):
    cohort = tiny_run.cohort
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        table = usersim_metrics(cohort, ks=(1, 4))
    assert set(table) == {(m, k) for m in ("precision", "recall", "ndcg")
                          for k in (1, 4)}
    assert all(0.0 <= v <= 1.0 for v in table.values())


def test_ss_at_k_matches_direct_mean(tiny_run):
    suggestions = list(tiny_run.suggestions.values())[:3]
    got = ss_at_k(tiny_run.graph, suggestions, ks=(3,))[("ss", 3)]
    vals = []
    for s in suggestions:
        sub = community.explain_suggestion(tiny_run.graph, s[:3])
        if sub.ss is not None:
            vals.append(sub.ss)
    assert got == pytest.approx(np.mean(vals))


# ---------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------


@pytest.fixture(scope="module")
def cli_artifacts(tmp_path_factory):
    out = tmp_path_factory.mktemp("artifacts")
    config = tmp_path_factory.mktemp("config") / "config.json"
    config.write_text(json.dumps({"ddigcn_epochs": 20, "mdgcn_epochs": 20}))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        code = cli.main(["--config", str(config), "train", "--out", str(out),
                         "--clusters", "3"])
    assert code == 0
    return out


def test_cli_gen_synth(tmp_path, capsys):
    code = cli.main(["gen-synth", "--out", str(tmp_path), "--seed", "3"])
    assert code == 0
    assert (tmp_path / "drugs.csv").exists()
    assert (tmp_path / "ddi_edges.csv").exists()
    assert "wrote synthetic cohort" in capsys.readouterr().out


def test_cli_train_output(cli_artifacts, capsys):
    assert (cli_artifacts / "model.npz").exists()
    assert (cli_artifacts / "metrics.csv").exists()


def test_cli_eval(cli_artifacts, tmp_path, capsys):
    out = tmp_path / "metrics.csv"
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        code = cli.main(["eval", "--artifacts", str(cli_artifacts),
                         "--out", str(out), "--baseline"])
    assert code == 0
    text = capsys.readouterr().out
    assert "recall@4:" in text
    assert "usersim recall@4:" in text
    assert out.exists()


def test_cli_suggest(cli_artifacts, capsys):
    features = ",".join(["0.5"] * 12)
    code = cli.main(["suggest", "--artifacts", str(cli_artifacts),
                     "--features", features, "-k", "3"])
    assert code == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 3
    assert lines[0].split("\t")[1].startswith("drug-")


def test_cli_explain(cli_artifacts, capsys):
    code = cli.main(["explain", "--artifacts", str(cli_artifacts),
                     "--drugs", "0,1"])
    assert code == 0
    data = json.loads(capsys.readouterr().out)
    assert {n["id"] for n in data["nodes"]} >= {0, 1}


def test_cli_error_exit_code(cli_artifacts, capsys):
    code = cli.main(["explain", "--artifacts", str(cli_artifacts),
                     "--drugs", "0,999"])
    assert code == 1
    assert "error:" in capsys.readouterr().err


# ---------------------------------------------------------------------
# HTTP service
# ---------------------------------------------------------------------


@pytest.fixture(scope="module")
def client(tiny_run):
    app = create_app(tiny_run.bundle, tiny_run.graph)
    return TestClient(app)


def test_service_health_and_schema(client):
    assert client.get("/health").json()["status"] == "ok"
    schema = client.get("/schema").json()
    assert schema["feature_dim"] == 12
    assert schema["n_drugs"] == 12


def test_service_drugs_listing(client):
    drugs = client.get("/drugs").json()
    assert len(drugs) == 12
    assert drugs[0]["id"] == 0 and drugs[0]["name"] == "drug-0"


def test_service_suggest(client, tiny_run):
    features = [0.5] * 12
    resp = client.post("/suggest", json={"features": features, "k": 3})
    assert resp.status_code == 200
    got = resp.json()["suggestions"]
    assert len(got) == 3
    scores = [s["score"] for s in got]
    assert scores == sorted(scores, reverse=True)


def test_service_suggest_validation(client):
    resp = client.post("/suggest", json={"features": [1.0, 2.0], "k": 3})
    assert resp.status_code == 422
    resp = client.post("/suggest", json={"features": [0.0] * 12, "k": 99})
    assert resp.status_code == 422


def test_service_explain(client):
    resp = client.post("/explain", json={"drug_ids": [0, 1]})
    assert resp.status_code == 200
    data = resp.json()
    assert data["p"] >= 2
    assert data["ss"] is not None
    assert {n["id"] for n in data["nodes"] if n["suggested"]} == {0, 1}


def test_service_explain_unknown_drug(client):
    assert client.post("/explain", json={"drug_ids": [0, 999]}).status_code == 404


def test_service_ss_matches_library(client, tiny_run):
    resp = client.post("/ss", json={"drug_ids": [0, 1, 2], "alpha": 0.5})
    assert resp.status_code == 200
    body = resp.json()
    sub = community.explain_suggestion(tiny_run.graph, [0, 1, 2], alpha=0.5)
    assert body["ss"] == pytest.approx(sub.ss)
    assert body["drug_ids"] == [0, 1, 2]


def test_service_ss_needs_two_distinct(client):
    assert client.post("/ss", json={"drug_ids": [3, 3]}).status_code == 422
