"""HTTP facade over a trained model snapshot.

The app closes over the artifacts passed at construction; nothing
mutates them afterwards, so concurrent requests see one consistent
model.
"""

from __future__ import annotations

import numpy as np
from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from . import community
from .errors import ConfigError, DisconnectedQueryError
from .recommender import suggest_top_k

API_VERSION = "1"


class SuggestRequest(BaseModel):
    features: list[float]
    k: int = Field(default=4, ge=1)


class ExplainRequest(BaseModel):
    drug_ids: list[int]
    alpha: float = 0.5


class SsRequest(BaseModel):
    drug_ids: list[int]
    alpha: float = 0.5


def create_app(bundle, graph):
    app = FastAPI(title="medrec", version=API_VERSION)
    drug_names = {d.id: d.name for d in graph.drugs}
    d1 = int(bundle.encoder.w1.shape[0])

    @app.get("/health")
    def health():
        return {"status": "ok", "version": API_VERSION}

    @app.get("/schema")
    def schema():
        return {
            "feature_dim": d1,
            "n_drugs": graph.n_drugs,
            "k_max": graph.n_drugs,
            "default_alpha": 0.5,
        }

    @app.get("/drugs")
    def drugs():
        return [
            {"id": d.id, "name": d.name, "degree": len(graph.neighbors(d.id, (-1, 1)))}
            for d in graph.drugs
        ]

    @app.post("/suggest")
    def suggest(req: SuggestRequest):
        if len(req.features) != d1:
            raise HTTPException(
                status_code=422,
                detail=f"expected {d1} features, got {len(req.features)}",
            )
        try:
            ranked = suggest_top_k(np.array(req.features), req.k, bundle, graph)
        except ConfigError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        return {
            "suggestions": [
                {"drug_id": v, "name": drug_names[v], "score": s} for v, s in ranked
            ]
        }

    def _check_ids(ids):
        unknown = [v for v in ids if not 0 <= v < graph.n_drugs]
        if unknown:
            raise HTTPException(
                status_code=404, detail=f"unknown drug ids: {sorted(unknown)}"
            )
        if not ids:
            raise HTTPException(status_code=422, detail="drug_ids must be non-empty")

    @app.post("/explain")
    def explain(req: ExplainRequest):
        _check_ids(req.drug_ids)
        try:
            sub = community.explain_suggestion(
                graph, req.drug_ids, alpha=req.alpha
            )
        except DisconnectedQueryError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        except ConfigError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        return sub.to_json(drug_names)

    @app.post("/ss")
    def ss(req: SsRequest):
        _check_ids(req.drug_ids)
        if len(set(req.drug_ids)) < 2:
            raise HTTPException(
                status_code=422, detail="need at least two distinct drugs"
            )
        try:
            sub = community.explain_suggestion(graph, req.drug_ids, alpha=req.alpha)
        except ConfigError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        return {"ss": sub.ss, "alpha": req.alpha, "drug_ids": sorted(set(req.drug_ids))}

    return app
