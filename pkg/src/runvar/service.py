"""JSON-over-HTTP service exposing prediction and what-if endpoints.

All shared state is read-only after startup; model reload requires a
restart. The optional UI directory is served statically at /.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from fastapi import Body, FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from .clustering import ShapeModel, assign_membership
from .distribution import distribution_stats
from .errors import RunvarError, UnknownFeature
from .features import FeatureSchema, FeatureVector, extract_features, group_pmf
from .forest import Forest, predict_proba
from .telemetry import Dataset
from .whatif import Intervention, apply_intervention


@dataclass(eq=False)
class GroupView:
    key: str
    support: int
    pmf: dict
    membership_cluster: int
    log_likelihoods: list[float]
    stats: dict
    latest: FeatureVector


@dataclass(eq=False)
class ServingBundle:
    dataset: Dataset
    shape_model: ShapeModel
    classifier: Forest
    schema: FeatureSchema
    groups: dict[str, GroupView]

    @staticmethod
    def build(dataset: Dataset, shape_model: ShapeModel, classifier: Forest,
              schema: FeatureSchema) -> "ServingBundle":
        groups = {}
        for g in dataset.groups:
            pmf, values, _ = group_pmf(g, shape_model.spec)
            label = assign_membership(pmf, shape_model)
            latest = extract_features(g, g.instances[-1], schema)
            groups[g.key.as_string()] = GroupView(
                key=g.key.as_string(),
                support=g.support,
                pmf=pmf.to_dict(),
                membership_cluster=label.cluster_id,
                log_likelihoods=[float(v) for v in label.log_likelihoods],
                stats=distribution_stats(values, shape_model.spec)
                if len(values) >= 2
                else {},
                latest=latest,
            )
        return ServingBundle(dataset, shape_model, classifier, schema, groups)


def _vector_from_features(bundle: ServingBundle, features: dict) -> np.ndarray:
    names = bundle.schema.names
    unknown = sorted(set(features) - set(names))
    if unknown:
        raise UnknownFeature(f"unknown features: {unknown}")
    missing = sorted(set(names) - set(features))
    if missing:
        raise ValueError(f"missing features: {missing[:5]}{'...' if len(missing) > 5 else ''}")
    return np.asarray([float(features[n]) for n in names], dtype=np.float64)


def _prediction_payload(bundle: ServingBundle, values: np.ndarray) -> dict:
    proba = predict_proba(bundle.classifier, values[None, :])[0]
    cluster = int(np.argmax(proba))
    return {
        "cluster": cluster,
        "probabilities": [float(p) for p in proba],
        "stats": bundle.shape_model.stats[cluster],
    }


class ApiError(Exception):
    def __init__(self, status: int, message: str):
        self.status = status
        self.message = message


def create_app(bundle: ServingBundle, ui_dir=None) -> FastAPI:
    app = FastAPI(title="runvar", docs_url=None, redoc_url=None)

    @app.exception_handler(ApiError)
    async def api_error_handler(request: Request, exc: ApiError):
        return JSONResponse(status_code=exc.status, content={"error": exc.message})

    @app.exception_handler(RequestValidationError)
    async def validation_handler(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"error": "malformed body"})

    @app.exception_handler(Exception)
    async def fallback_handler(request: Request, exc: Exception):
        return JSONResponse(status_code=500, content={"error": str(exc)})

    @app.get("/api/health")
    def health():
        return {"status": "ok"}

    @app.get("/api/clusters")
    def clusters():
        m = bundle.shape_model
        return {
            "k": m.k,
            "mode": m.spec.mode.value,
            "spec": m.spec.to_dict(),
            "cluster_order": list(m.cluster_order),
            "stats": m.stats,
            "centroids": [[float(v) for v in row] for row in m.centroids],
        }

    @app.get("/api/groups")
    def groups(limit: int = 50):
        views = list(bundle.groups.values())[: max(0, limit)]
        return {
            "groups": [
                {
                    "key": v.key,
                    "support": v.support,
                    "cluster": v.membership_cluster,
                    "n_samples": v.pmf["n_samples"],
                }
                for v in views
            ],
            "total": len(bundle.groups),
        }

    @app.get("/api/groups/{key:path}")
    def group_detail(key: str):
        view = bundle.groups.get(key)
        if view is None:
            raise ApiError(404, f"unknown group {key!r}")
        centroid = bundle.shape_model.centroids[view.membership_cluster]
        return {
            "key": view.key,
            "support": view.support,
            "pmf": view.pmf,
            "membership": {
                "cluster_id": view.membership_cluster,
                "log_likelihoods": view.log_likelihoods,
            },
            "stats": view.stats,
            "cluster_stats": bundle.shape_model.stats[view.membership_cluster],
            "centroid": [float(v) for v in centroid],
            "features": view.latest.as_dict(),
        }

    def _resolve_fingerprint(payload: dict) -> None:
        fp = payload.get("schema_fingerprint")
        if fp is not None and fp != bundle.schema.fingerprint():
            raise ApiError(409, "schema fingerprint mismatch")

    @app.post("/api/predict")
    def predict(payload: dict = Body(...)):
        _resolve_fingerprint(payload)
        features = payload.get("features")
        if not isinstance(features, dict):
            raise ApiError(400, "body must carry a 'features' object")
        try:
            values = _vector_from_features(bundle, features)
        except (UnknownFeature, ValueError) as e:
            raise ApiError(400, str(e)) from e
        return _prediction_payload(bundle, values)

    @app.post("/api/whatif")
    def whatif(payload: dict = Body(...)):
        _resolve_fingerprint(payload)
        key = payload.get("group_key")
        features = payload.get("features")
        if key is not None:
            view = bundle.groups.get(key)
            if view is None:
                raise ApiError(404, f"unknown group {key!r}")
            fv = view.latest
        elif isinstance(features, dict):
            try:
                values = _vector_from_features(bundle, features)
            except (UnknownFeature, ValueError) as e:
                raise ApiError(400, str(e)) from e
            fv = FeatureVector(values=values, schema=bundle.schema)
        else:
            raise ApiError(400, "body must carry 'group_key' or 'features'")
        try:
            intervention = Intervention.from_dict(payload.get("intervention") or {})
            after_fv = apply_intervention(fv, intervention)
        except RunvarError as e:
            raise ApiError(400, str(e)) from e
        except (KeyError, TypeError, ValueError) as e:
            raise ApiError(400, f"bad intervention: {e}") from e
        before = _prediction_payload(bundle, fv.values)
        after = _prediction_payload(bundle, after_fv.values)
        return {
            "before": before,
            "after": after,
            "changed": before["cluster"] != after["cluster"],
            "intervention": intervention.to_dict(),
        }

    if ui_dir and Path(ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app


def serve(bundle: ServingBundle, port: int = 8000, host: str = "127.0.0.1", ui_dir=None):
    """Run the HTTP service until interrupted."""
    import uvicorn

    app = create_app(bundle, ui_dir=ui_dir)
    uvicorn.run(app, host=host, port=port, log_level="warning")
