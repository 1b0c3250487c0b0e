"""HTTP service for interactive word-in-context feature prediction.

Endpoints:

    GET  /models   -> registered projectors with their metadata
    POST /predict  -> ranked feature predictions for a word in a sentence

The service owns no embedding model itself: it forwards (sentence, word,
occurrence) to an extractor sidecar's ``POST /embed`` endpoint, projects
the returned vector with the requested registered model, and responds with
the features sorted by predicted value (descending, ties in feature-list
order). Errors use JSON bodies {"error", "detail"} with 404 for unknown
models, 422 for word/occurrence problems, and 502 when the extractor
cannot be reached.

The model registry is read once at startup from a JSON file mapping
model_id -> {"path": ..., "source_model": ..., "layer": ...}; entries
whose model file fails to load are skipped with a warning. Loaded models
are immutable, so request handling is freely concurrent.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass
from pathlib import Path

import httpx
import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from . import mlp

logger = logging.getLogger(__name__)

EXTRACTOR_URL_ENV = "FEATURESCOPE_EXTRACTOR_URL"
DEFAULT_TIMEOUT = 30.0


class ApiError(Exception):
    def __init__(self, status_code: int, error: str, detail: str):
        super().__init__(detail)
        self.status_code = status_code
        self.error = error
        self.detail = detail


class ExtractorUnreachable(RuntimeError):
    """The extractor sidecar did not answer."""


class ExtractorRejected(RuntimeError):
    """The extractor answered with a client error (e.g. word not found)."""

    def __init__(self, status_code: int, detail: str):
        super().__init__(detail)
        self.status_code = status_code
        self.detail = detail


class ExtractorClient:
    """Thin client for the extractor sidecar's POST /embed endpoint."""

    def __init__(self, base_url: str, timeout: float = DEFAULT_TIMEOUT):
        self.base_url = base_url.rstrip("/")
        self._client = httpx.Client(timeout=timeout)

    def embed(
        self, sentence: str, word: str, occurrence: int, model_name: str, layer: int
    ) -> np.ndarray:
        payload = {
            "sentence": sentence,
            "word": word,
            "occurrence": occurrence,
            "model_name": model_name,
            "layer": layer,
        }
        try:
            response = self._client.post(f"{self.base_url}/embed", json=payload)
        except httpx.HTTPError as exc:
            raise ExtractorUnreachable(f"extractor at {self.base_url}: {exc}") from exc
        if response.status_code == 422:
            raise ExtractorRejected(response.status_code, _error_detail(response))
        if response.status_code != 200:
            # includes an extractor-side 404: a model wiring problem, not a
            # caller mistake
            raise ExtractorUnreachable(
                f"extractor returned status {response.status_code}: "
                f"{_error_detail(response)}"
            )
        body = response.json()
        return np.asarray(body["vector"], dtype=np.float64)

    def close(self) -> None:
        self._client.close()


def _error_detail(response: httpx.Response) -> str:
    try:
        body = response.json()
    except ValueError:
        return response.text
    if isinstance(body, dict):
        return str(body.get("detail") or body.get("error") or body)
    return str(body)


def extractor_url_from(flag_value: str | None) -> str:
    url = flag_value or os.environ.get(EXTRACTOR_URL_ENV)
    if not url:
        raise ValueError(
            f"no extractor URL: pass --extractor-url or set {EXTRACTOR_URL_ENV}"
        )
    return url


@dataclass(frozen=True)
class RegisteredModel:
    model_id: str
    path: Path
    model: mlp.ProjectorModel

    @property
    def summary(self) -> dict:
        meta = self.model.metadata
        return {
            "model_id": self.model_id,
            "source_model": meta.source_model,
            "layer": meta.layer,
            "norm_space": meta.norm_space,
            "feature_count": len(meta.feature_names),
        }


class ModelRegistry:
    """Immutable set of projectors, loaded once from a JSON config."""

    def __init__(self, models: dict[str, RegisteredModel]):
        self._models = models

    @classmethod
    def from_config(cls, config_path: str | Path) -> "ModelRegistry":
        config_path = Path(config_path)
        with open(config_path, encoding="utf-8") as fh:
            raw = json.load(fh)
        base = config_path.parent
        models: dict[str, RegisteredModel] = {}
        for model_id, entry in raw.items():
            path = Path(entry["path"])
            if not path.is_absolute():
                path = base / path
            try:
                model = mlp.load_model(path)
            except (OSError, ValueError) as exc:
                logger.warning("skipping model %r (%s): %s", model_id, path, exc)
                continue
            models[model_id] = RegisteredModel(model_id=model_id, path=path, model=model)
        return cls(models)

    def get(self, model_id: str) -> RegisteredModel | None:
        return self._models.get(model_id)

    def list(self) -> list[dict]:
        return [self._models[k].summary for k in sorted(self._models)]


class PredictRequest(BaseModel):
    sentence: str
    word: str
    occurrence: int = Field(default=0, ge=0)
    model_id: str


def create_app(registry: ModelRegistry, extractor: ExtractorClient) -> FastAPI:
    app = FastAPI(title="featurescope", docs_url=None, redoc_url=None)

    @app.exception_handler(ApiError)
    async def handle_api_error(_request: Request, exc: ApiError) -> JSONResponse:
        return JSONResponse(
            status_code=exc.status_code,
            content={"error": exc.error, "detail": exc.detail},
        )

    @app.exception_handler(RequestValidationError)
    async def handle_validation(_request: Request, exc: RequestValidationError) -> JSONResponse:
        return JSONResponse(
            status_code=422,
            content={"error": "validation_error", "detail": str(exc.errors())},
        )

    @app.get("/models")
    def list_models() -> list[dict]:
        return registry.list()

    @app.post("/predict")
    def predict(request: PredictRequest) -> dict:
        registered = registry.get(request.model_id)
        if registered is None:
            raise ApiError(404, "unknown_model", f"no model {request.model_id!r}")
        meta = registered.model.metadata
        try:
            vector = extractor.embed(
                sentence=request.sentence,
                word=request.word,
                occurrence=request.occurrence,
                model_name=meta.source_model,
                layer=meta.layer,
            )
        except ExtractorRejected as exc:
            raise ApiError(422, "word_not_found", exc.detail) from exc
        except ExtractorUnreachable as exc:
            raise ApiError(502, "extractor_unreachable", str(exc)) from exc
        if vector.shape != (registered.model.config.input_dim,):
            raise ApiError(
                502,
                "extractor_error",
                f"extractor returned dimension {vector.shape}, model expects "
                f"{registered.model.config.input_dim}",
            )
        ranked = mlp.ranked_features(registered.model, vector)
        return {
            "features": [{"name": name, "value": value} for name, value in ranked],
            "model_id": registered.model_id,
            "layer": meta.layer,
            "norm_space": meta.norm_space,
        }

    return app


def build_app(registry_path: str | Path, extractor_url: str) -> FastAPI:
    registry = ModelRegistry.from_config(registry_path)
    return create_app(registry, ExtractorClient(extractor_url))
