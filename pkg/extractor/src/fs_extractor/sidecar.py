"""HTTP sidecar exposing single-word embedding extraction.

POST /embed with {sentence, word, occurrence, model_name, layer} returns
{"vector": [...], "dim": n}. Error bodies are {"error", "detail"} with 404
for unknown models and 422 for word/occurrence/layer problems, mirroring
the prediction service's codes.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .core import LayerOutOfRangeError, ModelBackend, WordNotFoundError


class EmbedRequest(BaseModel):
    sentence: str
    word: str
    occurrence: int = Field(default=0, ge=0)
    model_name: str
    layer: int


def create_app(backends: dict[str, ModelBackend]) -> FastAPI:
    app = FastAPI(title="featurescope-extractor", docs_url=None, redoc_url=None)

    @app.exception_handler(RequestValidationError)
    async def handle_validation(_req: Request, exc: RequestValidationError) -> JSONResponse:
        return JSONResponse(
            status_code=422,
            content={"error": "validation_error", "detail": str(exc.errors())},
        )

    @app.get("/models")
    def list_models() -> list[dict]:
        return [
            {"model_name": name, "hidden_size": b.hidden_size, "layers": b.num_layers}
            for name, b in sorted(backends.items())
        ]

    @app.post("/embed")
    def embed(request: EmbedRequest):
        backend = backends.get(request.model_name)
        if backend is None:
            return JSONResponse(
                status_code=404,
                content={"error": "unknown_model",
                         "detail": f"no model {request.model_name!r}; loaded: "
                                   f"{sorted(backends)}"},
            )
        try:
            vector = backend.embed_word(
                sentence=request.sentence,
                word=request.word,
                occurrence=request.occurrence,
                layer=request.layer,
            )
        except WordNotFoundError as exc:
            return JSONResponse(
                status_code=422, content={"error": "word_not_found", "detail": str(exc)}
            )
        except LayerOutOfRangeError as exc:
            return JSONResponse(
                status_code=422,
                content={"error": "layer_out_of_range", "detail": str(exc)},
            )
        return {"vector": [float(x) for x in vector], "dim": len(vector)}

    return app
