"""FastAPI application implementing the /models and /embed protocol."""
from __future__ import annotations

import logging

from fastapi import FastAPI, Response
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .config import ServiceConfig
from .encoders import EncoderError, build_encoder

log = logging.getLogger(__name__)

RETRY_AFTER_SECONDS = 5


class EmbedRequest(BaseModel):
    model: str
    texts: list[str]


def create_app(config: ServiceConfig) -> FastAPI:
    app = FastAPI(title="embed-service")
    encoders = {spec.name: build_encoder(spec) for spec in config.models}

    @app.get("/models")
    def models():
        entries = []
        for spec in config.models:
            entries.append(
                {
                    "name": spec.name,
                    "dim": spec.dim,
                    "max_tokens": spec.max_tokens,
                    "resolved_id": encoders[spec.name].resolved_id,
                }
            )
        return {"models": entries, "max_batch": config.max_batch}

    @app.post("/embed")
    def embed(request: EmbedRequest):
        encoder = encoders.get(request.model)
        if encoder is None:
            return JSONResponse({"error": f"unknown model {request.model!r}"}, status_code=404)
        if len(request.texts) > config.max_batch:
            return JSONResponse(
                {"error": f"batch of {len(request.texts)} exceeds cap {config.max_batch}"},
                status_code=413,
            )
        try:
            if not encoder.ready():
                return JSONResponse(
                    {"error": f"model {request.model!r} is still loading"},
                    status_code=503,
                    headers={"Retry-After": str(RETRY_AFTER_SECONDS)},
                )
            vectors = encoder.encode(request.texts)
        except EncoderError as e:
            log.warning("embed failed for %s: %s", request.model, e)
            return JSONResponse({"error": str(e)}, status_code=500)
        assert vectors.shape == (len(request.texts), encoder.spec.dim)
        return {
            "model": request.model,
            "dim": encoder.spec.dim,
            "vectors": [row.tolist() for row in vectors],
        }

    @app.get("/healthz")
    def healthz():
        return Response(content="ok", media_type="text/plain")

    return app
