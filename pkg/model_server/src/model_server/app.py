"""FastAPI application implementing the gateway wire protocol.

Every request carries a client id that is echoed back. Errors use the
protocol body {"error": {"code": ..., "message": ...}}: unknown model ids
are 404, malformed JSON or missing fields are 400.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .backends import SELECT_PROMPT_TEMPLATE, SELECT_PROMPT_VERSION, load_backend
from .config import ServerConfig


class EmbedRequest(BaseModel):
    id: str
    model: str
    texts: list[str]


class RerankRequest(BaseModel):
    id: str
    model: str
    query: str
    candidates: list[str]


class SelectRequest(BaseModel):
    id: str
    model: str
    query: str
    candidates: list[str]


def _error(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(status_code=status,
                        content={"error": {"code": code, "message": message}})


def create_app(config: ServerConfig) -> FastAPI:
    app = FastAPI(title="model-server")
    backends: dict[str, object] = {}
    kinds: dict[str, str] = {}
    for spec in config.models:
        backends[spec.id] = load_backend(spec)
        kinds[spec.id] = spec.kind

    @app.exception_handler(RequestValidationError)
    async def validation_handler(request: Request, exc: RequestValidationError):
        return _error(400, "bad_request", str(exc.errors()[:1]))

    def _lookup(model_id: str, kind: str):
        backend = backends.get(model_id)
        if backend is None or kinds[model_id] != kind:
            return None
        return backend

    @app.get("/v1/health")
    async def health():
        return {"status": "ok", "models": sorted(backends),
                "extensions": {"select_prompt_version": SELECT_PROMPT_VERSION,
                               "select_prompt_template": SELECT_PROMPT_TEMPLATE}}

    @app.post("/v1/embed")
    async def embed(req: EmbedRequest):
        backend = _lookup(req.model, "embed")
        if backend is None:
            return _error(404, "unknown_model", f"no embed model {req.model!r}")
        if not req.texts:
            return _error(400, "bad_request", "texts must be nonempty")
        vectors = backend.embed(req.texts)
        return {"id": req.id, "dim": len(vectors[0]), "embeddings": vectors}

    @app.post("/v1/rerank")
    async def rerank(req: RerankRequest):
        backend = _lookup(req.model, "rerank")
        if backend is None:
            return _error(404, "unknown_model", f"no rerank model {req.model!r}")
        if not req.candidates:
            return _error(400, "bad_request", "candidates must be nonempty")
        scores = backend.score(req.query, req.candidates)
        return {"id": req.id, "scores": [float(s) for s in scores]}

    @app.post("/v1/select")
    async def select(req: SelectRequest):
        backend = _lookup(req.model, "select")
        if backend is None:
            return _error(404, "unknown_model", f"no select model {req.model!r}")
        if not req.candidates:
            return _error(400, "bad_request", "candidates must be nonempty")
        try:
            index = backend.select(req.query, req.candidates)
        except ValueError as exc:
            return _error(500, "select_failed", str(exc))
        return {"id": req.id, "index": int(index)}

    return app
