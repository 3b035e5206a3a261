"""HTTP wire protocol for the scoring service.

Endpoints (JSON over HTTP):
  POST /v1/score  {metric: "da"|"qe", items: [{src, mt, ref?}]} -> {scores}
  POST /v1/embed  {texts: [str, ...]}                           -> {embeddings}
  POST /v1/ppl    {texts: [str, ...]}                           -> {ppls}
  GET  /v1/health                                               -> {status, mode}

Schema violations return 422 with the offending field path; a backend that
fails to load returns 503. Scores are on [0, 1]; embeddings are unit
vectors; batch order is always preserved.
"""

from __future__ import annotations

import os
from typing import Annotated, Literal

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, ConfigDict, Field, StringConstraints

from . import __version__
from .mock_backend import MockBackend
from .real_backend import RealBackend

MODES = ("mock", "real")

# set to any non-empty value to make scoring endpoints report a backend
# load failure (503); used by deployment smoke tests
FORCE_LOAD_FAILURE_ENV = "SCORER_FORCE_LOAD_FAILURE"
MODE_ENV = "SCORER_MODE"


class ScoreItem(BaseModel):
    model_config = ConfigDict(extra="forbid")

    src: str
    mt: str
    ref: str | None = None


class ScoreRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    metric: Literal["da", "qe"]
    items: list[ScoreItem] = Field(min_length=1)


class ScoreResponse(BaseModel):
    scores: list[float]


class EmbedRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    texts: list[str] = Field(min_length=1)


class EmbedResponse(BaseModel):
    embeddings: list[list[float]]


class PplRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    texts: list[Annotated[str, StringConstraints(min_length=1)]] = Field(min_length=1)


class PplResponse(BaseModel):
    ppls: list[float]


class HealthResponse(BaseModel):
    status: str
    mode: str


def _check_ref_rule(request: ScoreRequest) -> None:
    # ref must be present exactly when the metric is reference-based
    for i, item in enumerate(request.items):
        if request.metric == "da" and item.ref is None:
            _reject(["body", "items", i, "ref"], "required when metric is 'da'")
        if request.metric == "qe" and item.ref is not None:
            _reject(["body", "items", i, "ref"], "forbidden when metric is 'qe'")


def _reject(loc: list, msg: str) -> None:
    raise HTTPException(
        status_code=422,
        detail=[{"loc": loc, "msg": msg, "type": "value_error"}],
    )


def create_app(mode: str | None = None) -> FastAPI:
    """Build the service app; mode defaults to $SCORER_MODE, then "mock"."""
    resolved = mode or os.environ.get(MODE_ENV, "mock")
    if resolved not in MODES:
        raise ValueError(f"unknown mode {resolved!r}; expected one of {MODES}")

    app = FastAPI(title="scorer-service", version=__version__)
    loaded: dict = {"backend": None}

    def backend():
        if os.environ.get(FORCE_LOAD_FAILURE_ENV):
            raise HTTPException(status_code=503, detail="backend failed to load")
        if loaded["backend"] is None:
            try:
                loaded["backend"] = MockBackend() if resolved == "mock" else RealBackend()
            except Exception as exc:
                raise HTTPException(
                    status_code=503, detail=f"backend failed to load: {exc}"
                ) from exc
        return loaded["backend"]

    @app.post("/v1/score", response_model=ScoreResponse)
    def score(request: ScoreRequest) -> ScoreResponse:
        _check_ref_rule(request)
        active = backend()
        if request.metric == "da":
            scores = [active.da(i.src, i.mt, i.ref) for i in request.items]
        else:
            scores = [active.qe(i.src, i.mt) for i in request.items]
        return ScoreResponse(scores=scores)

    @app.post("/v1/embed", response_model=EmbedResponse)
    def embed(request: EmbedRequest) -> EmbedResponse:
        active = backend()
        return EmbedResponse(embeddings=[active.embed(t) for t in request.texts])

    @app.post("/v1/ppl", response_model=PplResponse)
    def ppl(request: PplRequest) -> PplResponse:
        active = backend()
        return PplResponse(ppls=[active.ppl(t) for t in request.texts])

    @app.get("/v1/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", mode=resolved)

    return app


app = create_app()
