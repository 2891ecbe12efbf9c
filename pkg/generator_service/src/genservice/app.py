"""FastAPI wiring for the generation service."""

from __future__ import annotations

from typing import Literal

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from . import __version__
from .corpus import CorpusError
from .jobs import (
    DEFAULT_EPOCHS,
    DEFAULT_SOURCE_CAP,
    DuplicateModelError,
    JobRegistry,
    UnknownJobError,
    target_cap_for_mode,
)


class FinetuneRequest(BaseModel):
    mode: Literal["question", "answer"]
    corpus_path: str
    model_id: str = Field(min_length=1)
    epochs: int = Field(default=DEFAULT_EPOCHS, ge=1)
    max_source_len: int = Field(default=DEFAULT_SOURCE_CAP, ge=1)
    max_target_len: int | None = Field(default=None, ge=1)


class GenerateRequest(BaseModel):
    mode: Literal["question", "answer"]
    source: str
    model_id: str = Field(min_length=1)
    max_tokens: int | None = Field(default=None, ge=1)


def create_app(inline_jobs: bool = False, fit_delay_s: float = 0.0) -> FastAPI:
    app = FastAPI(title="generator-service", version=__version__)
    registry = JobRegistry(inline=inline_jobs, fit_delay_s=fit_delay_s)
    app.state.registry = registry

    @app.get("/v1/health")
    def health():
        return {"status": "ok", "version": __version__}

    @app.post("/v1/finetune", status_code=202)
    def finetune(req: FinetuneRequest):
        try:
            job = registry.submit(
                mode=req.mode,
                corpus_path=req.corpus_path,
                model_id=req.model_id,
                epochs=req.epochs,
                max_source_len=req.max_source_len,
                max_target_len=req.max_target_len,
            )
        except CorpusError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        except DuplicateModelError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        return {"job_id": job.job_id, "model_id": job.model_id, "status": job.status,
                "epochs": req.epochs}

    @app.get("/v1/jobs/{job_id}")
    def job_status(job_id: str):
        try:
            return registry.job(job_id).as_dict()
        except UnknownJobError:
            raise HTTPException(status_code=404, detail=f"unknown job {job_id!r}")

    @app.post("/v1/generate")
    def generate(req: GenerateRequest):
        if not req.source.strip():
            raise HTTPException(status_code=422, detail="empty source")
        state = registry.model_state(req.model_id)
        if state == "unknown":
            raise HTTPException(status_code=404, detail=f"unknown model {req.model_id!r}")
        if state == "failed":
            raise HTTPException(
                status_code=404, detail=f"model {req.model_id!r} failed to fine-tune"
            )
        if state == "loading":
            raise HTTPException(status_code=503, detail=f"model {req.model_id!r} is loading")
        backend = registry.model(req.model_id)
        cap = req.max_tokens if req.max_tokens is not None else target_cap_for_mode(req.mode)
        # the separator is appended to the bare client source inside the
        # backend query, mirroring the corpus source format exactly
        text = backend.generate(req.source, max_tokens=cap)
        if not text:
            raise HTTPException(status_code=500, detail="backend produced empty text")
        return {"text": text, "model_id": req.model_id}

    return app


app = create_app()
