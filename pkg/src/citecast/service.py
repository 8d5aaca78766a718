"""Stateless HTTP service for single-paper predictions.

One POST /predict call assembles the same prompt the batch pipeline
would build and runs it through the configured backend. Nothing is
persisted between requests, and request fields are never logged, so the
service can be scaled or restarted freely.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field as dataclass_field

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, Field, field_validator

from citecast import __version__
from citecast.backends import (
    BackendConfig,
    PredictionFailed,
    Transport,
    make_transport,
    predict_one,
)
from citecast.corpus import CorpusError, PaperRecord
from citecast.prompting import TemplateError, TemplateStore, assemble, load_templates

DISCLAIMER = (
    "Automated estimate based only on publication-time text. It is not a "
    "measure of scientific quality or validity, and it must not be used as "
    "the basis for hiring, funding, or editorial decisions."
)

YEAR_MIN_DEFAULT = 1991
YEAR_MAX_DEFAULT = 2100


@dataclass
class ServiceSettings:
    """Everything the app factory needs, resolved ahead of time.

    The default backend is the offline mock so the service runs without
    credentials; point endpoint at a real URL for live predictions.
    """

    backend: BackendConfig = dataclass_field(
        default_factory=lambda: BackendConfig(name="mock", endpoint="mock")
    )
    template_dir: str | None = None
    year_min: int = YEAR_MIN_DEFAULT
    year_max: int = YEAR_MAX_DEFAULT
    seed: int = 0
    positive_bias: float = 0.5
    flip_rate: float = 0.0


class PredictRequest(BaseModel):
    title: str
    abstract: str = ""
    keywords: list[str] = Field(default_factory=list)
    year: int
    journal: str

    @field_validator("title")
    @classmethod
    def title_nonempty(cls, value: str) -> str:
        if not value.strip():
            raise ValueError("title must be nonempty")
        return value.strip()

    @field_validator("journal")
    @classmethod
    def journal_nonempty(cls, value: str) -> str:
        if not value.strip():
            raise ValueError("journal must be nonempty")
        return value.strip()

    @field_validator("keywords")
    @classmethod
    def keywords_clean(cls, value: list[str]) -> list[str]:
        return [k.strip() for k in value if k.strip()]


class PredictResponse(BaseModel):
    verdict: str
    group: str
    backend: str
    template_version: str
    disclaimer: str


class HealthResponse(BaseModel):
    status: str
    backend: str
    template_version: str
    uptime_seconds: float
    version: str


def create_app(settings: ServiceSettings | None = None) -> FastAPI:
    """Build the app with templates and transport resolved once."""
    settings = settings or ServiceSettings()
    store: TemplateStore | None
    try:
        store = load_templates(settings.template_dir)
    except TemplateError:
        # Keep the app bootable so health can say "degraded" instead of
        # the process dying at import time.
        store = None
    transport: Transport = make_transport(
        settings.backend,
        seed=settings.seed,
        positive_bias=settings.positive_bias,
        flip_rate=settings.flip_rate,
    )
    started = time.monotonic()

    app = FastAPI(title="citecast", version=__version__)
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(
            status="ok" if store is not None else "degraded",
            backend=settings.backend.name,
            template_version=store.version if store is not None else "unavailable",
            uptime_seconds=round(time.monotonic() - started, 3),
            version=__version__,
        )

    @app.post("/predict", response_model=PredictResponse)
    def predict(request: PredictRequest) -> PredictResponse:
        if store is None:
            raise HTTPException(status_code=503, detail="templates unavailable")
        if not (settings.year_min <= request.year <= settings.year_max):
            raise HTTPException(
                status_code=422,
                detail=(
                    f"year must be between {settings.year_min} "
                    f"and {settings.year_max}"
                ),
            )
        try:
            record = PaperRecord(
                record_id="live-request",
                title=request.title,
                abstract=request.abstract.strip(),
                keywords=tuple(request.keywords),
                journal=request.journal,
                year=request.year,
            )
            bundle = assemble(record, store)
        except (CorpusError, TemplateError) as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        try:
            prediction = predict_one(bundle, settings.backend, transport)
        except PredictionFailed as exc:
            # Deliberately vague: backend internals stay out of responses.
            raise HTTPException(
                status_code=502, detail="prediction backend unavailable"
            ) from exc
        return PredictResponse(
            verdict=prediction.verdict.value,
            group=bundle.group.key,
            backend=settings.backend.name,
            template_version=bundle.template_version,
            disclaimer=DISCLAIMER,
        )

    return app
