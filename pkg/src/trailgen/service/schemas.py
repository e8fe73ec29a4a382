"""Pydantic request/response models for the HTTP service."""

from __future__ import annotations

from typing import Any, Literal, Optional

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    status: Literal["ok"] = "ok"
    version: str


class ProviderRequest(BaseModel):
    """The provider wire envelope (one route per kind)."""

    kind: str
    template_id: Optional[str] = None
    payload: dict[str, Any] = Field(default_factory=dict)


class ProviderResponse(BaseModel):
    ok: bool
    payload: dict[str, Any] = Field(default_factory=dict)
    error: Optional[str] = None


class SurveyRowIn(BaseModel):
    participant: str
    movie: str
    method: str
    appropriateness: int
    attractiveness: int
    interest: int


class SurveyRequest(BaseModel):
    rows: list[SurveyRowIn]


class SurveyTotal(BaseModel):
    participant: str
    movie: str
    method: str
    total: int


class SurveyRejected(BaseModel):
    line: int
    reason: str


class SurveyResponse(BaseModel):
    n_rows: int
    totals: list[SurveyTotal]
    winner_counts: dict[str, dict[str, int]]
    means: dict[str, dict[str, float]]
    medians: dict[str, dict[str, float]]
    rejected: list[SurveyRejected]


class JobRequest(BaseModel):
    """A pipeline run: the full run config plus stage selection."""

    config: dict[str, Any]
    stages: Optional[list[str]] = None


class JobOutputs(BaseModel):
    trailer_path: Optional[str] = None
    log_path: Optional[str] = None
    duration_s: Optional[float] = None


class JobStatus(BaseModel):
    job_id: str
    status: Literal["queued", "running", "done", "failed"]
    stages: list[str]
    warnings: list[str] = Field(default_factory=list)
    outputs: JobOutputs = Field(default_factory=JobOutputs)
    error: Optional[str] = None
