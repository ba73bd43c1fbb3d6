"""Request and response bodies for the HTTP service."""

from __future__ import annotations

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    status: str
    version: str


class DistillRequest(BaseModel):
    manifest: dict
    out_dir: str


class DistillResponse(BaseModel):
    out_dir: str
    mode: str
    total_steps: int
    kappa_per_class: list[float]
    probe_accuracy: float
    files: list[str]


class PhRequest(BaseModel):
    points_csv: str
    k: int = 10
    eps_max: float | None = None
    out_dir: str
    pi_grid: int = 32
    sigma_pi: float = 0.05


class PhResponse(BaseModel):
    out_dir: str
    eps_max: float
    h0_count: int
    h1_count: int
    h1_bars: list[list[float]]
    files: list[str]


class RetrieveRequest(BaseModel):
    manifest: dict
    class_id: int = Field(ge=0)
    image_index: int = Field(ge=0)


class CandidateScore(BaseModel):
    index: int
    source_image: int
    score: float
    fit_sq: float
    complexity: float


class RetrieveResponse(BaseModel):
    class_id: int
    image_index: int
    lambda_fit: float
    chosen_index: int
    chosen_source: int
    chosen_score: float
    candidates: list[CandidateScore]


class AnalyzeRequest(BaseModel):
    run_dir: str


class AnalyzeResponse(BaseModel):
    run_dir: str
    mode: str
    kappa_recorded: list[float]
    kappa_recomputed: list[float]
    contraction_ratios: list[float]
    fit_gap_delta: float
    probe_accuracy: float


class GenToyRequest(BaseModel):
    kind: str
    out_path: str
    n_per_class: int | None = None
    seed: int = 0
    side: int = 16


class GenToyResponse(BaseModel):
    path: str
    image_count: int
    class_count: int
    height: int
    width: int
    channels: int


class VerifyRequest(BaseModel):
    quick: bool = False


class SuiteReport(BaseModel):
    name: str
    passed: bool
    detail: str


class VerifyResponse(BaseModel):
    passed: bool
    suites: list[SuiteReport]
