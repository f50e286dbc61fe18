"""Request/response models for the pipeline service.

Operations work on server-side file paths: requests carry paths and
parameter overrides, responses carry output paths and summary metrics.
"""
from __future__ import annotations

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    status: str = "ok"
    version: str


class SynthRequest(BaseModel):
    out_dir: str
    n_images: int = 1250
    fractions: tuple[float, float, float] = (0.04, 0.4, 0.4)
    image_size: int | None = None
    words_per_image: tuple[int, int] | None = None
    chars_per_word: tuple[int, int] | None = None
    font_height: tuple[int, int] | None = None
    clutter: float | None = None
    seed: int | None = None
    config_path: str | None = None
    profile: str = "desk"


class SynthResponse(BaseModel):
    manifests: dict[str, str]
    counts: dict[str, int]
    image_dir: str


class TrainOverrides(BaseModel):
    stages: list[tuple[int, float]] | None = None
    batch_size: int | None = None
    seed: int | None = None


class PretrainRequest(BaseModel):
    manifest: str
    out: str
    config_path: str | None = None
    profile: str = "desk"
    seed: int | None = None
    overrides: TrainOverrides | None = None


class PretrainResponse(BaseModel):
    checkpoint: str
    initial_loss: float
    final_loss: float
    iterations: int


class InferRequest(BaseModel):
    checkpoint: str
    manifest: str
    out: str
    test_size: int | None = None
    config_path: str | None = None
    profile: str = "desk"


class InferResponse(BaseModel):
    detections: str
    images: int
    candidates: int


class MineRequest(BaseModel):
    detections: str
    manifest: str
    mode: str = Field(pattern="^(semi|weak)$")
    out: str
    round_index: int = 1
    config_path: str | None = None
    profile: str = "desk"
    score_threshold: float | None = None
    weak_score_threshold: float | None = None
    t_x: float | None = None
    t_y: float | None = None


class MineResponse(BaseModel):
    mined: str
    report: str
    kept: int
    images: int


class RetrainRequest(BaseModel):
    base_manifest: str
    mined: str
    source_manifest: str
    checkpoint: str   # light model to initialize from
    out: str
    mode: str = Field(default="weak", pattern="^(semi|weak)$")
    round_index: int = 1
    config_path: str | None = None
    profile: str = "desk"
    seed: int | None = None


class RetrainResponse(BaseModel):
    checkpoint: str
    merged_records: int
    initial_loss: float
    final_loss: float


class IterateRequest(BaseModel):
    base_manifest: str
    source_manifest: str
    test_manifest: str
    workdir: str
    mode: str = Field(default="weak", pattern="^(semi|weak)$")
    rounds: int = 1
    config_path: str | None = None
    profile: str = "desk"
    seed: int | None = None


class RoundSummary(BaseModel):
    round: int
    mined_count: int
    mined_images: int
    char_eval: dict
    line_eval: dict
    checkpoint_path: str | None
    mined_path: str | None


class IterateResponse(BaseModel):
    baseline_char: dict
    baseline_line: dict
    rounds: list[RoundSummary]
    light_checkpoint: str


class ExtractLinesRequest(BaseModel):
    detections: str
    out: str
    config_path: str | None = None
    profile: str = "desk"
    conf_floor: float | None = None


class ExtractLinesResponse(BaseModel):
    lines: str
    images: int
    line_count: int


class EvalRequest(BaseModel):
    level: str = Field(pattern="^(char|line)$")
    detections: str | None = None   # char level
    lines: str | None = None        # line level
    manifest: str
    out: str | None = None
    pr_curve_out: str | None = None   # csv path; plot saved beside it
    checkpoint: str = ""
    config_path: str | None = None
    profile: str = "desk"
    iou_min: float | None = None
    operating_threshold: float | None = None


class EvalResponse(BaseModel):
    level: str
    precision: float
    recall: float
    fscore: float
    tp: int
    fp: int
    fn: int
    report: str | None = None
    pr_curve_csv: str | None = None
    pr_curve_plot: str | None = None


class TimingRequest(BaseModel):
    checkpoint: str
    manifest: str
    test_size: int | None = None
    config_path: str | None = None
    profile: str = "desk"


class TimingResponse(BaseModel):
    images: int
    mean_detect_s: float
    mean_lines_s: float
    reference_detect_s: float
    reference_lines_s: float
