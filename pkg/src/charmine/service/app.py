"""FastAPI service wrapping the pipeline; the CLI is a thin client of it.

All operations are synchronous and filesystem-based: requests name input
manifests/checkpoints and output paths on the host running the service.
Invalid inputs map to HTTP 400, runtime failures to HTTP 500.
"""
from __future__ import annotations

from dataclasses import replace
from functools import wraps

from fastapi import FastAPI, HTTPException

from .. import __version__
from ..config import PipelineConfig, load_config
from ..data import load_detections, load_manifest, save_detections
from ..detector import TrainSchedule, load_checkpoint, save_checkpoint
from ..errors import CharmineError, TrainingError
from ..evaluate import eval_chars, eval_lines_by_image, pr_curve, plot_pr_curve, write_pr_csv, write_report
from ..lines import extract_lines, load_lines, save_lines
from ..mining import MiningConfig
from ..pipeline import (
    infer_manifest,
    mine_detections,
    pretrain_light,
    retrain_from_files,
    run_loop,
    save_mined,
    timing_report,
)
from ..synth import SceneSpec, make_benchmark
from . import schemas

app = FastAPI(
    title="charmine",
    version=__version__,
    description="Weakly supervised scene character detection pipeline",
)

_INPUT_ERRORS = (FileNotFoundError, IsADirectoryError, PermissionError)


def _translate_errors(fn):
    @wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except TrainingError as exc:
            raise HTTPException(status_code=500, detail=str(exc)) from exc
        except CharmineError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        except _INPUT_ERRORS as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
    return wrapper


def _config(req) -> PipelineConfig:
    return load_config(req.config_path, profile=req.profile)


def _schedule(base: TrainSchedule, seed, overrides=None) -> TrainSchedule:
    schedule = base
    if overrides is not None:
        if overrides.stages is not None:
            schedule = replace(schedule, stages=tuple(tuple(s) for s in overrides.stages))
        if overrides.batch_size is not None:
            schedule = replace(schedule, batch_size=overrides.batch_size)
        if overrides.seed is not None:
            schedule = replace(schedule, seed=overrides.seed)
    if seed is not None:
        schedule = replace(schedule, seed=seed)
    return schedule


@app.get("/health", response_model=schemas.HealthResponse)
def health():
    return schemas.HealthResponse(version=__version__)


@app.post("/synth", response_model=schemas.SynthResponse)
@_translate_errors
def synth(req: schemas.SynthRequest):
    cfg = _config(req)
    spec = cfg.synth
    updates = {}
    for name in ("image_size", "words_per_image", "chars_per_word",
                 "font_height", "clutter", "seed"):
        value = getattr(req, name)
        if value is not None:
            updates[name] = value
    if updates:
        spec = SceneSpec.from_dict({**spec.to_dict(), **updates})
    manifests = make_benchmark(spec, req.n_images, req.fractions, req.out_dir)
    return schemas.SynthResponse(
        manifests={split: f"{req.out_dir}/{split}.jsonl" for split in manifests},
        counts={split: len(m) for split, m in manifests.items()},
        image_dir=f"{req.out_dir}/images",
    )


@app.post("/pretrain", response_model=schemas.PretrainResponse)
@_translate_errors
def pretrain(req: schemas.PretrainRequest):
    cfg = _config(req)
    manifest = load_manifest(req.manifest)
    schedule = _schedule(cfg.pretrain, req.seed, req.overrides)
    model = pretrain_light(manifest, schedule, cfg)
    path = save_checkpoint(model, req.out)
    return schemas.PretrainResponse(
        checkpoint=str(path),
        initial_loss=model.meta["initial_loss"],
        final_loss=model.meta["final_loss"],
        iterations=model.meta["iterations"],
    )


@app.post("/infer", response_model=schemas.InferResponse)
@_translate_errors
def infer_endpoint(req: schemas.InferRequest):
    cfg = _config(req)
    model = load_checkpoint(req.checkpoint)
    manifest = load_manifest(req.manifest)
    test_size = req.test_size if req.test_size is not None else cfg.detector.test_size
    detections = infer_manifest(model, manifest, test_size)
    path = save_detections(detections, req.out)
    return schemas.InferResponse(
        detections=str(path),
        images=len(detections),
        candidates=sum(len(c) for c in detections.values()),
    )


@app.post("/mine", response_model=schemas.MineResponse)
@_translate_errors
def mine(req: schemas.MineRequest):
    cfg = _config(req)
    mining = cfg.mining
    updates = {name: getattr(req, name) for name in
               ("score_threshold", "weak_score_threshold", "t_x", "t_y")
               if getattr(req, name) is not None}
    if updates:
        mining = replace(mining, **updates)
    cfg = replace(cfg, mining=mining)
    detections = load_detections(req.detections)
    manifest = load_manifest(req.manifest)
    mined = mine_detections(detections, manifest, req.mode, cfg, req.round_index)
    path = save_mined(mined, req.out, cfg, req.mode, req.round_index)
    return schemas.MineResponse(
        mined=str(path),
        report=str(path.with_suffix(".report.json")),
        kept=len(mined),
        images=len({s.image_id for s in mined}),
    )


@app.post("/retrain", response_model=schemas.RetrainResponse)
@_translate_errors
def retrain(req: schemas.RetrainRequest):
    cfg = _config(req)
    if req.seed is not None:
        cfg = replace(cfg, retrain=replace(cfg.retrain, seed=req.seed))
    base = load_manifest(req.base_manifest)
    source = load_manifest(req.source_manifest)
    model, merged = retrain_from_files(base, req.mined, source, req.checkpoint,
                                       cfg, req.round_index, req.mode)
    path = save_checkpoint(model, req.out)
    return schemas.RetrainResponse(
        checkpoint=str(path),
        merged_records=len(merged),
        initial_loss=model.meta["initial_loss"],
        final_loss=model.meta["final_loss"],
    )


@app.post("/iterate", response_model=schemas.IterateResponse)
@_translate_errors
def iterate(req: schemas.IterateRequest):
    cfg = _config(req)
    loop = replace(cfg.loop, mode=req.mode, rounds=req.rounds)
    cfg = replace(cfg, loop=loop)
    if req.seed is not None:
        cfg = replace(cfg,
                      pretrain=replace(cfg.pretrain, seed=req.seed),
                      retrain=replace(cfg.retrain, seed=req.seed))
    result = run_loop(cfg,
                      load_manifest(req.base_manifest),
                      load_manifest(req.source_manifest),
                      load_manifest(req.test_manifest),
                      req.workdir)
    return schemas.IterateResponse(
        baseline_char=result.baseline_char.as_dict(),
        baseline_line=result.baseline_line.as_dict(),
        rounds=[schemas.RoundSummary(**r.as_dict()) for r in result.rounds],
        light_checkpoint=result.light_checkpoint,
    )


@app.post("/extract-lines", response_model=schemas.ExtractLinesResponse)
@_translate_errors
def extract_lines_endpoint(req: schemas.ExtractLinesRequest):
    cfg = _config(req)
    line_cfg = cfg.linegroup
    if req.conf_floor is not None:
        line_cfg = replace(line_cfg, conf_floor=req.conf_floor)
    detections = load_detections(req.detections)
    lines_by_image = {image_id: extract_lines(cands, line_cfg)
                      for image_id, cands in detections.items()}
    path = save_lines(lines_by_image, req.out)
    return schemas.ExtractLinesResponse(
        lines=str(path),
        images=len(lines_by_image),
        line_count=sum(len(v) for v in lines_by_image.values()),
    )


@app.post("/eval", response_model=schemas.EvalResponse)
@_translate_errors
def eval_endpoint(req: schemas.EvalRequest):
    cfg = _config(req)
    iou_min = req.iou_min if req.iou_min is not None else cfg.eval.iou_min
    gate = (req.operating_threshold if req.operating_threshold is not None
            else cfg.eval.operating_threshold)
    manifest = load_manifest(req.manifest)
    pr_csv = pr_plot = None
    if req.level == "char":
        if not req.detections:
            raise HTTPException(status_code=400, detail="char eval needs detections")
        detections = load_detections(req.detections)
        gts = {r.image_id: [a.box for a in r.char_annotations] for r in manifest.records}
        scores = eval_chars(detections, gts, iou_min, gate)
        if req.pr_curve_out:
            points = pr_curve(detections, gts, iou_min)
            pr_csv = str(write_pr_csv(points, req.pr_curve_out))
            plot_path = str(req.pr_curve_out).rsplit(".", 1)[0] + ".png"
            pr_plot = str(plot_pr_curve(points, plot_path))
    else:
        if not req.lines:
            raise HTTPException(status_code=400, detail="line eval needs lines")
        lines_by_image = load_lines(req.lines)
        gts = {r.image_id: list(r.weak_annotations.boxes) for r in manifest.records}
        scores = eval_lines_by_image(lines_by_image, gts, iou_min)
    report_path = None
    if req.out:
        report_path = str(write_report(
            req.out, dataset=manifest.name, model_checkpoint=req.checkpoint,
            level=req.level, scores=scores,
            operating_threshold=gate if req.level == "char" else None,
        ))
    return schemas.EvalResponse(
        level=req.level,
        precision=scores.precision,
        recall=scores.recall,
        fscore=scores.fscore,
        tp=scores.tp,
        fp=scores.fp,
        fn=scores.fn,
        report=report_path,
        pr_curve_csv=pr_csv,
        pr_curve_plot=pr_plot,
    )


@app.post("/timing", response_model=schemas.TimingResponse)
@_translate_errors
def timing(req: schemas.TimingRequest):
    cfg = _config(req)
    if req.test_size is not None:
        cfg = replace(cfg, detector=replace(cfg.detector, test_size=req.test_size))
    model = load_checkpoint(req.checkpoint)
    manifest = load_manifest(req.manifest)
    return schemas.TimingResponse(**timing_report(model, manifest, cfg))
