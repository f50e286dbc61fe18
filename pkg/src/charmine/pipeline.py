"""The self-training loop: pretrain, mine, merge, retrain, evaluate.

Each round applies the latest detector to the unannotated or weakly
annotated source set, filters candidates into pseudo-positives, merges
them with the annotated base set, and retrains. Retraining initializes
from the light model by default (config-switchable to the previous
round's weights); searching always uses the latest model.
"""
from __future__ import annotations

import json
import logging
import os
import time
from dataclasses import dataclass, replace
from pathlib import Path

from .config import PipelineConfig, save_config
from .data import (
    CharCandidate,
    DatasetManifest,
    load_detections,
    save_detections,
)
from .detector import (
    DetectorModel,
    TrainSchedule,
    infer,
    load_checkpoint,
    new_net,
    save_checkpoint,
    train,
)
from .errors import LockError, ValidationError
from .evaluate import EvalScores, eval_chars, eval_lines_by_image
from .imgio import load_image
from .lines import FlowGraphConfig, extract_lines
from .mining import MinedSample, mine_semi, mine_weak, merge_training_set

logger = logging.getLogger(__name__)


def pretrain_light(full_manifest: DatasetManifest, schedule: TrainSchedule,
                   cfg: PipelineConfig) -> DetectorModel:
    """Train the light model on the small fully annotated set (round 0)."""
    net = new_net(cfg.detector.anchors, cfg.detector.input_size,
                  cfg.detector.widths, seed=schedule.seed)
    init = DetectorModel(net, cfg.detector.anchors, cfg.detector.input_size,
                         {"round": 0, "parent_checkpoint": None})
    return train(init, full_manifest, schedule)


def infer_manifest(model: DetectorModel, manifest: DatasetManifest,
                   test_size: int) -> dict[str, list[CharCandidate]]:
    """Run detection over every image of a manifest, in manifest order."""
    out = {}
    for record in manifest.records:
        image = load_image(record.image_path)
        out[record.image_id] = infer(model, image, test_size)
    return out


def mine_detections(detections: dict[str, list[CharCandidate]],
                    source_manifest: DatasetManifest, mode: str,
                    cfg: PipelineConfig, round_index: int = 1) -> list[MinedSample]:
    """Apply the mode's mining filter image by image.

    Semi mode never reads word boxes; weak mode reads only word boxes.
    """
    mined: list[MinedSample] = []
    for record in source_manifest.records:
        candidates = detections.get(record.image_id, [])
        if mode == "semi":
            mined.extend(mine_semi(candidates, cfg.mining,
                                   image_id=record.image_id, round_index=round_index))
        elif mode == "weak":
            mined.extend(mine_weak(candidates, record.weak_annotations, cfg.mining,
                                   image_id=record.image_id, round_index=round_index))
        else:
            raise ValidationError(f"unknown mining mode {mode!r}")
    return mined


def mined_to_detections(mined: list[MinedSample]) -> dict[str, list[CharCandidate]]:
    out: dict[str, list[CharCandidate]] = {}
    for sample in mined:
        out.setdefault(sample.image_id, []).append(
            CharCandidate(sample.box, min(1.0, max(0.0, sample.score))))
    return out


def save_mined(mined: list[MinedSample], path, cfg: PipelineConfig,
               mode: str, round_index: int) -> Path:
    """Standard detections dump plus a sidecar mining report."""
    path = save_detections(mined_to_detections(mined), path)
    report = {
        "mode": mode,
        "round": round_index,
        "config": {
            "score_threshold": cfg.mining.score_threshold,
            "weak_score_threshold": cfg.mining.weak_score_threshold,
            "t_x": cfg.mining.t_x,
            "t_y": cfg.mining.t_y,
        },
        "total": len(mined),
        "counts_per_image": {
            image_id: len(c) for image_id, c in mined_to_detections(mined).items()
        },
    }
    report_path = path.with_suffix(".report.json")
    with report_path.open("w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def evaluate_model(model: DetectorModel, test_manifest: DatasetManifest,
                   cfg: PipelineConfig) -> dict:
    """Char- and line-level scores of a model on a held-out manifest."""
    detections = infer_manifest(model, test_manifest, cfg.detector.test_size)
    char_gts = {r.image_id: [a.box for a in r.char_annotations]
                for r in test_manifest.records}
    char_scores = eval_chars(detections, char_gts, cfg.eval.iou_min,
                             cfg.eval.operating_threshold)
    line_gts = {r.image_id: list(r.weak_annotations.boxes)
                for r in test_manifest.records}
    lines_by_image = {image_id: extract_lines(dets, cfg.linegroup)
                      for image_id, dets in detections.items()}
    line_scores = eval_lines_by_image(lines_by_image, line_gts, cfg.eval.iou_min)
    return {"char": char_scores, "line": line_scores, "detections": detections}


@dataclass
class RoundResult:
    round: int
    mined_count: int
    mined_images: int
    char_eval: EvalScores
    line_eval: EvalScores
    checkpoint_path: str | None = None
    mined_path: str | None = None

    def as_dict(self) -> dict:
        return {
            "round": self.round,
            "mined_count": self.mined_count,
            "mined_images": self.mined_images,
            "char_eval": self.char_eval.as_dict(),
            "line_eval": self.line_eval.as_dict(),
            "checkpoint_path": self.checkpoint_path,
            "mined_path": self.mined_path,
        }


@dataclass
class LoopResult:
    baseline_char: EvalScores
    baseline_line: EvalScores
    rounds: list[RoundResult]
    light_checkpoint: str

    def as_dict(self) -> dict:
        return {
            "baseline_char": self.baseline_char.as_dict(),
            "baseline_line": self.baseline_line.as_dict(),
            "rounds": [r.as_dict() for r in self.rounds],
            "light_checkpoint": self.light_checkpoint,
        }


def run_round(model: DetectorModel, light_model: DetectorModel,
              base_manifest: DatasetManifest, source_manifest: DatasetManifest,
              mode: str, cfg: PipelineConfig, round_index: int,
              retrain_schedule: TrainSchedule | None = None
              ) -> tuple[list[MinedSample], DetectorModel]:
    """One search-and-retrain round; empty mined set leaves the model as is."""
    overlap = base_manifest.ids() & source_manifest.ids()
    if overlap:
        raise ValidationError(
            f"source images overlap the base set: {sorted(overlap)[:3]}..."
        )
    detections = infer_manifest(model, source_manifest, cfg.detector.test_size)
    mined = mine_detections(detections, source_manifest, mode, cfg, round_index)
    if not mined:
        logger.warning("round %d mined no samples; retraining skipped", round_index)
        return [], model
    merged = merge_training_set(base_manifest, mined, source_manifest)
    schedule = retrain_schedule if retrain_schedule is not None else cfg.retrain
    init = light_model if cfg.loop.init_from == "light" else model
    new_model = train(init, merged, schedule)
    new_model.meta["round"] = round_index
    return mined, new_model


class _WorkdirLock:
    def __init__(self, workdir: Path):
        self.path = Path(workdir) / ".lock"

    def __enter__(self):
        self.path.parent.mkdir(parents=True, exist_ok=True)
        try:
            fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise LockError(f"another run owns {self.path.parent} "
                            f"(remove {self.path} if stale)") from None
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        return self

    def __exit__(self, *exc):
        self.path.unlink(missing_ok=True)
        return False


def run_loop(cfg: PipelineConfig, base_manifest: DatasetManifest,
             source_manifest: DatasetManifest, test_manifest: DatasetManifest,
             workdir) -> LoopResult:
    """Full self-training loop with per-round held-out evaluation.

    Stops early when the mined-set size changes by less than the configured
    fraction between consecutive rounds.
    """
    workdir = Path(workdir)
    with _WorkdirLock(workdir):
        save_config(cfg, workdir / "config.ini")
        ckpt_dir = workdir / "checkpoints"
        light = pretrain_light(base_manifest, cfg.pretrain, cfg)
        light_path = save_checkpoint(light, ckpt_dir / "light.pt")
        baseline = evaluate_model(light, test_manifest, cfg)
        _write_round_report(workdir, 0, baseline, None)

        model = light
        model_path = light_path
        rounds: list[RoundResult] = []
        previous_count: int | None = None
        for round_index in range(1, cfg.loop.rounds + 1):
            detections = infer_manifest(model, source_manifest, cfg.detector.test_size)
            mined = mine_detections(detections, source_manifest, cfg.loop.mode,
                                    cfg, round_index)
            count = len(mined)
            if previous_count is not None:
                change = abs(count - previous_count) / max(previous_count, 1)
                if change < cfg.loop.early_stop_fraction:
                    logger.info("round %d mined %d (previous %d, change %.3f%%); stopping",
                                round_index, count, previous_count, 100 * change)
                    break
            previous_count = count
            mined_path = None
            if mined:
                mined_path = str(save_mined(mined, workdir / "mined" / f"round_{round_index}.jsonl",
                                            cfg, cfg.loop.mode, round_index))
                merged = merge_training_set(base_manifest, mined, source_manifest)
                init = light if cfg.loop.init_from == "light" else model
                new_model = train(init, merged, cfg.retrain)
                new_model.meta["round"] = round_index
                new_model.meta["parent_checkpoint"] = str(model_path)
                if cfg.loop.init_from == "light":
                    new_model.meta["init_checkpoint"] = str(light_path)
                model_path = save_checkpoint(new_model,
                                             ckpt_dir / f"round_{round_index}.pt")
                model = new_model
            else:
                logger.warning("round %d mined no samples; retraining skipped",
                               round_index)
            scores = evaluate_model(model, test_manifest, cfg)
            _write_round_report(workdir, round_index, scores, mined_path)
            rounds.append(RoundResult(
                round=round_index,
                mined_count=count,
                mined_images=len({s.image_id for s in mined}),
                char_eval=scores["char"],
                line_eval=scores["line"],
                checkpoint_path=str(model_path),
                mined_path=mined_path,
            ))
        return LoopResult(baseline["char"], baseline["line"], rounds, str(light_path))


def _write_round_report(workdir: Path, round_index: int, scores: dict,
                        mined_path: str | None):
    report_dir = workdir / "reports"
    report_dir.mkdir(parents=True, exist_ok=True)
    payload = {
        "round": round_index,
        "char_eval": scores["char"].as_dict(),
        "line_eval": scores["line"].as_dict(),
        "mined_path": mined_path,
    }
    with (report_dir / f"round_{round_index}.json").open("w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def timing_report(model: DetectorModel, manifest: DatasetManifest,
                  cfg: PipelineConfig) -> dict:
    """Mean wall-clock seconds per image for detection and line extraction."""
    if len(manifest) == 0:
        raise ValidationError("timing needs a non-empty manifest")
    detect_total = 0.0
    lines_total = 0.0
    for record in manifest.records:
        image = load_image(record.image_path)
        t0 = time.perf_counter()
        candidates = infer(model, image, cfg.detector.test_size)
        t1 = time.perf_counter()
        extract_lines(candidates, cfg.linegroup)
        t2 = time.perf_counter()
        detect_total += t1 - t0
        lines_total += t2 - t1
    n = len(manifest)
    return {
        "images": n,
        "mean_detect_s": detect_total / n,
        "mean_lines_s": lines_total / n,
        # published per-image means on full-scale hardware, for comparison
        "reference_detect_s": 0.19,
        "reference_lines_s": 0.13,
    }


def load_model(path) -> DetectorModel:
    return load_checkpoint(path)


def retrain_from_files(base_manifest: DatasetManifest, mined_path,
                       source_manifest: DatasetManifest, light_checkpoint,
                       cfg: PipelineConfig, round_index: int = 1,
                       source_tier: str | None = None) -> tuple[DetectorModel, DatasetManifest]:
    """Rebuild mined samples from a dump and retrain from the light model."""
    detections = load_detections(mined_path)
    tier = source_tier or cfg.loop.mode
    mined = [
        MinedSample(image_id, c.box, c.score, tier, round_index)
        for image_id, cands in detections.items()
        for c in cands
    ]
    merged = merge_training_set(base_manifest, mined, source_manifest)
    light = load_checkpoint(light_checkpoint)
    model = train(light, merged, cfg.retrain)
    model.meta["round"] = round_index
    model.meta["parent_checkpoint"] = str(light_checkpoint)
    return model, merged
