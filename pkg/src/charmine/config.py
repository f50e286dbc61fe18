"""Pipeline configuration: flat key-value sections, one per module.

Two built-in profiles: "desk" (small backbone, 96px scenes, short
schedules) and "paper" (512px training / 600px test inputs and the
published full-scale schedules). Any value can be overridden from an INI
file; the effective config is persisted beside every artifact output.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace
from pathlib import Path

from .detector.anchors import AnchorConfig, AnchorLevel
from .detector.net import DEFAULT_WIDTHS, default_anchor_config
from .detector.training import TrainSchedule
from .errors import FormatError, ValidationError
from .lines import FlowGraphConfig
from .mining import MiningConfig
from .synth import SceneSpec


@dataclass(frozen=True)
class DetectorSettings:
    input_size: int = 96
    test_size: int = 96
    widths: tuple[int, ...] = DEFAULT_WIDTHS
    anchors: AnchorConfig = field(default_factory=lambda: default_anchor_config(96))


@dataclass(frozen=True)
class LoopSettings:
    mode: str = "weak"
    rounds: int = 1
    early_stop_fraction: float = 0.01
    init_from: str = "light"   # "light" or "previous"

    def __post_init__(self):
        if self.mode not in ("semi", "weak"):
            raise ValidationError(f"loop mode {self.mode!r} not in {{semi, weak}}")
        if self.rounds < 1:
            raise ValidationError("rounds must be >= 1")
        if self.init_from not in ("light", "previous"):
            raise ValidationError(f"init_from {self.init_from!r} not in {{light, previous}}")


@dataclass(frozen=True)
class EvalSettings:
    iou_min: float = 0.5
    operating_threshold: float = 0.05


@dataclass(frozen=True)
class PipelineConfig:
    synth: SceneSpec = SceneSpec()
    detector: DetectorSettings = DetectorSettings()
    mining: MiningConfig = MiningConfig()
    linegroup: FlowGraphConfig = FlowGraphConfig()
    pretrain: TrainSchedule = TrainSchedule(stages=((700, 0.005), (300, 0.001)),
                                            batch_size=16)
    retrain: TrainSchedule = TrainSchedule(stages=((500, 0.005), (250, 0.001)),
                                           batch_size=16)
    loop: LoopSettings = LoopSettings()
    eval: EvalSettings = EvalSettings()


def desk_config() -> PipelineConfig:
    return PipelineConfig()


def paper_config() -> PipelineConfig:
    """The published full-scale operating point."""
    return PipelineConfig(
        synth=SceneSpec(image_size=512, font_height=(16, 64)),
        detector=DetectorSettings(input_size=512, test_size=600,
                                  anchors=default_anchor_config(512)),
        pretrain=TrainSchedule(stages=((10000, 1e-3), (5000, 1e-4)), batch_size=32),
        retrain=TrainSchedule(stages=((10000, 1e-3), (3000, 1e-4), (2000, 1e-5)),
                              batch_size=32),
    )


PROFILES = {"desk": desk_config, "paper": paper_config}


def _fmt_anchors(config: AnchorConfig) -> str:
    return " ; ".join(
        "{}|{}|{}".format(
            lvl.feature_map_size,
            ",".join(repr(s) for s in lvl.anchor_scales),
            ",".join(repr(r) for r in lvl.aspect_ratios),
        )
        for lvl in config.levels
    )


def _parse_anchors(text: str) -> AnchorConfig:
    levels = []
    for part in text.split(";"):
        fields = part.strip().split("|")
        if len(fields) != 3:
            raise FormatError(f"bad anchor level {part.strip()!r}")
        levels.append(AnchorLevel(
            int(fields[0]),
            tuple(float(v) for v in fields[1].split(",")),
            tuple(float(v) for v in fields[2].split(",")),
        ))
    return AnchorConfig(tuple(levels))


def _fmt_stages(schedule: TrainSchedule) -> str:
    return ", ".join(f"{iters}@{lr!r}" for iters, lr in schedule.stages)


def _parse_stages(text: str) -> tuple[tuple[int, float], ...]:
    stages = []
    for part in text.split(","):
        iters, _, lr = part.strip().partition("@")
        stages.append((int(iters), float(lr)))
    return tuple(stages)


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(","))


def _int_pair(text: str) -> tuple[int, int]:
    a, b = _ints(text)
    return (a, b)


def save_config(cfg: PipelineConfig, path) -> Path:
    parser = configparser.ConfigParser()
    parser["synth"] = {
        "image_size": str(cfg.synth.image_size),
        "words_per_image": f"{cfg.synth.words_per_image[0]},{cfg.synth.words_per_image[1]}",
        "chars_per_word": f"{cfg.synth.chars_per_word[0]},{cfg.synth.chars_per_word[1]}",
        "font_height": f"{cfg.synth.font_height[0]},{cfg.synth.font_height[1]}",
        "clutter": repr(cfg.synth.clutter),
        "seed": str(cfg.synth.seed),
    }
    parser["detector"] = {
        "input_size": str(cfg.detector.input_size),
        "test_size": str(cfg.detector.test_size),
        "widths": ",".join(str(w) for w in cfg.detector.widths),
        "anchors": _fmt_anchors(cfg.detector.anchors),
    }
    parser["mining"] = {
        "score_threshold": repr(cfg.mining.score_threshold),
        "weak_score_threshold": repr(cfg.mining.weak_score_threshold),
        "t_x": repr(cfg.mining.t_x),
        "t_y": repr(cfg.mining.t_y),
    }
    parser["linegroup"] = {
        "entry_cost": repr(cfg.linegroup.entry_cost),
        "exit_cost": repr(cfg.linegroup.exit_cost),
        "data_cost_scale": repr(cfg.linegroup.data_cost_scale),
        "w_dist": repr(cfg.linegroup.w_dist),
        "w_scale": repr(cfg.linegroup.w_scale),
        "w_vert": repr(cfg.linegroup.w_vert),
        "max_pair_gap": repr(cfg.linegroup.max_pair_gap),
        "conf_floor": repr(cfg.linegroup.conf_floor),
    }
    for section, schedule in (("train.pretrain", cfg.pretrain),
                              ("train.retrain", cfg.retrain)):
        parser[section] = {
            "stages": _fmt_stages(schedule),
            "batch_size": str(schedule.batch_size),
            "momentum": repr(schedule.momentum),
            "weight_decay": repr(schedule.weight_decay),
            "seed": str(schedule.seed),
        }
    parser["loop"] = {
        "mode": cfg.loop.mode,
        "rounds": str(cfg.loop.rounds),
        "early_stop_fraction": repr(cfg.loop.early_stop_fraction),
        "init_from": cfg.loop.init_from,
    }
    parser["eval"] = {
        "iou_min": repr(cfg.eval.iou_min),
        "operating_threshold": repr(cfg.eval.operating_threshold),
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        parser.write(fh)
    return path


def _schedule_from_section(sec, base: TrainSchedule) -> TrainSchedule:
    return TrainSchedule(
        stages=_parse_stages(sec["stages"]) if "stages" in sec else base.stages,
        batch_size=sec.getint("batch_size", base.batch_size),
        momentum=sec.getfloat("momentum", base.momentum),
        weight_decay=sec.getfloat("weight_decay", base.weight_decay),
        seed=sec.getint("seed", base.seed),
    )


def load_config(path=None, profile: str = "desk") -> PipelineConfig:
    """Profile defaults, optionally overridden by an INI file."""
    if profile not in PROFILES:
        raise ValidationError(f"unknown profile {profile!r}; choose from {sorted(PROFILES)}")
    cfg = PROFILES[profile]()
    if path is None:
        return cfg
    parser = configparser.ConfigParser()
    read = parser.read(str(path))
    if not read:
        raise FormatError(f"config file {path} not found or unreadable")
    if parser.has_section("synth"):
        sec = parser["synth"]
        cfg = replace(cfg, synth=SceneSpec(
            image_size=sec.getint("image_size", cfg.synth.image_size),
            words_per_image=_int_pair(sec.get(
                "words_per_image", f"{cfg.synth.words_per_image[0]},{cfg.synth.words_per_image[1]}")),
            chars_per_word=_int_pair(sec.get(
                "chars_per_word", f"{cfg.synth.chars_per_word[0]},{cfg.synth.chars_per_word[1]}")),
            font_height=_int_pair(sec.get(
                "font_height", f"{cfg.synth.font_height[0]},{cfg.synth.font_height[1]}")),
            clutter=sec.getfloat("clutter", cfg.synth.clutter),
            seed=sec.getint("seed", cfg.synth.seed),
        ))
    if parser.has_section("detector"):
        sec = parser["detector"]
        input_size = sec.getint("input_size", cfg.detector.input_size)
        anchors = (_parse_anchors(sec["anchors"]) if "anchors" in sec
                   else default_anchor_config(input_size))
        cfg = replace(cfg, detector=DetectorSettings(
            input_size=input_size,
            test_size=sec.getint("test_size", input_size),
            widths=_ints(sec["widths"]) if "widths" in sec else cfg.detector.widths,
            anchors=anchors,
        ))
    if parser.has_section("mining"):
        sec = parser["mining"]
        cfg = replace(cfg, mining=MiningConfig(
            score_threshold=sec.getfloat("score_threshold", cfg.mining.score_threshold),
            weak_score_threshold=sec.getfloat("weak_score_threshold",
                                              cfg.mining.weak_score_threshold),
            t_x=sec.getfloat("t_x", cfg.mining.t_x),
            t_y=sec.getfloat("t_y", cfg.mining.t_y),
        ))
    if parser.has_section("linegroup"):
        sec = parser["linegroup"]
        base = cfg.linegroup
        cfg = replace(cfg, linegroup=FlowGraphConfig(
            entry_cost=sec.getfloat("entry_cost", base.entry_cost),
            exit_cost=sec.getfloat("exit_cost", base.exit_cost),
            data_cost_scale=sec.getfloat("data_cost_scale", base.data_cost_scale),
            w_dist=sec.getfloat("w_dist", base.w_dist),
            w_scale=sec.getfloat("w_scale", base.w_scale),
            w_vert=sec.getfloat("w_vert", base.w_vert),
            max_pair_gap=sec.getfloat("max_pair_gap", base.max_pair_gap),
            conf_floor=sec.getfloat("conf_floor", base.conf_floor),
        ))
    if parser.has_section("train.pretrain"):
        cfg = replace(cfg, pretrain=_schedule_from_section(parser["train.pretrain"],
                                                           cfg.pretrain))
    if parser.has_section("train.retrain"):
        cfg = replace(cfg, retrain=_schedule_from_section(parser["train.retrain"],
                                                          cfg.retrain))
    if parser.has_section("loop"):
        sec = parser["loop"]
        cfg = replace(cfg, loop=LoopSettings(
            mode=sec.get("mode", cfg.loop.mode),
            rounds=sec.getint("rounds", cfg.loop.rounds),
            early_stop_fraction=sec.getfloat("early_stop_fraction",
                                             cfg.loop.early_stop_fraction),
            init_from=sec.get("init_from", cfg.loop.init_from),
        ))
    if parser.has_section("eval"):
        sec = parser["eval"]
        cfg = replace(cfg, eval=EvalSettings(
            iou_min=sec.getfloat("iou_min", cfg.eval.iou_min),
            operating_threshold=sec.getfloat("operating_threshold",
                                             cfg.eval.operating_threshold),
        ))
    return cfg
