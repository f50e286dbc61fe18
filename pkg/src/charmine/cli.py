"""Command-line client for the pipeline service.

Every subcommand builds one request and posts it to the service: either a
remote instance (--server URL) or, by default, an in-process copy of the
app over a test transport, so no server needs to be running for local use.

Exit codes: 0 success, 2 validation error (HTTP 400/422), 3 runtime error.
"""
from __future__ import annotations

import argparse
import json
import sys

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_RUNTIME = 3


def _client(server: str | None):
    if server:
        import httpx

        return httpx.Client(base_url=server, timeout=None)
    from fastapi.testclient import TestClient

    from .service.app import app

    return TestClient(app)


def _post(args, path: str, payload: dict) -> int:
    payload = {k: v for k, v in payload.items() if v is not None}
    with _client(args.server) as client:
        response = client.post(path, json=payload)
    body = response.json()
    if response.status_code < 300:
        json.dump(body, sys.stdout, indent=2, sort_keys=True)
        sys.stdout.write("\n")
        return EXIT_OK
    detail = body.get("detail", body)
    print(f"error: {detail}", file=sys.stderr)
    if response.status_code in (400, 422):
        return EXIT_VALIDATION
    return EXIT_RUNTIME


def _add_common(parser):
    parser.add_argument("--config", dest="config_path", help="INI config file")
    parser.add_argument("--profile", default="desk", choices=("desk", "paper"))
    parser.add_argument("--server", help="service URL; default runs in-process")


def _int_pair(text):
    a, _, b = text.partition(",")
    return (int(a), int(b))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="charmine",
                                     description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="render a synthetic benchmark")
    _add_common(p)
    p.add_argument("--out", required=True, dest="out_dir")
    p.add_argument("--images", type=int, default=1250, dest="n_images")
    p.add_argument("--fractions", default="0.04,0.4,0.4",
                   help="full,weak,none fractions; remainder is the test set")
    p.add_argument("--image-size", type=int)
    p.add_argument("--words-per-image", type=_int_pair)
    p.add_argument("--chars-per-word", type=_int_pair)
    p.add_argument("--font-height", type=_int_pair)
    p.add_argument("--clutter", type=float)
    p.add_argument("--seed", type=int)

    p = sub.add_parser("pretrain", help="train the light model on a full-tier manifest")
    _add_common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--stages", help="e.g. 700@0.005,300@0.001")
    p.add_argument("--batch-size", type=int)

    p = sub.add_parser("infer", help="detect characters over a manifest")
    _add_common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--test-size", type=int)

    p = sub.add_parser("mine", help="filter detections into pseudo-positives")
    _add_common(p)
    p.add_argument("--detections", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--mode", required=True, choices=("semi", "weak"))
    p.add_argument("--out", required=True)
    p.add_argument("--round", type=int, default=1, dest="round_index")
    p.add_argument("--score-threshold", type=float)
    p.add_argument("--weak-score-threshold", type=float)
    p.add_argument("--t-x", type=float)
    p.add_argument("--t-y", type=float)

    p = sub.add_parser("retrain", help="merge mined samples with the base set and retrain")
    _add_common(p)
    p.add_argument("--base-manifest", required=True)
    p.add_argument("--mined", required=True)
    p.add_argument("--source-manifest", required=True)
    p.add_argument("--checkpoint", required=True, help="light model to initialize from")
    p.add_argument("--out", required=True)
    p.add_argument("--mode", default="weak", choices=("semi", "weak"))
    p.add_argument("--round", type=int, default=1, dest="round_index")
    p.add_argument("--seed", type=int)

    p = sub.add_parser("iterate", help="run the full self-training loop")
    _add_common(p)
    p.add_argument("--base-manifest", required=True)
    p.add_argument("--source-manifest", required=True)
    p.add_argument("--test-manifest", required=True)
    p.add_argument("--workdir", required=True)
    p.add_argument("--mode", default="weak", choices=("semi", "weak"))
    p.add_argument("--rounds", type=int, default=1)
    p.add_argument("--seed", type=int)

    p = sub.add_parser("extract-lines", help="group detections into text lines")
    _add_common(p)
    p.add_argument("--detections", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--conf-floor", type=float)

    p = sub.add_parser("eval", help="score detections or lines against a manifest")
    _add_common(p)
    p.add_argument("--level", required=True, choices=("char", "line"))
    p.add_argument("--detections")
    p.add_argument("--lines")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", help="report.json path")
    p.add_argument("--pr-curve", dest="pr_curve_out", help="PR curve CSV path")
    p.add_argument("--checkpoint", default="")
    p.add_argument("--iou-min", type=float)
    p.add_argument("--operating-threshold", type=float)

    p = sub.add_parser("timing", help="per-image detection/line-extraction timing")
    _add_common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--test-size", type=int)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)

    return parser


def _parse_stages(text):
    stages = []
    for part in text.split(","):
        iters, _, lr = part.partition("@")
        stages.append((int(iters), float(lr)))
    return stages


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    common = {"config_path": getattr(args, "config_path", None),
              "profile": getattr(args, "profile", "desk")}

    if args.command == "serve":
        import uvicorn

        from .service.app import app

        uvicorn.run(app, host=args.host, port=args.port)
        return EXIT_OK

    if args.command == "synth":
        fractions = tuple(float(v) for v in args.fractions.split(","))
        if len(fractions) != 3:
            print("error: --fractions needs three values", file=sys.stderr)
            return EXIT_VALIDATION
        return _post(args, "/synth", {
            **common,
            "out_dir": args.out_dir,
            "n_images": args.n_images,
            "fractions": fractions,
            "image_size": args.image_size,
            "words_per_image": args.words_per_image,
            "chars_per_word": args.chars_per_word,
            "font_height": args.font_height,
            "clutter": args.clutter,
            "seed": args.seed,
        })
    if args.command == "pretrain":
        overrides = {}
        if args.stages:
            overrides["stages"] = _parse_stages(args.stages)
        if args.batch_size:
            overrides["batch_size"] = args.batch_size
        return _post(args, "/pretrain", {
            **common,
            "manifest": args.manifest,
            "out": args.out,
            "seed": args.seed,
            "overrides": overrides or None,
        })
    if args.command == "infer":
        return _post(args, "/infer", {
            **common,
            "checkpoint": args.checkpoint,
            "manifest": args.manifest,
            "out": args.out,
            "test_size": args.test_size,
        })
    if args.command == "mine":
        return _post(args, "/mine", {
            **common,
            "detections": args.detections,
            "manifest": args.manifest,
            "mode": args.mode,
            "out": args.out,
            "round_index": args.round_index,
            "score_threshold": args.score_threshold,
            "weak_score_threshold": args.weak_score_threshold,
            "t_x": args.t_x,
            "t_y": args.t_y,
        })
    if args.command == "retrain":
        return _post(args, "/retrain", {
            **common,
            "base_manifest": args.base_manifest,
            "mined": args.mined,
            "source_manifest": args.source_manifest,
            "checkpoint": args.checkpoint,
            "out": args.out,
            "mode": args.mode,
            "round_index": args.round_index,
            "seed": args.seed,
        })
    if args.command == "iterate":
        return _post(args, "/iterate", {
            **common,
            "base_manifest": args.base_manifest,
            "source_manifest": args.source_manifest,
            "test_manifest": args.test_manifest,
            "workdir": args.workdir,
            "mode": args.mode,
            "rounds": args.rounds,
            "seed": args.seed,
        })
    if args.command == "extract-lines":
        return _post(args, "/extract-lines", {
            **common,
            "detections": args.detections,
            "out": args.out,
            "conf_floor": args.conf_floor,
        })
    if args.command == "eval":
        return _post(args, "/eval", {
            **common,
            "level": args.level,
            "detections": args.detections,
            "lines": args.lines,
            "manifest": args.manifest,
            "out": args.out,
            "pr_curve_out": args.pr_curve_out,
            "checkpoint": args.checkpoint,
            "iou_min": args.iou_min,
            "operating_threshold": args.operating_threshold,
        })
    if args.command == "timing":
        return _post(args, "/timing", {
            **common,
            "checkpoint": args.checkpoint,
            "manifest": args.manifest,
            "test_size": args.test_size,
        })
    raise AssertionError(f"unhandled command {args.command}")


if __name__ == "__main__":
    sys.exit(main())
