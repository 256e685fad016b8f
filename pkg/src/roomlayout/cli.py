"""Command-line entry point: ``roomlayout {generate,propose,train,infer,evaluate}``.

Every pipeline setting is available as ``--<section>-<key>`` (for example
``--proposal-tau-b 0.4`` or ``--train-loss-kind l2``) and may also come from
an INI file given with ``--config``; flags win over the file.

Exit status: 0 on success, 1 for data problems (missing or malformed files,
empty candidate sets), 2 for bad options or configuration.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import dataset as ds
from .config import SECTIONS, PipelineConfig, from_mapping, load_config
from .errors import ConfigError, LayoutError
from .evaluation import ImageResult, MetricReport, e_corner, e_pixel, nearest_rank, topk_table
from .featuremaps import atomic_write_bytes
from .layout import Layout, boundary_segments
from .pipeline import candidates, infer
from .proposal import CandidateSet
from .scoring import ScorerParams, prepare_example, train

log = logging.getLogger("roomlayout")


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)
    p.add_argument("--config", help="INI file with pipeline settings")
    g = p.add_argument_group("pipeline settings")
    base = PipelineConfig()
    for section in SECTIONS:
        for f in dataclasses.fields(getattr(base, section)):
            flag = f"--{section}-{f.name}".replace("_", "-")
            g.add_argument(flag, dest=f"cfg__{section}__{f.name}", metavar=f.name.upper(),
                           help=f"default {getattr(getattr(base, section), f.name)}")


def _config(args) -> PipelineConfig:
    cfg = load_config(args.config) if args.config else PipelineConfig()
    overrides = {}
    for key, val in vars(args).items():
        if key.startswith("cfg__") and val is not None:
            _, section, name = key.split("__")
            overrides.setdefault(section, {})[name] = val
    return from_mapping(overrides, cfg) if overrides else cfg


def _write_json(path: Path, obj) -> None:
    atomic_write_bytes(path, (json.dumps(obj, indent=2) + "\n").encode())


def cmd_generate(args) -> int:
    cfg = _config(args)
    try:
        m = ds.generate(args.out_dir, args.n, args.walls_min, args.walls_max, cfg.noise, cfg.run.seed,
                        photos=not args.no_photo)
    except ValueError as e:
        raise ConfigError(str(e)) from None
    log.info("wrote %d scenes to %s", len(m.entries), args.out_dir)
    return 0


def _propose_one(m, e, cfg) -> CandidateSet:
    maps = ds.read_maps(m, e)
    photo = ds.read_photo(m, e) if cfg.run.cues == "photo" else None
    try:
        return candidates(maps, cfg, photo, e.image_id)
    except LayoutError as err:
        raise ds.DataError(e.image_id, m.resolve(e.maps_path), str(err)) from None


def cmd_propose(args) -> int:
    cfg = _config(args)
    m = ds.load_manifest(args.manifest)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for e in m.entries:
        cs = _propose_one(m, e, cfg)
        _write_json(out / f"{e.image_id}.json", cs.to_dict())
        log.info("%s: %d candidates", e.image_id, len(cs))
    return 0


def _load_candidates(path: Path, image_id: str) -> CandidateSet:
    try:
        return CandidateSet.from_dict(json.loads(path.read_text()))
    except (OSError, KeyError, TypeError, ValueError) as err:
        raise ds.DataError(image_id, path, str(err)) from None


def cmd_train(args) -> int:
    cfg = _config(args)
    m = ds.load_manifest(args.manifest)
    examples = []
    for e in m.entries:
        maps = ds.read_maps(m, e)
        gt = ds.read_layout(m.resolve(e.gt_layout_path), e.image_id)
        if args.candidates:
            cs = _load_candidates(Path(args.candidates) / f"{e.image_id}.json", e.image_id)
        else:
            cs = _propose_one(m, e, cfg)
        try:
            examples.append(prepare_example(maps, gt, cs, cfg.train.floor_only_area))
        except LayoutError as err:
            raise ds.DataError(e.image_id, m.resolve(e.maps_path), str(err)) from None
    history: List[float] = []
    params = train(examples, cfg.train, history)
    params.save(args.out)
    log.info("trained %s on %d images, final loss %.6g -> %s", cfg.train.loss_kind, len(examples), history[-1], args.out)
    return 0


def draw_overlay(layout: Layout, background: np.ndarray, path) -> None:
    from io import BytesIO

    from PIL import Image, ImageDraw

    bg = np.round(np.clip(background, 0, 1) * 255).astype(np.uint8)
    im = Image.fromarray(bg, mode="L").convert("RGB")
    draw = ImageDraw.Draw(im)
    colors = {"ww": (230, 40, 40), "wf": (40, 200, 60), "wc": (50, 90, 240)}
    for name, segs in boundary_segments(layout).items():
        for s in segs:
            draw.line([(s.a.x - 0.5, s.a.y - 0.5), (s.b.x - 0.5, s.b.y - 0.5)], fill=colors[name], width=1)
    buf = BytesIO()
    im.save(buf, format="PNG")
    atomic_write_bytes(path, buf.getvalue())


def cmd_infer(args) -> int:
    cfg = _config(args)
    m = ds.load_manifest(args.manifest)
    params = ScorerParams.load(args.params)
    out = Path(args.out_dir)
    (out / "ranked").mkdir(parents=True, exist_ok=True)
    if args.overlays:
        (out / "overlays").mkdir(exist_ok=True)
    for e in m.entries:
        maps = ds.read_maps(m, e)
        photo = ds.read_photo(m, e)
        try:
            res = infer(maps, params, cfg, photo if cfg.run.cues == "photo" else None, e.image_id)
        except LayoutError as err:
            raise ds.DataError(e.image_id, m.resolve(e.maps_path), str(err)) from None
        atomic_write_bytes(out / f"{e.image_id}.json", (res.layout.to_json() + "\n").encode())
        order = np.argsort(-res.scores, kind="stable")
        _write_json(out / "ranked" / f"{e.image_id}.json", {
            "image_id": e.image_id,
            "ranked": [
                {"score": float(res.scores[i]), "provenance": res.candidates.provenance[i],
                 "layout": res.candidates.layouts[i].to_dict()}
                for i in order
            ],
        })
        if args.overlays:
            bg = photo if photo is not None else maps.seg_labels() / 2.0
            draw_overlay(res.layout, bg, out / "overlays" / f"{e.image_id}.png")
        log.info("%s: picked candidate %d of %d", e.image_id, res.index, len(res.candidates))
    return 0


def cmd_evaluate(args) -> int:
    m = ds.load_manifest(args.manifest)
    pred_dir = Path(args.pred_dir)
    report = MetricReport()
    ranked_errors = []
    for e in m.entries:
        gt = ds.read_layout(m.resolve(e.gt_layout_path), e.image_id)
        pred = ds.read_layout(pred_dir / f"{e.image_id}.json", e.image_id)
        rank_of_gt = 0
        rp = pred_dir / "ranked" / f"{e.image_id}.json"
        if rp.exists():
            try:
                ranked = [Layout.from_dict(c["layout"]) for c in json.loads(rp.read_text())["ranked"]]
            except (OSError, KeyError, TypeError, ValueError) as err:
                raise ds.DataError(e.image_id, rp, str(err)) from None
            errs = [e_pixel(l, gt) for l in ranked]
            ranked_errors.append(errs)
            rank_of_gt = nearest_rank(errs, range(len(errs)))
        report.images.append(ImageResult(e.image_id, e_pixel(pred, gt), e_corner(pred, gt), rank_of_gt))
    if ranked_errors and len(ranked_errors) == len(m.entries):
        report.top_k = topk_table(ranked_errors, args.ks, args.topk_stat)
    atomic_write_bytes(args.out, report.to_csv().encode())
    text = report.summary()
    if args.summary:
        atomic_write_bytes(args.summary, text.encode())
    sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="roomlayout", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic dataset of oracle maps")
    g.add_argument("--n", type=int, required=True, help="number of scenes")
    g.add_argument("--walls-min", type=int, default=1)
    g.add_argument("--walls-max", type=int, default=6)
    g.add_argument("--out-dir", required=True)
    g.add_argument("--no-photo", action="store_true", help="skip the synthetic grayscale photos")
    _add_config_flags(g)
    g.set_defaults(func=cmd_generate)

    pr = sub.add_parser("propose", help="write candidate layouts per image")
    pr.add_argument("--manifest", required=True)
    pr.add_argument("--out-dir", required=True)
    _add_config_flags(pr)
    pr.set_defaults(func=cmd_propose)

    t = sub.add_parser("train", help="fit scorer weights")
    t.add_argument("--manifest", required=True)
    t.add_argument("--candidates", help="directory written by 'propose' (default: propose on the fly)")
    t.add_argument("--out", required=True, help="scorer parameter file to write")
    _add_config_flags(t)
    t.set_defaults(func=cmd_train)

    i = sub.add_parser("infer", help="pick the best layout per image")
    i.add_argument("--manifest", required=True)
    i.add_argument("--params", required=True)
    i.add_argument("--out-dir", required=True)
    i.add_argument("--overlays", action="store_true", help="also write PNG overlays")
    _add_config_flags(i)
    i.set_defaults(func=cmd_infer)

    ev = sub.add_parser("evaluate", help="score predictions against ground truth")
    ev.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)
    ev.add_argument("--manifest", required=True)
    ev.add_argument("--pred-dir", required=True)
    ev.add_argument("--out", required=True, help="CSV report path")
    ev.add_argument("--summary", help="also write the summary table here")
    ev.add_argument("--ks", type=int, nargs="+", default=[1, 5, 10, 20])
    ev.add_argument("--topk-stat", choices=("mean", "min"), default="mean")
    ev.set_defaults(func=cmd_evaluate)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except (LayoutError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
