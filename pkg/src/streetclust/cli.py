"""Command-line entry points for the full pipeline.

Subcommands: synth, dedupe, train, predict, evaluate, representatives,
map, ksweep, serve. Every command reads one optional config file plus
``--set section.key=value`` overrides (flags win over the file), and all
randomness flows from the single configured seed.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .config import PipelineConfig
from .data import load_images, load_manifest, manifest_hash, materialize_city, save_manifest
from .geo import dbscan_dedupe
from .mapping import (
    GridSpec,
    LabelMap,
    apply_label_map,
    build_grid_map,
    grid_to_geojson,
    render_grid_png,
    representatives,
)
from .metrics import hungarian_align, metrics_report
from .model import load_checkpoint
from .train import AssignmentMatrix, predict, train


def _load_config(args) -> PipelineConfig:
    config = PipelineConfig.from_file(args.config) if args.config else PipelineConfig()
    if args.set:
        config = config.apply_overrides(args.set)
    return config


def _write_json(path, obj, sort_keys: bool = False) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=sort_keys)
        fh.write("\n")


def _truth_classes(records):
    missing = [r.id for r in records if r.truth_label is None]
    if missing:
        raise ValueError(f"{len(missing)} record(s) lack truth labels (e.g. {missing[0]!r})")
    classes = sorted({r.truth_label for r in records})
    index = {name: i for i, name in enumerate(classes)}
    return classes, np.array([index[r.truth_label] for r in records])


def _aligned_records(assign: AssignmentMatrix, records):
    by_id = {r.id: r for r in records}
    missing = [rid for rid in assign.record_ids if rid not in by_id]
    if missing:
        raise ValueError(f"predictions reference unknown record ids (e.g. {missing[0]!r})")
    return [by_id[rid] for rid in assign.record_ids]


# ----------------------------------------------------------------- commands


def cmd_synth(args) -> int:
    config = _load_config(args)
    spec = config.city_spec()
    if args.seed is not None:
        spec.seed = args.seed
    records = materialize_city(spec, args.out)
    print(f"wrote {len(records)} records to {args.out}")
    return 0


def cmd_dedupe(args) -> int:
    records = load_manifest(args.manifest)
    kept = set(dbscan_dedupe(records, eps=args.eps))
    filtered = [r for r in records if r.id in kept]
    save_manifest(filtered, args.out)
    print(f"kept {len(filtered)} of {len(records)} records")
    return 0


def cmd_train(args) -> int:
    config = _load_config(args)
    manifest = Path(args.manifest)
    records = load_manifest(manifest)
    images = load_images(records, manifest.parent)
    train_config = config.train_config()
    if args.self_pair_baseline:
        train_config.self_pair_baseline = True
    model, report = train(
        train_config, records, images, out_dir=args.out, dataset_hash=manifest_hash(manifest)
    )
    report.save(Path(args.out) / "train_report.json")
    last = report.epoch_losses[-1]
    print(f"trained {train_config.epochs} epochs; final total loss {last['total']:.4f}")
    return 0


def cmd_predict(args) -> int:
    manifest = Path(args.manifest)
    records = load_manifest(manifest)
    images = load_images(records, manifest.parent)
    model, _ = load_checkpoint(args.checkpoint)
    assign = predict(model, records, images)
    assign.save(args.out)
    print(f"wrote assignments for {len(records)} records to {args.out}")
    return 0


def cmd_evaluate(args) -> int:
    config = _load_config(args)
    assign = AssignmentMatrix.load(args.predictions)
    records = _aligned_records(assign, load_manifest(args.manifest))
    classes, truth = _truth_classes(records)
    n_classes = max(assign.probs.shape[1], len(classes))
    coords = [(r.proj.x, r.proj.y) for r in records]
    report = metrics_report(
        assign.labels, truth, coords, n_classes, threshold=config.eval.moran_threshold
    )
    if args.out:
        _write_json(args.out, report, sort_keys=True)
    print(json.dumps(report, indent=2, sort_keys=True))
    return 0


def cmd_representatives(args) -> int:
    from PIL import Image

    assign = AssignmentMatrix.load(args.predictions)
    manifest = Path(args.manifest)
    records = _aligned_records(assign, load_manifest(manifest))
    by_id = {r.id: r for r in records}
    ranked = representatives(assign, top_n=args.top_n)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    index = {}
    for cluster, rows in ranked.items():
        tiles = [Image.open(manifest.parent / by_id[rid].image_ref).convert("RGB") for rid, _ in rows]
        size = tiles[0].size if tiles else (32, 32)
        montage = Image.new("RGB", (size[0] * max(len(tiles), 1), size[1]))
        for i, tile in enumerate(tiles):
            montage.paste(tile, (i * size[0], 0))
        montage.save(out_dir / f"cluster_{cluster}.png")
        index[str(cluster)] = [{"record_id": rid, "confidence": conf} for rid, conf in rows]
    _write_json(out_dir / "representatives.json", index)
    print(f"wrote montages for {len(ranked)} clusters to {out_dir}")
    return 0


def cmd_map(args) -> int:
    config = _load_config(args)
    assign = AssignmentMatrix.load(args.predictions)
    records = _aligned_records(assign, load_manifest(args.manifest))
    labelmap = LabelMap.load(args.labelmap)
    categories, cat_probs = apply_label_map(assign, labelmap)
    cell = args.cell_size if args.cell_size is not None else config.map.cell_size
    spec = GridSpec.covering(records, cell)
    grid = build_grid_map(records, cat_probs, categories, spec)
    _write_json(args.out, grid_to_geojson(grid))
    if args.png:
        render_grid_png(grid, labelmap.palette, args.png)
    print(f"wrote grid map ({spec.rows}x{spec.cols} cells) to {args.out}")
    return 0


def cmd_ksweep(args) -> int:
    config = _load_config(args)
    manifest = Path(args.manifest)
    records = load_manifest(manifest)
    images = load_images(records, manifest.parent)
    _, truth = _truth_classes(records)
    dataset_hash = manifest_hash(manifest)

    ks = [int(k) for k in args.k.split(",")]
    rows = []
    for k in ks:
        accs = []
        for s in range(args.seeds):
            train_config = config.train_config()
            train_config.k_neighbors = k
            train_config.seed = config.seed + s
            if args.epochs is not None:
                train_config.epochs = args.epochs
            if args.d is not None:
                train_config.neighbor_distance = args.d
            model, _ = train(train_config, records, images, dataset_hash=dataset_hash)
            assign = predict(model, records, images)
            n_classes = max(train_config.n_clusters, int(truth.max()) + 1)
            _, acc, _ = hungarian_align(assign.labels, truth, n_classes)
            accs.append(acc)
            print(f"k={k} seed={train_config.seed} acc={acc:.4f}", flush=True)
        rows.append(
            {
                "k": k,
                "mean_acc": float(np.mean(accs)),
                "std_acc": float(np.std(accs, ddof=1)) if len(accs) > 1 else 0.0,
            }
        )

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["k", "mean_acc", "std_acc"])
        writer.writeheader()
        writer.writerows(rows)
    print(f"wrote sweep results to {out}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    config = _load_config(args)
    app = create_app(
        args.checkpoint,
        args.manifest,
        args.workdir,
        cell_size=config.map.cell_size,
        default_top_n=config.map.top_n_representatives,
        ui_dir=args.ui,
    )
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


# ------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="streetclust", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="YAML/JSON pipeline config file")
        p.add_argument(
            "--set",
            action="append",
            default=[],
            metavar="SECTION.KEY=VALUE",
            help="override a config value (repeatable; wins over the file)",
        )

    p = sub.add_parser("synth", help="generate a synthetic city dataset")
    common(p)
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--seed", type=int, help="override the master seed")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("dedupe", help="drop density-connected duplicate points")
    common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--eps", type=float, default=10.0, help="merge radius in meters")
    p.set_defaults(func=cmd_dedupe)

    p = sub.add_parser("train", help="train the clustering model")
    common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="checkpoint directory")
    p.add_argument(
        "--self-pair-baseline",
        action="store_true",
        help="replace spatial positives with re-augmented anchors",
    )
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="cluster probabilities for a dataset")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="assignments JSON path")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="score predictions against manifest labels")
    common(p)
    p.add_argument("--predictions", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", help="write the metrics report here")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("representatives", help="emit top-n image strips per cluster")
    common(p)
    p.add_argument("--predictions", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--top-n", type=int, default=10)
    p.set_defaults(func=cmd_representatives)

    p = sub.add_parser("map", help="grid map from assignments plus a label map")
    common(p)
    p.add_argument("--predictions", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--labelmap", required=True)
    p.add_argument("--out", required=True, help="GeoJSON output path")
    p.add_argument("--png", help="also render a PNG here")
    p.add_argument("--cell-size", type=float)
    p.set_defaults(func=cmd_map)

    p = sub.add_parser("ksweep", help="neighbor-count sensitivity sweep")
    common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="CSV output path")
    p.add_argument("--k", default="1,5,10,20,50", help="comma-separated K values")
    p.add_argument("--seeds", type=int, default=5)
    p.add_argument("--epochs", type=int, help="override epochs for the sweep")
    p.add_argument("--d", type=float, help="override the neighbor distance cap")
    p.set_defaults(func=cmd_ksweep)

    p = sub.add_parser("serve", help="start the cluster review HTTP service")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--workdir", required=True, help="label map / state directory")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--ui", help="directory with the built web UI (serves it at /)")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, KeyError, FileNotFoundError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
