"""Command-line interface: segment, eval, synth, validate, query, ablate.

Exit codes: 0 success, 1 runtime failure, 2 input error. Failures emit one
machine-readable JSON object on stderr: {"error": code, "message": text}.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import evalkit, pcio, semantics, synth
from .config import load_config
from .errors import ConfigError, SpinsegError, UnknownLabelError
from .pipeline import run_segmentation
from .spectral import dump_clusters
from .superpoint import load_superpoint_cache, save_superpoint_cache


def _fail(code: str, message: str, exit_code: int) -> int:
    print(json.dumps({"error": code, "message": message}), file=sys.stderr)
    return exit_code


def cmd_segment(args) -> int:
    report = pcio.validate_dataset(args.dataset)
    if not report.ok:
        first = report.errors[0]
        return _fail(first.code, f"{first.path}: {first.message}", 2)
    config = load_config(args.config, args.set)
    if args.threads is not None:
        config.threads = args.threads
        config.validate()
    dataset = pcio.load_dataset(args.dataset)

    superpoints = None
    if args.sp_cache and Path(args.sp_cache).exists():
        superpoints = load_superpoint_cache(args.sp_cache, dataset.cloud)

    user_vocab = None
    if args.vocab:
        text = Path(args.vocab).read_text(encoding="utf-8")
        user_vocab = [line.strip() for line in text.splitlines() if line.strip()]

    result = run_segmentation(
        dataset, config, user_vocab=user_vocab,
        superpoints=superpoints, keep_factors=args.debug,
    )

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.sp_cache and not Path(args.sp_cache).exists():
        save_superpoint_cache(result.superpoints, args.sp_cache)
    semantics.save_instances(
        result.instances, list(result.vocabulary.labels), out / "instances.json"
    )
    pcio.save_instance_map(result.point_instance_ids, out / "instance_map.pvim")
    if args.debug:
        dump_clusters(result.clusters, result.superpoints, out / "clusters.json")
        result.overlap.dump_jsonl(out / "overlap.jsonl")
        am, as_, ac = result.factors
        am.dump_jsonl(out / "affinity_mask.jsonl")
        as_.dump_jsonl(out / "affinity_semantic.jsonl")
        ac.dump_jsonl(out / "affinity_spatial.jsonl")
        result.affinity.dump_jsonl(out / "affinity.jsonl")

    print(f"superpoints: {len(result.superpoints)}")
    print(f"instances:   {len(result.instances)}")
    print(f"vocabulary:  {len(result.vocabulary)} labels")
    for stage, seconds in result.timings.items():
        print(f"  {stage:<12s} {seconds:8.3f} s")
    return 0


def cmd_eval(args) -> int:
    preds, _ = semantics.load_instances(args.pred)
    gts = evalkit.load_ground_truth(args.gt)
    table = pcio.load_embedding_table(args.table)
    groups = evalkit.load_groups(args.groups) if args.groups else None
    report = evalkit.average_precision(
        preds, gts, table, tau_bert=args.tau_bert, groups=groups
    )
    print(report)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(report.to_json(), fh, sort_keys=True, indent=1)
    if args.csv:
        report.write_csv(args.csv)
    return 0


def cmd_synth(args) -> int:
    if args.preset:
        if args.preset not in synth.PRESETS:
            raise ConfigError(
                f"unknown preset {args.preset!r}; choose from {sorted(synth.PRESETS)}"
            )
        spec = synth.PRESETS[args.preset]()
    elif args.spec:
        spec = synth.SceneSpec.from_json(args.spec)
    else:
        raise ConfigError("synth needs --preset or --spec")
    gts = synth.generate_scene(spec, args.out)
    print(f"wrote dataset with {len(gts)} ground-truth instances to {args.out}")
    return 0


def cmd_validate(args) -> int:
    report = pcio.validate_dataset(args.dataset)
    print(report)
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(report.to_json(), fh, sort_keys=True, indent=1)
    return 0 if report.ok else 2


def cmd_query(args) -> int:
    instances, _ = semantics.load_instances(args.instances)
    table = pcio.load_embedding_table(args.table)
    if args.label is None and args.vector is None:
        raise ConfigError("query needs --label or --vector")
    if args.label is not None:
        if args.label not in table:
            raise UnknownLabelError(f"query label {args.label!r} missing from the table")
        qvec = table.vector(args.label)
    else:
        qvec = np.asarray(json.loads(args.vector), dtype=np.float64)
        norm = np.linalg.norm(qvec)
        if norm > 0:
            qvec = qvec / norm
    # instance embeddings are not serialized; rebuild them from assigned labels
    for inst in instances:
        if inst.label in table:
            inst.embedding = table.vector(inst.label)
    ranked = semantics.query(instances, qvec, top_k=args.top_k)
    for inst, score in ranked:
        print(f"{inst.id:6d} {score:8.4f} {inst.label} ({inst.point_indices.size} points)")
    return 0


def cmd_ablate(args) -> int:
    values = [v for v in (s.strip() for s in args.values.split(",")) if v]
    if not values:
        raise ConfigError("ablate needs a non-empty comma-separated --values list")
    floats = []
    for v in values:
        f = float(v)
        if not (0.0 <= f < 1.0):
            raise ConfigError(f"ablation values must be in [0, 1), got {f}")
        floats.append(f)

    report = pcio.validate_dataset(args.dataset)
    if not report.ok:
        first = report.errors[0]
        return _fail(first.code, f"{first.path}: {first.message}", 2)
    gt_path = Path(args.dataset) / pcio.GT_FILE
    if not gt_path.exists():
        raise ConfigError(f"ablation needs ground truth at {gt_path}")
    dataset = pcio.load_dataset(args.dataset)
    gts = evalkit.load_ground_truth(gt_path)

    rows = []
    for value in floats:
        config = load_config(args.config, args.set)
        setattr(config, args.param, value)
        result = run_segmentation(dataset, config)
        rep = evalkit.average_precision(result.instances, gts, dataset.table)
        rows.append((value, rep.ap, rep.ap50))
        print(f"{args.param}={value:.2f}  AP={rep.ap:.4f}  AP50={rep.ap50:.4f}")
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([args.param, "ap", "ap50"])
        for value, ap, ap50 in rows:
            writer.writerow([value, ap, ap50])
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spinseg",
        description="Vocabulary-free 3D instance segmentation over superpoints",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("segment", help="segment a dataset into labeled 3D instances")
    p.add_argument("dataset", help="dataset directory")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--config", default=None, help="JSON config file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="config override, repeatable, last write wins")
    p.add_argument("--vocab", default=None,
                   help="open-vocabulary mode: newline-separated label list")
    p.add_argument("--sp-cache", default=None, help="superpoint cache JSON (load or create)")
    p.add_argument("--debug", action="store_true", help="dump overlap and affinity factors")
    p.add_argument("--threads", type=int, default=None, help="cap the worker pool")
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("eval", help="evaluate predictions against ground truth")
    p.add_argument("pred", help="predicted instances JSON")
    p.add_argument("gt", help="ground-truth instances JSON")
    p.add_argument("table", help="embedding table JSON")
    p.add_argument("--groups", default=None, help="label -> group JSON for breakdowns")
    p.add_argument("--tau-bert", type=float, default=0.8)
    p.add_argument("--out", default=None, help="write the report as JSON")
    p.add_argument("--csv", default=None, help="write per-class AP as CSV")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--preset", default=None, choices=sorted(synth.PRESETS))
    p.add_argument("--spec", default=None, help="scene spec JSON file")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("validate", help="validate a dataset directory")
    p.add_argument("dataset")
    p.add_argument("--json", default=None, help="also write the report as JSON")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("query", help="rank instances against a query embedding")
    p.add_argument("--instances", required=True)
    p.add_argument("--table", required=True)
    p.add_argument("--label", default=None, help="query by a label from the table")
    p.add_argument("--vector", default=None, help="query by a raw JSON vector")
    p.add_argument("--top-k", type=int, default=5)
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("ablate", help="sweep tau_iou or tau_sim and record AP")
    p.add_argument("dataset")
    p.add_argument("--param", required=True, choices=["tau_iou", "tau_sim"])
    p.add_argument("--values", required=True, help="comma-separated values in [0, 1)")
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--config", default=None)
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    p.set_defaults(func=cmd_ablate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SpinsegError as exc:
        return _fail(exc.code, str(exc), exc.exit_code)
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        return _fail(type(exc).__name__, str(exc), 2)
    except Exception as exc:  # pragma: no cover - unexpected runtime failure
        return _fail(type(exc).__name__, str(exc), 1)


if __name__ == "__main__":
    sys.exit(main())
