"""Command-line entry point: ``propeval <verb> ...``.

Exit codes: 0 success, 1 internal error, 2 input or validation error.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from . import __version__
from .config import ConfigError, load_dmp_config, load_evaluation_config, load_synth_config, read_config_file
from .data_model import (
    DatasetError,
    ParseError,
    annotation_stats,
    dataset_to_canonical,
    dataset_to_coco,
    load_dataset,
    load_proposals,
    resolve_category_names,
    save_dataset,
    save_proposals,
)
from .diagnostics import (
    DiagnosticsError,
    bias_capacity,
    fine_grained_recall,
    load_supercategory_map,
    read_name_list,
    simulate_runs,
    three_regime_eval,
)
from .geometry import InvalidBoxError
from .metrics import CurveResult, MetricError, cap_budgets, evaluate
from .proposers import ProposerError, random_proposer
from .report import CURVE_HEADER, RunManifest, curve_rows, dumps, safe_name, validate_report, write_csv, write_json, write_svg
from .synth import SynthConfigError, generate_dataset

log = logging.getLogger("propeval")

INPUT_ERRORS = (
    ParseError, DatasetError, ConfigError, MetricError, DiagnosticsError,
    ProposerError, SynthConfigError, InvalidBoxError, FileNotFoundError,
)
FORMATS = ("json", "csv", "svg")


class UsageError(ValueError):
    pass


def _require_exists(*paths):
    for p in paths:
        if p is not None and not Path(p).exists():
            raise UsageError(f"{p}: no such file or directory")


def _formats(args) -> set[str]:
    return set(args.format or FORMATS)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _emit_json(args, out: Path, name: str, doc: dict, kind: str):
    validate_report(doc, kind)
    if "json" in _formats(args):
        write_json(out / name, doc)


def _subset_ids(dataset, spec):
    return resolve_category_names(dataset, read_name_list(spec))


# --------------------------------------------------------------------------


def cmd_eval(args) -> int:
    _require_exists(args.dataset, *args.proposals, args.config)
    d = load_dataset(args.dataset, args.dataset_format, args.voc_exclusive)
    sets = [load_proposals(p) for p in args.proposals]
    raw = read_config_file(args.config) if args.config else {}
    cfg = load_evaluation_config(args.config)
    if "proposal_budgets" not in raw:
        cfg = cfg.with_budgets(cap_budgets(cfg.proposal_budgets, max(p.max_per_image() for p in sets)))
    for p in sets:
        missing = p.missing_images(d)
        if missing:
            log.warning("%s: %d dataset images have no proposals", p.method_name, len(missing))
    reports = sorted((evaluate(d, p, cfg, threads=args.threads) for p in sets), key=lambda r: r["method"])
    manifest = RunManifest("eval", cfg.to_dict(), [args.dataset, *args.proposals]).to_dict()
    out = _out_dir(args)
    _emit_json(args, out, "metrics.json", {"manifest": manifest, "methods": reports}, "eval")
    curves = {r["method"]: [CurveResult(c["x_label"], c["y_label"], c["points"], r["method"], c["metadata"])
                            for c in r["curves"]] for r in reports}
    if "csv" in _formats(args):
        rows = (row for r in reports for row in curve_rows(curves[r["method"]]))
        write_csv(out / "metrics.csv", CURVE_HEADER, rows)
        scal = ["method", "budget", *[k for k in reports[0]["per_budget"][0] if k != "budget"]] if reports else []
        write_csv(out / "metrics_per_budget.csv", scal,
                  ([r["method"], *row.values()] for r in reports for row in r["per_budget"]))
    if "svg" in _formats(args):
        for r in reports:
            cs = {(c.y_label, c.metadata.get("budget")): c for c in curves[r["method"]]}
            by_t = [c for c in curves[r["method"]] if c.x_label == "proposals" and c.y_label.startswith("recall@")]
            last = cs[("recall", cfg.proposal_budgets[-1])]
            write_svg(out / f"{safe_name(r['method'])}.svg", [
                ("AUC vs #proposals", [cs[("auc", None)]], True),
                ("AR vs #proposals", [cs[("average_recall", None)]], True),
                ("Recall vs #proposals", by_t, True),
                (f"Recall vs IOU @ {cfg.proposal_budgets[-1]}", [last], False),
            ])
    return 0


def cmd_gameability(args) -> int:
    _require_exists(args.dataset, *args.proposals, args.config)
    d = load_dataset(args.dataset, args.dataset_format, args.voc_exclusive)
    subset = _subset_ids(d, args.subset)
    sets = [load_proposals(p) for p in args.proposals]
    raw = read_config_file(args.config) if args.config else {}
    cfg = load_evaluation_config(args.config)
    if "proposal_budgets" not in raw:
        cfg = cfg.with_budgets(cap_budgets(cfg.proposal_budgets, max(p.max_per_image() for p in sets)))
    rep = three_regime_eval(d, subset, sets, cfg, threads=args.threads, with_suites=args.full_suite)
    names = {c.id: c.name for c in d.categories}
    config = {**cfg.to_dict(), "subset": sorted(names[c] for c in subset)}
    doc = {"manifest": RunManifest("gameability", config, [args.dataset, *args.proposals]).to_dict(),
           **rep.to_dict()}
    out = _out_dir(args)
    _emit_json(args, out, "gameability.json", doc, "gameability")
    if "csv" in _formats(args):
        write_csv(out / "gameability.csv", ["method", "budget", "auc_subset", "auc_complement", "auc_all", "drop"],
                  ([r["method"], r["budget"], r["auc_subset"], r["auc_complement"], r["auc_all"], r["drop"]]
                   for r in doc["rows"]))
        write_csv(out / "inversions.csv", ["budget", "better_on_subset", "better_on_complement"],
                  ([v["budget"], v["better_on_subset"], v["better_on_complement"]] for v in rep.inversions))
    if "svg" in _formats(args):
        for m in rep.methods:
            write_svg(out / f"{safe_name(m)}_drop.svg", [("AUC drop (subset - complement)", [rep.drop_curve(m)], True)])
    print(f"{len(rep.inversions)} ranking inversions across {len(rep.budgets)} budgets")
    return 0


def _read_runs(path) -> list[tuple[str, int, str]]:
    rows = []
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or [h.strip() for h in header][:2] != ["seen_count", "path"]:
            raise ParseError(f"{path}:1: expected header seen_count,path[,method]")
        for row in reader:
            if not row:
                continue
            try:
                k = int(row[0])
            except ValueError:
                raise ParseError(f"{path}:{reader.line_num}: seen_count is not an integer: {row[0]!r}") from None
            p = Path(row[1].strip())
            if not p.is_absolute():
                p = Path(path).parent / p
            rows.append((row[2].strip() if len(row) > 2 and row[2].strip() else "", k, str(p)))
    if not rows:
        raise DiagnosticsError(f"{path}: empty runs spec")
    return rows


def cmd_bias_capacity(args) -> int:
    _require_exists(args.dataset, args.runs, args.simulate, args.dmp, args.config)
    cfg = load_evaluation_config(args.config)
    seeds, inputs, config = [], [], {"evaluation": cfg.to_dict(), "fixed_budget": args.fixed_budget}
    groups: dict[str, list] = {}
    if args.simulate:
        seed_kw = {} if args.seed is None else {"seed": args.seed}
        scfg = load_synth_config(args.simulate, **seed_kw)
        dcfg = load_dmp_config(args.dmp, **seed_kw)
        full, _ = generate_dataset(scfg)
        ks = [int(k) for k in args.seen_counts.split(",") if k.strip()] if args.seen_counts else \
            list(range(1, scfg.num_categories + 1))
        if not ks:
            raise DiagnosticsError("empty seen-count list")
        groups["oracle_dmp"] = simulate_runs(full, ks, dcfg)
        if args.random_control:
            groups["random"] = [(k, random_proposer(full, args.random_control, seed=dcfg.seed + k))
                                for k in ks]
        seeds += [scfg.seed, dcfg.seed]
        inputs += [args.simulate] + ([args.dmp] if args.dmp else [])
        config.update(synth=scfg.to_dict(), dmp=dcfg.to_dict(), seen_counts=ks,
                      random_control=args.random_control)
    else:
        if not (args.dataset and args.runs):
            raise UsageError("bias-capacity needs DATASET and --runs, or --simulate")
        full = load_dataset(args.dataset, args.dataset_format, args.voc_exclusive)
        runs = _read_runs(args.runs)
        _require_exists(*(p for _, _, p in runs))
        # rows without a method column form one series named after the runs file
        for method, k, p in runs:
            groups.setdefault(method or Path(args.runs).stem, []).append((k, load_proposals(p)))
        inputs += [args.dataset, args.runs, *(p for _, _, p in runs)]
    results = {}
    for name in sorted(groups):
        res = bias_capacity(full, groups[name], cfg, fixed_budget=args.fixed_budget, threads=args.threads)
        res.method_name = name
        for c in [*res.curves.values(), res.auc_at_fixed_budget, res.improvement]:
            c.method_name = name
        results[name] = res
    doc = {"manifest": RunManifest("bias-capacity", config, inputs, seeds).to_dict(),
           "results": [results[n].to_dict() for n in sorted(results)]}
    out = _out_dir(args)
    _emit_json(args, out, "bias_capacity.json", doc, "bias-capacity")
    if "csv" in _formats(args):
        rows = []
        for n in sorted(results):
            r = results[n]
            for k in r.seen_counts:
                rows += curve_rows([r.curves[k]], extra=[f"auc_vs_budget[seen={k}]"])
            rows += curve_rows([r.auc_at_fixed_budget], extra=["auc_at_fixed_budget"])
            rows += curve_rows([r.improvement], extra=["improvement"])
        write_csv(out / "bias_capacity.csv", ["curve", *CURVE_HEADER], rows)
    if "svg" in _formats(args):
        for n in sorted(results):
            r = results[n]
            per_k = []
            for k in r.seen_counts:
                c = r.curves[k]
                per_k.append(CurveResult(c.x_label, c.y_label, c.points, f"{n} seen={k}"))
            write_svg(out / f"{safe_name(n)}_bias_capacity.svg", [
                ("AUC vs #proposals per #seen", per_k, True),
                (f"AUC@{r.fixed_budget} vs #seen", [r.auc_at_fixed_budget], False),
                ("Improvement vs #proposals", [r.improvement], True),
            ])
    return 0


def cmd_synth(args) -> int:
    _require_exists(args.synth_config)
    scfg = load_synth_config(args.synth_config, **({} if args.seed is None else {"seed": args.seed}))
    full, partial = generate_dataset(scfg)
    out = _out_dir(args)
    save_dataset(full, out / "full.json")
    save_dataset(partial, out / "partial.json")
    doc = {
        "manifest": RunManifest("synth", scfg.to_dict(), [args.synth_config], [scfg.seed]).to_dict(),
        "num_images": len(full.images),
        "num_instances_full": len(full.instances),
        "num_instances_partial": len(partial.instances),
        "annotated_categories": sorted(partial.annotated_categories),
    }
    _emit_json(args, out, "synth.json", doc, "synth")
    if "csv" in _formats(args):
        counts = {c.id: 0 for c in full.categories}
        for g in full.instances:
            counts[g.category_id] += 1
        write_csv(out / "synth.csv", ["category_id", "name", "instances", "annotated"],
                  ([c.id, c.name, counts[c.id], int(c.id in partial.annotated_categories)] for c in full.categories))
    return 0


def cmd_stats(args) -> int:
    _require_exists(args.dataset)
    d = load_dataset(args.dataset, args.dataset_format, args.voc_exclusive)
    split = _subset_ids(d, args.subset)
    rep = annotation_stats(d, split)
    config = {"subset": sorted(d.category_by_id[c].name for c in split)}
    doc = {"manifest": RunManifest("stats", config, [args.dataset]).to_dict(), **rep.to_dict()}
    out = _out_dir(args)
    _emit_json(args, out, "stats.json", doc, "stats")
    if "csv" in _formats(args):
        write_csv(out / "stats.csv",
                  ["category_id", "name", "count", "mean_relative_area", "mean_sqrt_relative_area", "in_split"],
                  ([c.id, c.name, c.count, c.mean_relative_area, c.mean_sqrt_relative_area, int(c.in_split)]
                   for c in rep.per_category))
    print(f"inside={rep.inside_instances} outside={rep.outside_instances}")
    return 0


def cmd_convert(args) -> int:
    _require_exists(args.input)
    proposal_formats = ("csv", "json")
    if (args.in_format in proposal_formats) != (args.out_format in proposal_formats):
        raise UsageError("cannot convert between dataset and proposal formats")
    if args.in_format in proposal_formats:
        save_proposals(load_proposals(args.input, args.in_format), args.output, args.out_format)
        return 0
    fmt = {"voc": "voc", "voc-file": "voc-file", "coco": "coco", "canonical": "canonical"}[args.in_format]
    d = load_dataset(args.input, fmt, args.voc_exclusive)
    if args.out_format == "canonical":
        Path(args.output).write_text(dataset_to_canonical(d), encoding="utf-8")
    else:
        Path(args.output).write_text(dumps(dataset_to_coco(d)), encoding="utf-8")
    return 0


def cmd_finegrained(args) -> int:
    _require_exists(args.dataset, args.proposals, args.config, args.supercategory_map)
    d = load_dataset(args.dataset, args.dataset_format, args.voc_exclusive)
    p = load_proposals(args.proposals)
    cfg = load_evaluation_config(args.config)
    smap = load_supercategory_map(args.supercategory_map) if args.supercategory_map else None
    res = fine_grained_recall(d, p, args.iou, args.budget, args.key, cfg, smap, args.size_measure)
    config = {"evaluation": cfg.to_dict(), "key": args.key, "iou_threshold": args.iou,
              "budget": args.budget, "size_measure": args.size_measure}
    inputs = [args.dataset, args.proposals] + ([args.supercategory_map] if args.supercategory_map else [])
    doc = {"manifest": RunManifest("finegrained", config, inputs).to_dict(), **res.to_dict()}
    out = _out_dir(args)
    _emit_json(args, out, "finegrained.json", doc, "finegrained")
    if "csv" in _formats(args):
        write_csv(out / "finegrained.csv", ["rank", "label", "count", "recall"],
                  ([i + 1, r["label"], r["count"], r["recall"]] for i, r in enumerate(res.rows)))
    if "svg" in _formats(args) and res.rows:
        write_svg(out / f"{safe_name(p.method_name)}_finegrained_{args.key}.svg",
                  [(f"Recall@{args.iou:g} by {args.key}", [res.curve()], False)])
    return 0


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="evaluation config file (JSON, or TOML by suffix)")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--threads", type=int, default=1, help="worker threads for best-overlap computation")
    common.add_argument("--seed", type=int, default=None, help="override the seed of synthetic runs")
    common.add_argument("--format", action="append", choices=FORMATS,
                        help="output format; repeat for several (default: all)")
    common.add_argument("-v", "--verbose", action="store_true")

    ds = argparse.ArgumentParser(add_help=False)
    ds.add_argument("--dataset-format", default="auto", choices=["auto", "canonical", "coco", "voc", "voc-file"])
    ds.add_argument("--voc-exclusive", action="store_true",
                    help="VOC coordinates are already half-open; skip the +1 on xmax/ymax")

    parser = argparse.ArgumentParser(prog="propeval", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"propeval {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eval", parents=[common, ds], help="metric suite per proposal file")
    p.add_argument("dataset")
    p.add_argument("proposals", nargs="+")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gameability", parents=[common, ds], help="subset / complement / all evaluation")
    p.add_argument("dataset")
    p.add_argument("proposals", nargs="+")
    p.add_argument("--subset", required=True, help="comma list of category names, or a file of names")
    p.add_argument("--full-suite", action="store_true", help="embed the full metric suite per regime")
    p.set_defaults(func=cmd_gameability)

    p = sub.add_parser("bias-capacity", parents=[common, ds], help="AUC vs number of seen categories")
    p.add_argument("dataset", nargs="?")
    p.add_argument("--runs", help="CSV seen_count,path[,method]")
    p.add_argument("--simulate", metavar="SYNTH_CONFIG", help="generate the world and oracle-DMP runs")
    p.add_argument("--dmp", metavar="DMP_CONFIG", help="oracle-DMP config for --simulate")
    p.add_argument("--seen-counts", help="comma list of seen counts for --simulate (default 1..N)")
    p.add_argument("--fixed-budget", type=int, default=100)
    p.add_argument("--random-control", type=int, default=0, metavar="N",
                   help="also run a random proposer with N boxes per image in --simulate mode")
    p.set_defaults(func=cmd_bias_capacity)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic dataset")
    p.add_argument("synth_config")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("stats", parents=[common, ds], help="annotation statistics inside/outside a split")
    p.add_argument("dataset")
    p.add_argument("--subset", required=True)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("convert", parents=[common, ds], help="convert dataset or proposal files")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--from", dest="in_format", required=True,
                   choices=["voc", "voc-file", "coco", "canonical", "csv", "json"])
    p.add_argument("--to", dest="out_format", required=True, choices=["canonical", "coco", "csv", "json"])
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("finegrained", parents=[common, ds], help="per-category recall by size/frequency/group")
    p.add_argument("dataset")
    p.add_argument("proposals")
    p.add_argument("--key", default="size", choices=["size", "frequency", "supercategory"])
    p.add_argument("--iou", type=float, default=0.7)
    p.add_argument("--budget", type=int, default=100)
    p.add_argument("--size-measure", default="sqrt_area", choices=["sqrt_area", "area"])
    p.add_argument("--supercategory-map", help="CSV category,supercategory")
    p.set_defaults(func=cmd_finegrained)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="propeval: %(levelname)s: %(message)s")
    if args.threads < 1:
        print("propeval: error: --threads must be >= 1", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except (UsageError, *INPUT_ERRORS) as e:
        print(f"propeval: error: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # noqa: BLE001
        print(f"propeval: internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
