"""Command-line experiment runner and analysis exporter."""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

import numpy as np

from .convert import convert_fb100, convert_linqs, convert_planetoid
from .datasets import ExperimentConfig, load_dataset, parse_config, seed_pair, stratified_split
from .experiments import (base_prediction_for, coefficient_binned_accuracy, grid_search,
                          margin_rows, pca_export, run_experiment, summarize,
                          timeline_eval, write_bins_csv, write_margins_csv,
                          write_timeline_csv, _nlcs_stages)
from .graph import clustering_coefficient, enumerate_triangles, normalized_adjacency
from .mixing import MIXING_FUNCTIONS
from .postprocess import linear_correct_and_smooth
from .spreading import LabelMatrix, predict_argmax


def _add_common(p):
    p.add_argument("--config", help="sectioned key = value config file")
    p.add_argument("--dataset", help="dataset directory in canonical format")
    p.add_argument("--k", type=float, help="known-label ratio")
    p.add_argument("--seeds", help="master seeds, comma separated")
    p.add_argument("--alpha", type=float, help="triangle coefficient")
    p.add_argument("--beta", type=float, help="edge coefficient")
    p.add_argument("--t", type=int, help="propagation iterations")
    p.add_argument("--sigma", choices=sorted(MIXING_FUNCTIONS), help="mixing function")
    p.add_argument("--base", help="base model: pl, mlp, or file:<path>")
    p.add_argument("--teleport", choices=["error", "labels"],
                   help="correction-stage teleport term")
    p.add_argument("--methods", help="methods to run, comma separated")
    p.add_argument("--out", help="output directory")
    p.add_argument("--jobs", type=int, default=1, help="parallel seed jobs")


def _config_from_args(args) -> ExperimentConfig:
    if args.config:
        cfg = parse_config(args.config)
    else:
        missing = [f for f in ("dataset", "k", "seeds") if getattr(args, f) is None]
        if missing:
            raise SystemExit(f"missing --config or flags: {', '.join('--' + m for m in missing)}")
        cfg = ExperimentConfig(dataset=args.dataset, k=args.k,
                               seeds=tuple(int(s) for s in args.seeds.replace(",", " ").split()))
    overrides = {}
    if args.dataset is not None:
        overrides["dataset"] = args.dataset
    if args.k is not None:
        overrides["k"] = args.k
    if args.seeds is not None:
        overrides["seeds"] = tuple(int(s) for s in args.seeds.replace(",", " ").split())
    if args.alpha is not None:
        overrides["alpha"] = args.alpha
    if args.beta is not None:
        overrides["beta"] = args.beta
    if args.t is not None:
        overrides["t"] = args.t
    if args.sigma is not None:
        overrides["mixing"] = args.sigma
    if args.base is not None:
        overrides["base_model"] = args.base
    if args.teleport is not None:
        overrides["correct_teleport"] = args.teleport
    if args.methods is not None:
        overrides["methods"] = tuple(args.methods.replace(",", " ").split())
    if args.out is not None:
        overrides["out"] = args.out
    return dataclasses.replace(cfg, **overrides) if overrides else cfg


def _analysis_context(cfg: ExperimentConfig, track_every: int = 0):
    """One-seed pipeline state shared by the analysis subcommands."""
    ds = load_dataset(cfg.dataset)
    seed = cfg.seeds[0]
    split_seed, init_seed = seed_pair(seed)
    split = stratified_split(ds, cfg.k, split_seed)
    S = normalized_adjacency(ds.graph)
    tri = enumerate_triangles(ds.graph)
    y = np.full(ds.labels.shape, -1, dtype=np.int64)
    y[split.train] = ds.labels[split.train]
    Y = LabelMatrix.from_labels(y, ds.num_classes)
    base = base_prediction_for(cfg, ds, S, split, init_seed, track_every=track_every)
    corrected, smoothed = _nlcs_stages(cfg, base.scores, Y, S, tri)
    return dict(ds=ds, split=split, S=S, tri=tri, Y=Y, base=base,
                corrected=corrected, smoothed=smoothed)


def _cmd_run(args) -> int:
    cfg = _config_from_args(args)
    results, failures = run_experiment(cfg, n_jobs=args.jobs, out_dir=cfg.out)
    for method, (mean, std, count) in summarize(results).items():
        print(f"{method}: {100 * mean:.2f} +/- {100 * std:.2f} ({count} seeds)")
    for seed, message in failures:
        print(f"seed {seed} failed: {message}", file=sys.stderr)
    return 1 if failures else 0


def _cmd_grid(args) -> int:
    cfg = _config_from_args(args)
    alphas = [float(v) for v in args.alphas.split(",")]
    betas = [float(v) for v in args.betas.split(",")]
    (best_a, best_b), rows = grid_search(cfg, alphas, betas, method=args.method)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    with (out / f"grid_{args.method}.csv").open("w") as fh:
        fh.write("alpha,beta,val_accuracy\n")
        for a, b, acc in rows:
            fh.write(f"{a!r},{b!r},{acc!r}\n")
    print(f"best alpha={best_a}, beta={best_b} ({len(rows)} pairs evaluated)")
    return 0


def _cmd_bins(args) -> int:
    cfg = _config_from_args(args)
    ctx = _analysis_context(cfg)
    ds, split = ctx["ds"], ctx["split"]
    coeffs = clustering_coefficient(ds.graph, ctx["tri"])
    cs_corr, cs_smooth = linear_correct_and_smooth(
        ctx["base"].scores, ctx["Y"], ctx["S"], cfg.cs_correct_alpha,
        cfg.cs_smooth_alpha, cfg.cs_t)
    stage_preds = {
        "base": predict_argmax(ctx["base"].scores, split.test),
        "cs": predict_argmax(cs_smooth, split.test),
        "nlcs": predict_argmax(ctx["smoothed"], split.test),
    }
    edges = None
    if args.bin_edges:
        edges = [float(v) for v in args.bin_edges.split(",")]
    rows = coefficient_binned_accuracy(coeffs, ds.labels, stage_preds, split.test,
                                       edges=edges if edges else (0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6))
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    write_bins_csv(out / "bins.csv", rows)
    print(f"wrote {out / 'bins.csv'} ({len(rows)} bins)")
    return 0


def _cmd_margins(args) -> int:
    cfg = _config_from_args(args)
    ctx = _analysis_context(cfg)
    pair = tuple(int(v) for v in args.classes.split(","))
    stage_scores = {"base": ctx["base"].scores, "corrected": ctx["corrected"],
                    "smoothed": ctx["smoothed"]}
    rows = margin_rows(stage_scores, ctx["ds"].labels, ctx["split"].test, pair)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    write_margins_csv(out / "margins.csv", rows)
    print(f"wrote {out / 'margins.csv'} ({len(rows)} rows)")
    return 0


def _cmd_pca(args) -> int:
    cfg = _config_from_args(args)
    ctx = _analysis_context(cfg)
    matrices = {"base": ctx["base"].scores, "corrected": ctx["corrected"],
                "smoothed": ctx["smoothed"]}
    M = matrices[args.stage]
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"pca_{args.stage}.csv"
    pca_export(M, args.components, ctx["ds"].labels, path, seed=cfg.seeds[0])
    print(f"wrote {path}")
    return 0


def _cmd_timeline(args) -> int:
    cfg = _config_from_args(args)
    if cfg.base_model.startswith("file:"):
        raise SystemExit("timeline needs a trainable base model (pl or mlp)")
    ctx = _analysis_context(cfg, track_every=args.every)
    checkpoints = ctx["base"].checkpoints or []
    split, ds = ctx["split"], ctx["ds"]

    def refine(scores):
        return _nlcs_stages(cfg, scores, ctx["Y"], ctx["S"], ctx["tri"])

    rows = timeline_eval(checkpoints, refine, ds.labels, split.test)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    write_timeline_csv(out / "timeline.csv", rows)
    print(f"wrote {out / 'timeline.csv'} ({len(rows)} checkpoints)")
    return 0


def _cmd_convert(args) -> int:
    if args.format == "planetoid":
        convert_planetoid(args.src, args.name, args.dest)
    elif args.format == "fb100":
        convert_fb100(args.src, args.dest, label_column=args.label_column,
                      min_class_size=args.min_class_size)
    else:
        convert_linqs(args.content, args.cites, args.dest)
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="nlcs",
        description="Graph semi-supervised learning with triangle-aware "
                    "correct-and-smooth post-processing")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run the configured experiment over all seeds")
    _add_common(p_run)

    p_grid = sub.add_parser("grid", help="validation sweep over (alpha, beta)")
    _add_common(p_grid)
    p_grid.add_argument("--alphas", default="0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9")
    p_grid.add_argument("--betas", default="0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9")
    p_grid.add_argument("--method", default="nhols", choices=["lp", "nhols", "nlcs"])

    p_bins = sub.add_parser("bins", help="accuracy by clustering-coefficient bin")
    _add_common(p_bins)
    p_bins.add_argument("--bin-edges", help="comma-separated bin edges")

    p_marg = sub.add_parser("margins", help="export score-margin distributions")
    _add_common(p_marg)
    p_marg.add_argument("--classes", default="0,1", help="class pair, e.g. 0,1")

    p_pca = sub.add_parser("pca", help="export PCA projections of a stage's scores")
    _add_common(p_pca)
    p_pca.add_argument("--stage", default="smoothed",
                       choices=["base", "corrected", "smoothed"])
    p_pca.add_argument("--components", type=int, default=2)

    p_tl = sub.add_parser("timeline", help="accuracy vs training epoch")
    _add_common(p_tl)
    p_tl.add_argument("--every", type=int, default=100)

    p_conv = sub.add_parser("convert", help="convert a public release to canonical files")
    p_conv.add_argument("format", choices=["planetoid", "fb100", "linqs"])
    p_conv.add_argument("--src", help="source directory or .mat file")
    p_conv.add_argument("--name", help="planetoid dataset name, e.g. cora")
    p_conv.add_argument("--content", help="linqs .content file")
    p_conv.add_argument("--cites", help="linqs .cites file")
    p_conv.add_argument("--dest", required=True, help="destination directory")
    p_conv.add_argument("--label-column", type=int, default=4)
    p_conv.add_argument("--min-class-size", type=int, default=1)

    args = parser.parse_args(argv)
    handlers = {"run": _cmd_run, "grid": _cmd_grid, "bins": _cmd_bins,
                "margins": _cmd_margins, "pca": _cmd_pca,
                "timeline": _cmd_timeline, "convert": _cmd_convert}
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
