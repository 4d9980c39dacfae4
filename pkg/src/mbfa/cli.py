"""Command-line interface for reproducible batch runs.

Subcommands: fit, evaluate, grid-search, sweep-d, synth, bench.  Options can
come from flags or an optional JSON config file (--config); flags win.  Every
command echoes its resolved configuration to run-config.json in the output
directory, and identical configurations produce byte-identical primary
artifacts (model.json, report.json, confusion.csv, sweep.csv).
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import data as data_mod
from . import embedding as emb
from . import evaluation as ev
from . import pipeline as pl

METHODS = ("MBFA", "MCCA")


@dataclass(frozen=True)
class RunConfig:
    command: str
    manifest: str | None
    method: str
    d: int
    side_info: tuple[str, ...] | None
    weights: tuple[float, ...] | None
    grid_step: float | None
    seed: int
    repeats: int
    out: str
    reg: float
    val_fraction: float

    def __post_init__(self):
        if self.d < 1:
            raise ValueError(f"d must be >= 1, got {self.d}")
        if self.repeats < 1:
            raise ValueError(f"repeats must be >= 1, got {self.repeats}")
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.weights is not None and self.grid_step is not None:
            raise ValueError("give either --weights or --grid-step, not both")


def _comma_strings(text: str) -> tuple[str, ...]:
    return tuple(s.strip() for s in text.split(",") if s.strip())


def _comma_floats(text: str) -> tuple[float, ...]:
    return tuple(float(s) for s in text.split(",") if s.strip())


def _comma_ints(text: str) -> tuple[int, ...]:
    return tuple(int(s) for s in text.split(",") if s.strip())


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mbfa",
        description="Multi-view embedding and zero-shot classification toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with option defaults; flags win")
    common.add_argument("--manifest", help="dataset manifest path")
    common.add_argument("--method", choices=METHODS, help="embedding method (default MBFA)")
    common.add_argument("--d", type=int, help="embedding dimension (default 2)")
    common.add_argument("--side-info", help="comma list of side-information types (default: all)")
    common.add_argument("--weights", help="comma list of fusion weights")
    common.add_argument("--grid-step", type=float, help="fusion-weight grid step")
    common.add_argument("--seed", type=int, help="random seed (default 0)")
    common.add_argument("--repeats", type=int, help="repeat count (default 1)")
    common.add_argument("--out", help="output directory (default 'out')")
    common.add_argument("--reg", type=float, help="MCCA ridge (default 1e-6)")
    common.add_argument("--val-fraction", type=float,
                        help="validation class fraction for grid search (default 0.2)")

    sub.add_parser("fit", parents=[common], help="fit an embedding model")

    p_eval = sub.add_parser("evaluate", parents=[common], help="evaluate on unseen classes")
    p_eval.add_argument("--model", help="model.json from a fit run (default: refit)")

    sub.add_parser("grid-search", parents=[common],
                   help="search fusion weights, then retrain on all seen classes")

    p_sweep = sub.add_parser("sweep-d", parents=[common], help="accuracy per dimension")
    p_sweep.add_argument("--d-list",
                         help="comma list of dimensions to sweep (default 40,50,120)")

    p_synth = sub.add_parser("synth", parents=[common], help="generate a synthetic dataset")
    p_synth.add_argument("--latent-dim", type=int, default=8)
    p_synth.add_argument("--classes", type=int, default=12)
    p_synth.add_argument("--instances", type=int, default=30)
    p_synth.add_argument("--unseen", type=int, default=0, help="unseen class count")
    p_synth.add_argument("--view-dims", default="20,12,10",
                         help="comma list: visual dim then one per side-info type")
    p_synth.add_argument("--view-sigmas", help="comma list of per-view noise sigmas")
    p_synth.add_argument("--latent-sigma", type=float, default=0.0)

    sub.add_parser("bench", parents=[common], help="time fitting and inference")
    return parser


def _resolve_config(args: argparse.Namespace) -> RunConfig:
    file_cfg = {}
    if args.config:
        path = Path(args.config)
        if not path.is_file():
            raise FileNotFoundError(f"config file not found: {path}")
        with open(path, "r", encoding="utf-8") as fh:
            file_cfg = json.load(fh)

    def pick(key, default=None):
        flag = getattr(args, key, None)
        if flag is not None:
            return flag
        return file_cfg.get(key, default)

    side_info = pick("side_info")
    if isinstance(side_info, str):
        side_info = _comma_strings(side_info)
    elif side_info is not None:
        side_info = tuple(str(s) for s in side_info)
    weights = pick("weights")
    if isinstance(weights, str):
        weights = _comma_floats(weights)
    elif weights is not None:
        weights = tuple(float(w) for w in weights)

    return RunConfig(
        command=args.command,
        manifest=pick("manifest"),
        method=pick("method", "MBFA"),
        d=int(pick("d", 2)),
        side_info=side_info,
        weights=weights,
        grid_step=pick("grid_step"),
        seed=int(pick("seed", 0)),
        repeats=int(pick("repeats", 1)),
        out=str(pick("out", "out")),
        reg=float(pick("reg", emb.DEFAULT_MCCA_REG)),
        val_fraction=float(pick("val_fraction", 0.2)),
    )


def _prepare_out(cfg: RunConfig, extra: dict | None = None) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    doc = {
        "command": cfg.command,
        "manifest": cfg.manifest,
        "method": cfg.method,
        "d": cfg.d,
        "side_info": list(cfg.side_info) if cfg.side_info else None,
        "weights": list(cfg.weights) if cfg.weights else None,
        "grid_step": cfg.grid_step,
        "seed": cfg.seed,
        "repeats": cfg.repeats,
        "out": cfg.out,
        "reg": cfg.reg,
        "val_fraction": cfg.val_fraction,
    }
    if extra:
        doc.update(extra)
    with open(out / "run-config.json", "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")
    return out


def _load_dataset(cfg: RunConfig) -> data_mod.ZslDataset:
    if not cfg.manifest:
        raise ValueError("--manifest is required for this command")
    return data_mod.load_dataset(cfg.manifest)


def _selection(cfg: RunConfig, dataset) -> tuple[str, ...]:
    return cfg.side_info if cfg.side_info else dataset.side_info_names


def cmd_fit(cfg: RunConfig) -> int:
    dataset = _load_dataset(cfg)
    out = _prepare_out(cfg)
    names = _selection(cfg, dataset)
    model, _ = pl.train(dataset, names, cfg.d, method=cfg.method, reg=cfg.reg)
    emb.save_model(out / "model.json", model)

    idx = data_mod.instance_indices(dataset, "seen")
    labels = dataset.labels[idx]
    views = [dataset.features[:, idx]]
    for name in names:
        views.append(np.ascontiguousarray(dataset.table(name).vectors[labels].T))
    objective = emb.objective_value(model, views)
    gram = emb.orthonormality_diagnostics(model)
    with open(out / "fit.log", "w", encoding="utf-8") as fh:
        fh.write(f"method {model.method} d {model.d} views {model.num_views}\n")
        fh.write("eigenvalues " + ",".join(_fmt(v) for v in model.eigenvalues) + "\n")
        fh.write(f"objective {_fmt(objective)}\n")
        fh.write(f"stacked_gram_deviation {_fmt(gram['stacked'])}\n")
        fh.write("per_view_gram_deviation "
                 + ",".join(_fmt(v) for v in gram["per_view"]) + "\n")
    print(f"model written to {out / 'model.json'}")
    return 0


def _evaluate_once(dataset, model, names, weights):
    prototypes = pl.embed_prototypes(model, dataset, names)
    preds, truth = pl.predict_split(
        dataset, model, prototypes, weights, dataset.unseen_classes
    )
    return ev.evaluate(preds, truth, dataset.unseen_classes)


def cmd_evaluate(cfg: RunConfig, model_path: str | None) -> int:
    dataset = _load_dataset(cfg)
    out = _prepare_out(cfg, {"model": model_path})
    names = _selection(cfg, dataset)
    if model_path:
        model = emb.load_model(model_path)
        if model.view_dims[0] != dataset.features.shape[0]:
            raise ValueError(
                f"model visual dimension {model.view_dims[0]} does not match "
                f"dataset features ({dataset.features.shape[0]})"
            )
        if model.num_views != len(names) + 1:
            raise ValueError(
                f"model has {model.num_views} views but {len(names)} "
                "side-information types are selected"
            )
    else:
        model, _ = pl.train(dataset, names, cfg.d, method=cfg.method, reg=cfg.reg)

    lines = []
    if cfg.weights is not None:
        weight_list = [pl.FusionWeights(cfg.weights)] * cfg.repeats
        lines.append("weights fixed " + ",".join(_fmt(a) for a in cfg.weights))
    else:
        step = cfg.grid_step if cfg.grid_step is not None else 0.1
        weight_list = []
        for r in range(cfg.repeats):
            w = pl.grid_search_weights(
                dataset, names, model.d, grid_step=step,
                val_fraction=cfg.val_fraction, seed=cfg.seed + r,
                method=model.method, reg=cfg.reg,
            )
            weight_list.append(w)
            lines.append(
                f"repeat {r} weights " + ",".join(_fmt(a) for a in w.alphas)
            )

    reports = [_evaluate_once(dataset, model, names, w) for w in weight_list]
    accuracies = [r.mean_per_class_top1 for r in reports]
    mean_acc, std_acc = ev.aggregate_repeats(accuracies)
    report = reports[0]
    if cfg.repeats > 1:
        report = ev.EvaluationReport(
            class_ids=report.class_ids,
            confusion=report.confusion,
            per_class_accuracy=report.per_class_accuracy,
            mean_per_class_top1=report.mean_per_class_top1,
            std_over_repeats=std_acc,
        )

    doc = ev.report_to_dict(report, dataset.class_names)
    if cfg.repeats > 1:
        doc["repeat_accuracies"] = accuracies
        doc["mean_over_repeats"] = mean_acc
    with open(out / "report.json", "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")
    ev.save_confusion_csv(out / "confusion.csv", report, dataset.class_names)
    with open(out / "evaluate.log", "w", encoding="utf-8") as fh:
        for line in lines:
            fh.write(line + "\n")
        fh.write(f"mean_per_class_top1 {_fmt(mean_acc)}\n")
        fh.write(f"std_over_repeats {_fmt(std_acc)}\n")
    print(f"mean per-class top-1 accuracy: {_fmt(mean_acc)} +/- {_fmt(std_acc)}")
    return 0


def cmd_grid_search(cfg: RunConfig) -> int:
    dataset = _load_dataset(cfg)
    out = _prepare_out(cfg)
    names = _selection(cfg, dataset)
    step = cfg.grid_step if cfg.grid_step is not None else 0.1
    if len(names) == 1:
        # single type: the weight is fixed at 1.0, nothing to search
        best = pl.FusionWeights((1.0,))
        scored = []
    else:
        scored = pl.weight_grid_scores(
            dataset, names, cfg.d, grid_step=step, val_fraction=cfg.val_fraction,
            seed=cfg.seed, repeats=cfg.repeats, method=cfg.method, reg=cfg.reg,
        )
        best_i = max(range(len(scored)), key=lambda i: scored[i][1])
        best = pl.FusionWeights(scored[best_i][0])

    model, _ = pl.train(dataset, names, cfg.d, method=cfg.method, reg=cfg.reg)
    emb.save_model(out / "model.json", model)
    with open(out / "weights.json", "w", encoding="utf-8") as fh:
        json.dump(
            {
                "alphas": list(best.alphas),
                "candidates": [
                    {"alphas": list(a), "accuracy": acc} for a, acc in scored
                ],
            },
            fh,
            indent=1,
        )
        fh.write("\n")
    with open(out / "grid.log", "w", encoding="utf-8") as fh:
        fh.write(f"evaluated {len(scored)} candidates\n")
        for alphas, acc in scored:
            fh.write(
                "candidate " + ",".join(_fmt(a) for a in alphas)
                + f" accuracy {_fmt(acc)}\n"
            )
        fh.write("selected " + ",".join(_fmt(a) for a in best.alphas) + "\n")
    print("selected weights: " + ",".join(_fmt(a) for a in best.alphas))
    return 0


DEFAULT_SWEEP_DIMS = (40, 50, 120)


def cmd_sweep_d(cfg: RunConfig, d_list: tuple[int, ...] | None) -> int:
    dataset = _load_dataset(cfg)
    if not d_list:
        d_list = DEFAULT_SWEEP_DIMS
    out = _prepare_out(cfg, {"d_list": list(d_list)})
    names = _selection(cfg, dataset)
    weights = pl.FusionWeights(cfg.weights) if cfg.weights else None
    rows = pl.sweep_dimension(
        dataset, names, weights, d_list, method=cfg.method, reg=cfg.reg
    )
    with open(out / "sweep.csv", "w", encoding="utf-8") as fh:
        fh.write("d,accuracy\n")
        for d, acc in rows:
            fh.write(f"{d},{_fmt(acc)}\n")
    for d, acc in rows:
        print(f"d={d} accuracy={_fmt(acc)}")
    return 0


def cmd_synth(cfg: RunConfig, args: argparse.Namespace) -> int:
    dims = _comma_ints(args.view_dims)
    sigmas = _comma_floats(args.view_sigmas) if args.view_sigmas else (0.0,) * len(dims)
    if len(sigmas) != len(dims):
        raise ValueError(
            f"{len(sigmas)} sigmas for {len(dims)} views; counts must match"
        )
    spec = data_mod.SyntheticSpec(
        latent_dim=args.latent_dim,
        class_count=args.classes,
        instances_per_class=args.instances,
        views=tuple(data_mod.ViewSpec(dim=d, sigma=s) for d, s in zip(dims, sigmas)),
        seed=cfg.seed,
        latent_sigma=args.latent_sigma,
        unseen_count=args.unseen,
    )
    out = _prepare_out(cfg, {
        "latent_dim": spec.latent_dim,
        "classes": spec.class_count,
        "instances": spec.instances_per_class,
        "unseen": spec.unseen_count,
        "view_dims": list(dims),
        "view_sigmas": list(sigmas),
        "latent_sigma": spec.latent_sigma,
    })
    dataset = data_mod.generate_synthetic(spec)
    manifest = data_mod.save_dataset(dataset, out)
    print(f"dataset written to {manifest}")
    return 0


def cmd_bench(cfg: RunConfig) -> int:
    dataset = _load_dataset(cfg)
    out = _prepare_out(cfg)
    names = _selection(cfg, dataset)
    weights = pl.FusionWeights(cfg.weights) if cfg.weights else None
    timing = ev.benchmark(
        dataset, names, cfg.d, weights=weights, repeats=cfg.repeats,
        method=cfg.method, reg=cfg.reg,
    )
    with open(out / "bench.json", "w", encoding="utf-8") as fh:
        json.dump(
            {
                "fit_seconds": timing.fit_seconds,
                "infer_ms_per_image": timing.infer_ms_per_image,
            },
            fh,
            indent=1,
        )
        fh.write("\n")
    print(f"fit_seconds {_fmt(timing.fit_seconds)}")
    print(f"infer_ms_per_image {_fmt(timing.infer_ms_per_image)}")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _resolve_config(args)
        if args.command == "fit":
            return cmd_fit(cfg)
        if args.command == "evaluate":
            return cmd_evaluate(cfg, args.model)
        if args.command == "grid-search":
            return cmd_grid_search(cfg)
        if args.command == "sweep-d":
            d_list = _comma_ints(args.d_list) if args.d_list else None
            return cmd_sweep_d(cfg, d_list)
        if args.command == "synth":
            return cmd_synth(cfg, args)
        if args.command == "bench":
            return cmd_bench(cfg)
        raise ValueError(f"unknown command {args.command!r}")
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
