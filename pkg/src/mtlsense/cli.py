"""Command-line entry point: ``mtlsense generate|train|compare|sweep|report``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import dataset, harness
from .harness import ExperimentConfig


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--physics", help="physics parameter file (key = value)")
    p.add_argument("--desk", action="store_true", help="CI preset: m=5000, 1500 epochs")
    p.add_argument("--m", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--seeds", help="comma-separated seeds, e.g. 0,1,2")
    p.add_argument("--noise-sigma", type=float, dest="noise_sigma")
    p.add_argument("--train-fraction", type=float, dest="train_fraction")
    p.add_argument("--out")
    p.add_argument("-v", "--verbose", action="store_true")


def _training(p: argparse.ArgumentParser) -> None:
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float, dest="learning_rate")
    p.add_argument("--svg", action="store_true", help="also render boxplot/KDE SVGs")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mtlsense", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic dataset to CSV")
    _common(p)

    p = sub.add_parser("train", help="train and evaluate a single network")
    _common(p)
    _training(p)
    p.add_argument("--network", default="c", help="a10|a30|a50|a80|b|c|spec:<file>")
    p.add_argument("--alphas", help="loss weights a1,a2[,a3] in branch order")

    p = sub.add_parser("compare", help="Table-2-style comparison over networks and seeds")
    _common(p)
    _training(p)
    p.add_argument("--network", "--networks", dest="networks",
                   help="comma-separated selectors (default a30,a50,a80,b,c)")

    p = sub.add_parser("sweep", help="Table-3-style loss-weight grid for network C")
    _common(p)
    _training(p)
    p.add_argument("--network", default="c")
    p.add_argument("--alphas", action="append",
                   help="a1,a2,a3 grid row; repeat for several rows (default: the six Table 3 rows)")

    p = sub.add_parser("report", help="recompute metrics from a stored predictions CSV")
    p.add_argument("predictions", help="predictions_<tag>.csv written by train/compare")
    p.add_argument("--out", help="output directory (default: next to the CSV)")
    p.add_argument("--label", default="unknown")
    p.add_argument("--tag", default="dev")
    p.add_argument("--svg", action="store_true")
    p.add_argument("-v", "--verbose", action="store_true")
    return parser


def resolve_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.desk() if args.desk else ExperimentConfig()
    if args.config:
        cfg = harness.load_config(args.config, cfg)
    overrides = {k: getattr(args, k, None) for k in
                 ("physics", "m", "seeds", "noise_sigma", "train_fraction", "out",
                  "epochs", "learning_rate")}
    if args.seed is not None and args.seeds is None:
        overrides["seeds"] = str(args.seed)
    return cfg.updated(overrides)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")

    if args.command == "report":
        path = Path(args.predictions)
        rep = harness.report_from_predictions(path, args.label, args.tag)
        out = Path(args.out) if args.out else path.parent / f"report_{path.stem}"
        rep.write(out)
        if args.svg:
            from .plots import write_svgs
            write_svgs(rep, out)
        print(f"MAE_O2 = {rep.mae_o2:.4f} % air   MAE_T = {rep.mae_t:.4f} degC   ({out})")
        return 0

    cfg = resolve_config(args)

    if args.command == "generate":
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        for seed in cfg.seeds:
            data = dataset.generate(cfg.physics, cfg.m, seed, noise_sigma=cfg.noise_sigma)
            data.to_csv(out / f"dataset_seed_{seed}.csv")
        cfg.physics.save(out / "physics.txt")
        print(f"wrote {len(cfg.seeds)} dataset(s) of {cfg.m} observations to {out}")
        return 0

    if args.command == "train":
        alphas = harness._float_tuple(args.alphas) if args.alphas else None
        cfg = cfg.updated({"networks": args.network, "alphas": args.alphas})
        harness.build_architecture(args.network, alphas)  # fail fast on bad selectors
        results, failures = harness.run_experiment(cfg, svg=args.svg)
    elif args.command == "compare":
        cfg = cfg.updated({"networks": args.networks or ",".join(harness.PAPER_NETWORKS)})
        results, failures = harness.run_experiment(cfg, svg=args.svg)
    else:  # sweep
        grid = [harness._float_tuple(a) for a in args.alphas] if args.alphas else harness.TABLE3_GRID
        table, results, failures = harness.weight_sweep(cfg, grid, selector=args.network, svg=args.svg)
        print(Path(cfg.out, "sweep_report.txt").read_text(), end="")
        return 1 if failures else 0

    if results:
        print(harness.format_table(results))
    for label, seed, msg in failures:
        print(f"FAILED {label} seed {seed}: {msg}", file=sys.stderr)
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
