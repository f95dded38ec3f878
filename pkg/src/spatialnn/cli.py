"""Command line interface.

Subcommands: train, eval, prune-sweep, export-positions, aggregate, plot.
Every subcommand exits 0 on success and nonzero with a one-line diagnostic
on stderr otherwise (set SPATIALNN_DEBUG=1 for full tracebacks).
"""

import argparse
import os
import sys

from spatialnn import __version__
from spatialnn.config import RunConfig, apply_overrides, load_config
from spatialnn.errors import ConfigError


def _load_cfg(args):
    cfg = load_config(args.config) if args.config else RunConfig()
    overrides = list(args.set or [])
    if getattr(args, "seed", None) is not None:
        overrides.append("seed=%d" % args.seed)
    if getattr(args, "epochs", None) is not None:
        overrides.append("epochs=%d" % args.epochs)
    if getattr(args, "out", None) is not None:
        overrides.append("out_dir=%s" % args.out)
    if getattr(args, "data_dir", None) is not None:
        overrides.append("data_dir=%s" % args.data_dir)
    return apply_overrides(cfg, overrides)


def _add_config_args(p, with_training=True):
    p.add_argument("--config", help="config file (key = value lines)")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override a config field (repeatable)")
    p.add_argument("--data-dir", help="override data_dir")
    if with_training:
        p.add_argument("--seed", type=int, help="override seed")
        p.add_argument("--epochs", type=int, help="override epochs")
        p.add_argument("--out", help="override out_dir")


def cmd_train(args):
    from spatialnn.train import run_experiment

    cfg = _load_cfg(args)
    metrics = run_experiment(cfg)
    print("run complete: final test accuracy %.4f (%d epochs)"
          % (metrics.final_accuracy, len(metrics.rows)))
    print("artifacts in %s" % metrics.out_dir)
    return 0


def cmd_eval(args):
    from spatialnn.pruning import build_mask
    from spatialnn.train import evaluate, load_dataset, load_model

    cfg, model, masks = load_model(args.checkpoint)
    if args.data_dir:
        cfg = apply_overrides(cfg, ["data_dir=%s" % args.data_dir])
    _, test = load_dataset(cfg)
    if args.fraction is not None:
        mask = build_mask(model.ranking_blocks(), args.fraction, scope=cfg.prune_scope)
        masks = mask.keep
    acc = evaluate(model, cfg, test, masks=masks)
    print("test accuracy %.4f" % acc)
    return 0


def cmd_prune_sweep(args):
    from spatialnn.train import run_pruning_sweep

    cfg = _load_cfg(args)
    if args.protocol:
        cfg = apply_overrides(cfg, ["prune_protocol=%s" % args.protocol])
    fractions = [float(f) for f in args.fractions.split(",") if f]
    results = run_pruning_sweep(cfg, fractions, checkpoint=args.checkpoint)
    for frac, acc in results:
        print("fraction %.3f  accuracy %.4f" % (frac, acc))
    return 0


def cmd_export_positions(args):
    from spatialnn.export import export_positions

    path = export_positions(args.checkpoint, out_dir=args.out, class_id=args.class_id,
                            plot=not args.no_plots)
    print("positions written to %s" % path)
    return 0


def cmd_aggregate(args):
    from spatialnn.train import aggregate_seeds, format_summary_table, write_summary_csv

    summary = aggregate_seeds(args.csvs)
    print(format_summary_table(summary), end="")
    if args.out:
        write_summary_csv(args.out, summary)
        print("summary written to %s" % args.out)
    return 0


def cmd_plot(args):
    from spatialnn import plots
    from spatialnn.train import aggregate_seeds

    if args.kind == "metrics":
        plots.plot_metrics(args.inputs, args.out)
    elif args.kind == "sweep":
        plots.plot_sweep(args.inputs, args.out)
    else:
        plots.plot_bars(aggregate_seeds(args.inputs), args.out)
    print("figure written to %s" % args.out)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="spatialnn",
                                     description="Train networks by optimizing neuron positions; "
                                                 "weights are 1/distance in an embedded space.")
    parser.add_argument("--version", action="version", version="spatialnn %s" % __version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one model per the config")
    _add_config_args(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on the test split")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data-dir", help="override the checkpoint's data_dir")
    p.add_argument("--fraction", type=float, help="apply post-training pruning at this fraction")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("prune-sweep", help="accuracy across pruning fractions")
    _add_config_args(p)
    p.add_argument("--fractions", required=True, help="comma-separated fractions in [0,1)")
    p.add_argument("--protocol", choices=["post-training", "during-training"])
    p.add_argument("--checkpoint", help="reuse a trained checkpoint (post-training protocol)")
    p.set_defaults(func=cmd_prune_sweep)

    p = sub.add_parser("export-positions", help="dump neuron positions/activations + scatter plots")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", help="output directory (default: next to the checkpoint)")
    p.add_argument("--class-id", type=int, default=0, help="class whose mean image drives activations")
    p.add_argument("--no-plots", action="store_true")
    p.set_defaults(func=cmd_export_positions)

    p = sub.add_parser("aggregate", help="mean +- std of final accuracy across seeds")
    p.add_argument("csvs", nargs="+", help="metrics.csv files")
    p.add_argument("--out", help="write a summary CSV here")
    p.set_defaults(func=cmd_aggregate)

    p = sub.add_parser("plot", help="render metrics/sweep/summary figures")
    p.add_argument("--kind", choices=["metrics", "sweep", "bars"], required=True)
    p.add_argument("inputs", nargs="+", help="CSV files (metrics.csv for bars)")
    p.add_argument("--out", required=True, help="output figure path (.svg recommended)")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # surface a diagnostic, nonzero exit
        if os.environ.get("SPATIALNN_DEBUG"):
            raise
        kind = "config error" if isinstance(exc, ConfigError) else type(exc).__name__
        print("spatialnn: %s: %s" % (kind, exc), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
