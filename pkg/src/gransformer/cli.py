"""``gransformer`` command line.

Subcommands: ``synth``, ``train``, ``generate``, ``evaluate``, ``oracle``.
Exit codes: 0 success, 2 config or usage, 3 data or IO, 4 numerical.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import tensor as T
from .config import ConfigError, load_config
from .datasets import DatasetParseError, read_dataset, synthetic_dataset, write_dataset
from .evaluation import CLUSTERING_BINS, format_report_csv, format_report_text, mmd_report, statistics_for
from .graph import GraphError, admit
from .model import Gransformer
from .oracles import SUITES
from .plotting import histogram_bars, mean_histogram
from .sampling import DataError, NodeSizeDistribution, generate_graph
from .training import CheckpointError, NumericalAbort, save_checkpoint, split_dataset, train

log = logging.getLogger("gransformer")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _threads(args) -> int:
    if args.threads is not None:
        return args.threads
    env = os.environ.get("GRANSFORMER_THREADS")
    if env is None:
        return 1
    try:
        value = int(env)
    except ValueError:
        raise CliError(f"GRANSFORMER_THREADS must be an integer, got {env!r}", EXIT_CONFIG) from None
    if value < 1:
        raise CliError("GRANSFORMER_THREADS must be >= 1", EXIT_CONFIG)
    return value


def _read(path):
    try:
        return read_dataset(path)
    except DatasetParseError as exc:
        raise CliError(str(exc), EXIT_DATA) from None


def _fmt(x: float) -> str:
    return "nan" if np.isnan(x) else f"{x:.17g}"


# commands ------------------------------------------------------------------------------


def cmd_synth(args) -> int:
    count = 100 if args.count is None else args.count
    graphs = synthetic_dataset(count, seed=args.seed or 0)
    out = args.out or "synthetic.txt"
    write_dataset(out, graphs)
    print(f"wrote {len(graphs)} graphs to {out}")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = load_config(args.config, args.override, args.seed)
    if cfg.dataset is None:
        raise CliError("config error: key 'dataset' is required for training", EXIT_CONFIG)
    ds = _read(cfg.dataset)
    graphs = admit(ds.graphs, cfg.encoder.n_max)
    if not graphs:
        raise CliError(f"{cfg.dataset}: no graphs left after admission", EXIT_DATA)
    out = Path(args.out or cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    train_set, test_set = split_dataset(graphs, cfg.train.test_fraction, cfg.train.seed)
    if not train_set:
        raise CliError("training split is empty", EXIT_DATA)
    sizes = sorted(g.n for g in train_set)
    extra = {"node_sizes": sizes, "train": cfg.train.__dict__}

    model = Gransformer(cfg.encoder, seed=cfg.model_seed)
    rng = np.random.default_rng(cfg.train.seed)
    save_checkpoint(model, out / "ckpt_epoch0.grns", 0, rng.bit_generator.state, extra)

    trace_path = out / "trace.csv"
    with open(trace_path, "w", encoding="utf-8") as fh:
        fh.write("epoch,train_nll,test_nll\n")

        def on_epoch(row):
            fh.write(f"{row[0]},{_fmt(row[1])},{_fmt(row[2])}\n")
            fh.flush()
            log.info("epoch %d train %.4f test %.4f", *row)

        def on_checkpoint(epoch, r):
            save_checkpoint(model, out / f"ckpt_epoch{epoch}.grns", epoch, r.bit_generator.state, extra)

        trace = train(model, train_set, test_set, cfg.train, rng, on_epoch, on_checkpoint)
    save_checkpoint(model, out / "model.grns", len(trace), rng.bit_generator.state, extra)
    print(f"trained {len(trace)} epochs on {len(train_set)} graphs; wrote {trace_path} and {out / 'model.grns'}")
    return EXIT_OK


def cmd_generate(args) -> int:
    from .training import load_checkpoint

    try:
        model, meta = load_checkpoint(args.checkpoint)
    except (CheckpointError, OSError) as exc:
        raise CliError(f"{args.checkpoint}: {exc}", EXIT_DATA) from None
    count = 10 if args.count is None else args.count
    if count < 0:
        raise CliError("--count must be >= 0", EXIT_CONFIG)
    try:
        sizes = NodeSizeDistribution.from_sizes(meta.get("node_sizes") or [model.config.n_max],
                                                model.config.n_max)
    except ValueError as exc:
        raise CliError(f"{args.checkpoint}: bad node_sizes: {exc}", EXIT_DATA) from None
    rng = np.random.default_rng(args.seed or 0)
    graphs = [generate_graph(model, sizes, rng) for _ in range(count)]
    out = args.out or "generated.txt"
    write_dataset(out, graphs)
    print(f"wrote {count} graphs to {out}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    a, b = _read(args.set_a), _read(args.set_b)
    if not a.graphs or not b.graphs:
        raise CliError("both sets must contain at least one graph", EXIT_DATA)
    threads = _threads(args)
    sa, sb = statistics_for(a.graphs, threads), statistics_for(b.graphs, threads)
    entries = mmd_report(a.graphs, b.graphs, stats=(sa, sb))
    out = Path(args.out or "report")
    out.mkdir(parents=True, exist_ok=True)
    text = format_report_text(entries)
    (out / "report.txt").write_text(text, encoding="utf-8")
    (out / "report.csv").write_text(format_report_csv(entries), encoding="utf-8")

    edges = np.linspace(0.0, 1.0, CLUSTERING_BINS + 1)
    for stat, xlabel, bin_edges in (("deg", "degree", None), ("clus", "clustering coefficient", edges)):
        ha = mean_histogram(getattr(s, stat) for s in sa)
        hb = mean_histogram(getattr(s, stat) for s in sb)
        size = max(len(ha), len(hb))
        ha, hb = np.pad(ha, (0, size - len(ha))), np.pad(hb, (0, size - len(hb)))
        rows = ["bin,set_a,set_b"] + [f"{k},{x:.17g},{y:.17g}" for k, (x, y) in enumerate(zip(ha, hb))]
        (out / f"{stat}_hist.csv").write_text("\n".join(rows) + "\n", encoding="utf-8")
        histogram_bars(out / f"{stat}.svg", ha, hb, (Path(args.set_a).name, Path(args.set_b).name),
                       xlabel, f"mean {xlabel} histogram", bin_edges)
    print("--- report ---")
    print(text, end="")
    print("--- csv ---")
    print(format_report_csv(entries), end="")
    return EXIT_OK


def cmd_oracle(args) -> int:
    if args.suite == "list":
        for name in SUITES:
            print(name)
        return EXIT_OK
    if args.suite not in SUITES:
        raise CliError(f"unknown suite {args.suite!r}; choose from {', '.join(SUITES)}", EXIT_CONFIG)
    fn = SUITES[args.suite]
    checks = fn() if args.seed is None else fn(seed=args.seed)
    for c in checks:
        print(c.line())
    return EXIT_OK if all(c.passed for c in checks) else EXIT_NUMERIC


# parser ---------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value configuration file")
    common.add_argument("--seed", type=int, help="random seed (unsigned)")
    common.add_argument("--out", help="output file or directory")
    common.add_argument("--count", type=int, help="number of graphs")
    common.add_argument("--threads", type=int, help="worker threads (fallback: GRANSFORMER_THREADS)")
    common.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                        help="override a configuration key (repeatable)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="gransformer", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("synth", parents=[common], help="write the synthetic grid/community dataset")
    sub.add_parser("train", parents=[common], help="train a model from a config")
    p = sub.add_parser("generate", parents=[common], help="sample graphs from a checkpoint")
    p.add_argument("checkpoint")
    p = sub.add_parser("evaluate", parents=[common], help="MMD report between two graph sets")
    p.add_argument("set_a")
    p.add_argument("set_b")
    p = sub.add_parser("oracle", parents=[common], help="run an oracle suite ('list' to list)")
    p.add_argument("suite")
    return parser


COMMANDS = {
    "synth": cmd_synth,
    "train": cmd_train,
    "generate": cmd_generate,
    "evaluate": cmd_evaluate,
    "oracle": cmd_oracle,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.seed is not None and args.seed < 0:
        print("error: --seed must be non-negative", file=sys.stderr)
        return EXIT_CONFIG
    if args.threads is not None and args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DatasetParseError, GraphError, DataError, CheckpointError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalAbort, T.NonFiniteError, T.DomainError, FloatingPointError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
