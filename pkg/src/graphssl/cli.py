"""Command line interface: ``graphssl gen | run | plot``.

Exit codes: 0 success, 1 configuration or input error, 2 algorithm failure.
``SSL_THREADS`` caps the threads used by the BLAS/LAPACK backends.
"""
from __future__ import annotations

import argparse
import csv
import os
import sys
from collections import defaultdict
from contextlib import nullcontext
from pathlib import Path

from .datasets import gen_blobs, gen_two_moons, save_csv
from .errors import ConfigError, GraphSSLError

EXIT_OK, EXIT_CONFIG, EXIT_ALGORITHM = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _centers(text: str):
    try:
        return [[float(v) for v in c.split(",")] for c in text.split(";") if c.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"centers must look like '0,0;5,5', got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="graphssl", description="Graph-based semi-supervised learning benchmarks")
    sub = p.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a synthetic dataset as CSV")
    gen.add_argument("kind", choices=["two-moons", "blobs"])
    gen.add_argument("--n", type=int, default=200)
    gen.add_argument("--noise", type=float, default=0.05, help="two-moons noise stddev")
    gen.add_argument("--centers", type=_centers, default=[[0.0, 0.0], [5.0, 5.0]], help="blobs: 'x,y;x,y'")
    gen.add_argument("--stddev", type=float, default=1.0, help="blobs stddev")
    gen.add_argument("--labels-per-class", type=int, default=1)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("-o", "--output", required=True)

    run = sub.add_parser("run", help="run an experiment config")
    run.add_argument("--config", required=True)
    run.add_argument("-o", "--output", help="report JSON path (overrides config)")
    run.add_argument("--predictions", help="per-point prediction CSV path (overrides config)")
    run.add_argument("--history", help="TLLT round history JSONL path (overrides config)")

    plot = sub.add_parser("plot", help="scatter plot data from a prediction CSV")
    plot.add_argument("--predictions", required=True)
    plot.add_argument("-o", "--output", required=True, help=".svg for an image, .csv/.dat for gnuplot blocks")
    plot.add_argument("--algorithm", action="append", help="restrict to these algorithms")
    return p


def _cmd_gen(args) -> int:
    try:
        if args.kind == "two-moons":
            data = gen_two_moons(args.n, args.noise, args.labels_per_class, args.seed)
        else:
            data = gen_blobs(args.n, args.centers, args.stddev, args.labels_per_class, args.seed)
    except GraphSSLError as exc:
        print(f"graphssl gen: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    save_csv(data, args.output)
    return EXIT_OK


def _cmd_run(args) -> int:
    from .experiment import ExperimentConfig, run_experiment

    try:
        cfg = ExperimentConfig.load(args.config)
        for key in ("predictions", "history"):
            if getattr(args, key):
                cfg.output[key] = getattr(args, key)
        if args.output:
            cfg.output["report"] = args.output
        report = run_experiment(cfg)
    except ConfigError as exc:
        print(f"graphssl run: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if not cfg.output.get("report"):
        sys.stdout.write(report.to_json())
    for a in report.algorithms:
        if a["error"]:
            print(f"graphssl run: {a['name']} failed: {a['error']}", file=sys.stderr)
    return EXIT_ALGORITHM if report.failed else EXIT_OK


def read_predictions(path, algorithms=None) -> dict:
    groups = defaultdict(list)
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {"x", "y", "true", "predicted", "algorithm"} - set(reader.fieldnames or [])
        if missing:
            raise ConfigError(f"prediction file lacks columns {sorted(missing)}")
        for row in reader:
            if algorithms and row["algorithm"] not in algorithms:
                continue
            groups[row["algorithm"]].append(
                (float(row["x"]), float(row["y"]), int(row["true"]), int(row["predicted"])))
    return dict(groups)


def write_gnuplot_blocks(groups: dict, path) -> None:
    """One data block per algorithm, separated by two blank lines (gnuplot ``index``)."""
    with Path(path).open("w") as fh:
        for b, (name, rows) in enumerate(groups.items()):
            if b:
                fh.write("\n\n")
            fh.write(f"# index {b}: {name}\n# x,y,true,predicted\n")
            for x, y, t, p in rows:
                fh.write(f"{x!r},{y!r},{t},{p}\n")


def write_svg(groups: dict, path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    import numpy as np

    m = max(len(groups), 1)
    cols = min(m, 4)
    rows = (m + cols - 1) // cols
    fig, axes = plt.subplots(rows, cols, figsize=(3.2 * cols, 3.0 * rows), squeeze=False)
    for ax in axes.ravel():
        ax.set_axis_off()
    for ax, (name, pts) in zip(axes.ravel(), groups.items()):
        a = np.asarray(pts, dtype=float)
        ax.set_axis_on()
        ax.scatter(a[:, 0], a[:, 1], c=a[:, 3], cmap="coolwarm", s=8)
        wrong = (a[:, 2] >= 0) & (a[:, 2] != a[:, 3])
        ax.scatter(a[wrong, 0], a[wrong, 1], facecolors="none", edgecolors="k", s=30, linewidths=0.6)
        ax.set_title(f"{name} ({int(wrong.sum())} errors)", fontsize=9)
        ax.set_xticks([])
        ax.set_yticks([])
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def _cmd_plot(args) -> int:
    try:
        groups = read_predictions(args.predictions, args.algorithm)
    except (OSError, ValueError, KeyError) as exc:
        print(f"graphssl plot: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if not groups:
        print("graphssl plot: no prediction rows to plot", file=sys.stderr)
        return EXIT_CONFIG
    if Path(args.output).suffix.lower() == ".svg":
        write_svg(groups, args.output)
    else:
        write_gnuplot_blocks(groups, args.output)
    return EXIT_OK


def _thread_limit():
    threads = os.environ.get("SSL_THREADS")
    if not threads:
        return nullcontext()
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=max(1, int(threads)))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = {"gen": _cmd_gen, "run": _cmd_run, "plot": _cmd_plot}[args.command]
    with _thread_limit():
        return handler(args)


if __name__ == "__main__":
    sys.exit(main())
