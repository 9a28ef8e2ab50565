"""Experiment orchestration: config parsing, algorithm dispatch, scoring and reports."""
from __future__ import annotations

import csv
import json
import platform
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np
import scipy

from . import _backend
from .datasets import gen_blobs, gen_two_moons, load_csv
from .deformed import DeformedConfig, deformed_inductive_result, deformed_transductive
from .errors import ConfigError, GraphSSLError
from .fast_taylor import fast_lgc
from .graph import Dataset, Graph, auto_sigma, build_constrained_graph, build_knn_graph
from .mknn import fatigue_similarity, mknn_classify
from .pdl import fit_pdl, predict_posterior
from .propagation import PropagationConfig, PropagationResult, flap, gfhf, lgc_closed, lgc_iterate
from .tllt import TeacherConfig, tllt_run, write_history_jsonl

TIMING_FIELDS = ("wall_ms",)


def accuracy(predicted, truth, mask=None) -> float:
    """Fraction of ``predicted == truth`` over the masked indices."""
    predicted = np.asarray(predicted)
    truth = np.asarray(truth)
    if predicted.shape != truth.shape:
        raise ValueError("predicted and truth must have equal lengths")
    mask = np.ones(truth.shape, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    if not mask.any():
        return float("nan")
    return float(np.mean(predicted[mask] == truth[mask]))


@dataclass
class RunContext:
    data: Dataset
    graph: Graph
    k: int
    sigma: Any
    outputs: dict


def _alpha(p, default=0.99):
    return float(p.get("alpha", default))


def _run_lgc(ctx: RunContext, p: dict) -> PropagationResult:
    if p.get("iterative", False):
        cfg = PropagationConfig(_alpha(p), float(p.get("tolerance", 1e-8)), int(p.get("max_iterations", 10000)))
        return lgc_iterate(ctx.graph, ctx.data, cfg)
    return lgc_closed(ctx.graph, ctx.data, _alpha(p))


def _run_lgc_iterate(ctx, p):
    return _run_lgc(ctx, {**p, "iterative": True})


def _run_gfhf(ctx, p):
    return gfhf(ctx.graph, ctx.data)


def _run_flap(ctx, p):
    cfg = PropagationConfig(_alpha(p), float(p.get("tolerance", 1e-8)), int(p.get("max_iterations", 10000)))
    return flap(ctx.graph, ctx.data, cfg, float(p.get("gamma", 1.0)), closed=bool(p.get("closed", False)))


def _run_fast_lgc(ctx, p):
    sigma = p.get("sigma", "auto")
    if isinstance(sigma, str):
        sigma = float(p.get("sigma_scale", 4.0)) * auto_sigma(ctx.data.features, ctx.k)
    return fast_lgc(ctx.data, None, _alpha(p), float(sigma))


def _run_pdl(ctx, p):
    res = fit_pdl(ctx.data, k=int(p.get("k", ctx.k)), sigma=p.get("sigma", ctx.sigma), alpha=_alpha(p),
                  gamma=float(p.get("gamma", 1e5)))
    return PropagationResult(predict_posterior(res.model, ctx.data.features), info={"model": res.model})


def _run_mknn(ctx, p):
    g = build_constrained_graph(ctx.data, int(p.get("graph_k", ctx.k)), p.get("sigma", ctx.sigma))
    sim = fatigue_similarity(g, _alpha(p))
    return mknn_classify(sim, ctx.data, int(p.get("k", 3)))


def _deformed_cfg(p):
    return DeformedConfig(beta=float(p.get("beta", 1.0)), gamma=float(p.get("gamma", 0.1)),
                          alpha_rkhs=float(p.get("alpha_rkhs", 1e-3)), sigma=p.get("sigma", "auto"))


def _run_deformed(ctx, p):
    return deformed_transductive(ctx.graph, ctx.data, _deformed_cfg(p))


def _run_deformed_inductive(ctx, p):
    return deformed_inductive_result(ctx.data, ctx.graph, _deformed_cfg(p))


def _run_tllt(ctx, p):
    cfg = TeacherConfig(float(p.get("gamma_fb", 1.0)), float(p.get("epsilon", 1e-6)), int(p.get("s_initial", 1)))
    res = tllt_run(ctx.data, ctx.graph, cfg)
    if ctx.outputs.get("history"):
        write_history_jsonl(res.history, ctx.outputs["history"])
    return res


ALGORITHMS: dict[str, Callable[[RunContext, dict], PropagationResult]] = {
    "lgc": _run_lgc,
    "lgc_iterate": _run_lgc_iterate,
    "gfhf": _run_gfhf,
    "flap": _run_flap,
    "fast_lgc": _run_fast_lgc,
    "pdl": _run_pdl,
    "mknn": _run_mknn,
    "deformed": _run_deformed,
    "deformed_inductive": _run_deformed_inductive,
    "tllt": _run_tllt,
}


@dataclass
class ExperimentConfig:
    dataset: dict
    graph: dict = field(default_factory=lambda: {"k": 10, "sigma": "auto"})
    algorithms: list = field(default_factory=list)
    seed: int = 0
    output: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, doc: dict, base_dir=None) -> "ExperimentConfig":
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(doc) - {"dataset", "graph", "algorithms", "seed", "output"}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "dataset" not in doc or not isinstance(doc["dataset"], dict):
            raise ConfigError("config needs a 'dataset' object")
        ds = dict(doc["dataset"])
        if "csv" in ds and base_dir is not None:
            ds["csv"] = str(Path(base_dir, ds["csv"]))
        elif "csv" not in ds and ds.get("generator") not in ("two-moons", "blobs"):
            raise ConfigError("dataset needs 'csv' or 'generator' in {two-moons, blobs}")
        algos = []
        for a in doc.get("algorithms", []):
            a = {"name": a} if isinstance(a, str) else dict(a)
            if a.get("name") not in ALGORITHMS:
                raise ConfigError(f"unknown algorithm {a.get('name')!r}; choose from {sorted(ALGORITHMS)}")
            algos.append(a)
        seed = doc.get("seed", 0)
        if not isinstance(seed, int) or seed < 0:
            raise ConfigError("seed must be a nonnegative integer")
        graph = {"k": 10, "sigma": "auto", **doc.get("graph", {})}
        if not isinstance(graph["k"], int) or graph["k"] < 1:
            raise ConfigError("graph.k must be a positive integer")
        if not (graph["sigma"] == "auto" or (isinstance(graph["sigma"], (int, float)) and graph["sigma"] > 0)):
            raise ConfigError("graph.sigma must be 'auto' or a positive number")
        return cls(ds, graph, algos, seed, dict(doc.get("output", {})))

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            doc = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(doc, Path(path).parent)

    def make_dataset(self) -> Dataset:
        ds = self.dataset
        try:
            if "csv" in ds:
                return load_csv(ds["csv"])
            lpc = int(ds.get("labels_per_class", 1))
            if ds["generator"] == "two-moons":
                return gen_two_moons(int(ds.get("n", 200)), float(ds.get("noise", 0.05)), lpc, self.seed)
            return gen_blobs(int(ds.get("n", 200)), ds.get("centers", [[0.0, 0.0], [5.0, 5.0]]),
                             float(ds.get("stddev", 1.0)), lpc, self.seed)
        except (GraphSSLError, OSError, KeyError, TypeError) as exc:
            raise ConfigError(f"cannot build dataset: {exc}") from exc


@dataclass
class ExperimentReport:
    dataset: dict
    graph: dict
    seed: int
    algorithms: list
    environment: dict
    predictions: dict = field(default_factory=dict, repr=False)

    @property
    def failed(self) -> bool:
        return any(a.get("error") for a in self.algorithms)

    def to_dict(self, timings: bool = True) -> dict:
        algos = [{k: v for k, v in a.items() if timings or k not in TIMING_FIELDS} for a in self.algorithms]
        return {"dataset": self.dataset, "graph": self.graph, "seed": self.seed,
                "algorithms": algos, "environment": self.environment}

    def to_json(self, timings: bool = True) -> str:
        return json.dumps(self.to_dict(timings), sort_keys=True, indent=2) + "\n"


def environment_metadata() -> dict:
    return {"python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "kernel_backend": _backend.BACKEND}


def write_predictions(report: ExperimentReport, data: Dataset, path) -> None:
    X = data.features
    ys = X[:, 1] if data.d > 1 else np.zeros(data.n)
    truth = data.truth if data.truth is not None else np.full(data.n, -1)
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "true", "predicted", "algorithm"])
        for name, pred in report.predictions.items():
            for i in range(data.n):
                w.writerow([format(X[i, 0], ".17g"), format(ys[i], ".17g"), int(truth[i]), int(pred[i]), name])


def run_experiment(cfg: ExperimentConfig, data: Dataset | None = None) -> ExperimentReport:
    """Build the graph once, run every configured algorithm and score it.

    Accuracy counts only samples unlabeled at training time.  An algorithm
    failure is recorded in its entry and the remaining algorithms still run.
    """
    data = cfg.make_dataset() if data is None else data
    if data.truth is None:
        raise ConfigError("dataset has no ground truth to score against")
    k, sigma = int(cfg.graph["k"]), cfg.graph["sigma"]
    mask = ~data.labeled_mask
    summary = {"n": data.n, "d": data.d, "num_classes": data.num_classes,
               "num_labeled": int(data.labeled_mask.sum())}
    graph_info = {"k": k, "sigma": sigma}
    entries, preds = [], {}
    graph = None
    if cfg.algorithms:
        try:
            graph = build_knn_graph(data, k, sigma)
            graph_info["edges"] = int(graph.weights.nnz // 2)
        except GraphSSLError as exc:
            raise ConfigError(f"cannot build graph: {exc}") from exc
    ctx = RunContext(data, graph, k, sigma, cfg.output)
    for spec in cfg.algorithms:
        name = spec.get("label", spec["name"])
        params = {key: v for key, v in spec.items() if key not in ("name", "label")}
        entry = {"name": name, "algorithm": spec["name"], "params": params}
        t0 = time.perf_counter()
        try:
            res = ALGORITHMS[spec["name"]](ctx, params)
        except (GraphSSLError, ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
            entry.update(error=f"{type(exc).__name__}: {exc}", accuracy=None, iterations=None, converged=False)
        else:
            pred = res.predicted
            preds[name] = pred
            entry.update(error=None, accuracy=accuracy(pred, data.truth, mask),
                         iterations=int(res.iterations), converged=bool(res.converged))
        entry["wall_ms"] = round((time.perf_counter() - t0) * 1000.0, 3)
        entries.append(entry)
    report = ExperimentReport(summary, graph_info, cfg.seed, entries, environment_metadata(), preds)
    if cfg.output.get("report"):
        Path(cfg.output["report"]).write_text(report.to_json())
    if cfg.output.get("predictions"):
        write_predictions(report, data, cfg.output["predictions"])
    return report
