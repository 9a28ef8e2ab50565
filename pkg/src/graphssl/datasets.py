"""Synthetic benchmark generators and CSV input/output.

Random numbers come from numpy's PCG64 bit generator
(``numpy.random.default_rng(seed)``), so a seed reproduces a dataset
bit for bit.
"""
from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from .errors import CsvFormatError, InvalidParameterError
from .graph import UNLABELED, Dataset


def _reveal(rng: np.random.Generator, truth: np.ndarray, num_classes: int, labels_per_class: int) -> np.ndarray:
    labels = np.full(truth.size, UNLABELED, dtype=np.int64)
    for c in range(num_classes):
        idx = np.flatnonzero(truth == c)
        if idx.size == 0:
            continue
        if labels_per_class > idx.size:
            raise InvalidParameterError(
                f"labels_per_class={labels_per_class} exceeds the {idx.size} samples of class {c}")
        labels[np.sort(rng.choice(idx, labels_per_class, replace=False))] = c
    return labels


def gen_two_moons(n: int = 200, noise: float = 0.05, labels_per_class: int = 1, seed: int = 0) -> Dataset:
    """Two interleaved unit half-circles with isotropic Gaussian noise.

    Class 0 is the upper arc centred at the origin, class 1 the lower arc
    centred at (1, 0.5).
    """
    n = int(n)
    if n < 2 or n % 2:
        raise InvalidParameterError(f"n must be a positive even number, got {n}")
    if labels_per_class < 1 or labels_per_class > n // 2:
        raise InvalidParameterError(f"labels_per_class must lie in 1..{n // 2}")
    if noise < 0:
        raise InvalidParameterError("noise must be nonnegative")
    rng = np.random.default_rng(seed)
    half = n // 2
    t = np.linspace(0.0, math.pi, half)
    upper = np.column_stack([np.cos(t), np.sin(t)])
    lower = np.column_stack([1.0 - np.cos(t), 0.5 - np.sin(t)])
    X = np.vstack([upper, lower])
    if noise > 0:
        X = X + rng.normal(scale=noise, size=X.shape)
    truth = np.repeat([0, 1], half)
    return Dataset(X, _reveal(rng, truth, 2, labels_per_class), 2, truth)


def gen_blobs(n: int, centers, stddev: float = 1.0, labels_per_class: int = 1, seed: int = 0) -> Dataset:
    """Isotropic Gaussian blobs, one class per center.

    Samples are split evenly, the first ``n % m`` centers getting one extra.
    A single center still yields a two-class dataset (class 1 empty).
    """
    C = np.atleast_2d(np.asarray(centers, dtype=float))
    m = C.shape[0]
    if m < 1 or n < m:
        raise InvalidParameterError("need at least one center and one sample per center")
    if stddev < 0:
        raise InvalidParameterError("stddev must be nonnegative")
    rng = np.random.default_rng(seed)
    sizes = np.full(m, n // m)
    sizes[: n % m] += 1
    truth = np.repeat(np.arange(m), sizes)
    X = C[truth].copy()
    if stddev > 0:
        X += rng.normal(scale=stddev, size=X.shape)
    num_classes = max(2, m)
    return Dataset(X, _reveal(rng, truth, num_classes, labels_per_class), num_classes, truth)


def save_csv(data: Dataset, path) -> None:
    """Write ``f1,...,fd,label[,truth]``; unlabeled samples get ``?``."""
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        header = [f"f{j + 1}" for j in range(data.d)] + ["label"]
        if data.truth is not None:
            header.append("truth")
        w.writerow(header)
        for i in range(data.n):
            row = [format(v, ".17g") for v in data.features[i]]
            row.append("?" if data.labels[i] == UNLABELED else str(int(data.labels[i])))
            if data.truth is not None:
                row.append(str(int(data.truth[i])))
            w.writerow(row)


def _parse_class(text: str, line: int, allow_unlabeled: bool) -> int:
    text = text.strip()
    if allow_unlabeled and text in ("", "?"):
        return UNLABELED
    try:
        v = int(text)
    except ValueError:
        raise CsvFormatError(f"class id {text!r} is not an integer", line) from None
    if v < 0:
        raise CsvFormatError(f"negative class id {v}", line)
    return v


def load_csv(path, num_classes: int | None = None) -> Dataset:
    """Read the format written by :func:`save_csv`.

    The class count defaults to ``max(2, largest class id + 1)``.
    """
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise CsvFormatError("empty file", 1)
    header = [h.strip() for h in rows[0]]
    has_truth = header[-1] == "truth"
    nfeat = len(header) - (2 if has_truth else 1)
    label_col = header[nfeat] if nfeat < len(header) else None
    if nfeat < 1 or label_col != "label":
        raise CsvFormatError("header must be f1,...,fd,label[,truth]", 1)
    X, y, t = [], [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise CsvFormatError(f"expected {len(header)} fields, got {len(row)}", lineno)
        try:
            X.append([float(v) for v in row[:nfeat]])
        except ValueError:
            raise CsvFormatError("non-numeric feature value", lineno) from None
        if not all(math.isfinite(v) for v in X[-1]):
            raise CsvFormatError("non-finite feature value", lineno)
        y.append(_parse_class(row[nfeat], lineno, True))
        if has_truth:
            t.append(_parse_class(row[nfeat + 1], lineno, False))
    if not X:
        raise CsvFormatError("no data rows", 2)
    y = np.asarray(y, dtype=np.int64)
    truth = np.asarray(t, dtype=np.int64) if has_truth else None
    top = max(int(y.max()), int(truth.max()) if truth is not None else -1)
    c = num_classes if num_classes is not None else max(2, top + 1)
    return Dataset(np.asarray(X), y, c, truth)
