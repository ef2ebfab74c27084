"""Readers and writers for the on-disk formats.

Edge list
    One edge per line, ``i j w`` with 0-based node indices; ``#`` starts a
    comment. Repeated or reversed edges are merged by taking the larger weight.
Features
    CSV, one sample per row; optionally the last column holds an integer label.
Matches
    One matched pair per line, ``m n`` (source index, target index).
Labels
    One integer per line, node order; ``-1`` marks an unknown label.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from .errors import InvalidParameterError
from .graph import FeatureSet, Graph


def _data_lines(path):
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if line:
                yield lineno, line


def read_edge_list(path, n: int | None = None) -> Graph:
    edges = []
    for lineno, line in _data_lines(path):
        parts = line.split()
        if len(parts) not in (2, 3):
            raise InvalidParameterError(f"{path}:{lineno}: expected 'i j w', got {line!r}")
        try:
            i, j = int(parts[0]), int(parts[1])
            w = float(parts[2]) if len(parts) == 3 else 1.0
        except ValueError as exc:
            raise InvalidParameterError(f"{path}:{lineno}: {exc}") from exc
        if i < 0 or j < 0:
            raise InvalidParameterError(f"{path}:{lineno}: negative node index")
        if w < 0 or not math.isfinite(w):
            raise InvalidParameterError(f"{path}:{lineno}: weight must be finite and non-negative")
        edges.append((i, j, w))
    size = max((max(i, j) for i, j, _ in edges), default=-1) + 1
    if n is None:
        n = size
    elif size > n:
        raise InvalidParameterError(f"{path}: node index {size - 1} exceeds declared size {n}")
    w = np.zeros((n, n))
    for i, j, wt in edges:
        if i == j:
            continue
        w[i, j] = max(w[i, j], wt)
        w[j, i] = max(w[j, i], wt)
    return Graph(w)


def write_edge_list(path, g: Graph):
    iu, ju = np.nonzero(np.triu(g.weights, 1))
    with open(path, "w") as fh:
        fh.write(f"# {g.n} nodes\n")
        for i, j in zip(iu, ju):
            fh.write(f"{i} {j} {fmt(g.weights[i, j])}\n")


def read_features(path, label_column: bool = False, metric: str = "euclidean"):
    """Load a feature CSV; returns ``(FeatureSet, labels or None)``."""
    rows = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), 1):
            if not row or row[0].lstrip().startswith("#"):
                continue
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                raise InvalidParameterError(f"{path}:{lineno}: {exc}") from exc
    if not rows:
        raise InvalidParameterError(f"{path}: no samples")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise InvalidParameterError(f"{path}: rows have differing column counts {sorted(widths)}")
    data = np.array(rows)
    labels = None
    if label_column:
        raw = data[:, -1]
        if not np.all(raw == np.round(raw)):
            raise InvalidParameterError(f"{path}: label column is not integer-valued")
        labels = raw.astype(int)
        data = data[:, :-1]
    return FeatureSet(data, metric), labels


def read_matches(path):
    pairs = []
    for lineno, line in _data_lines(path):
        parts = line.split()
        if len(parts) != 2:
            raise InvalidParameterError(f"{path}:{lineno}: expected 'm n', got {line!r}")
        try:
            pairs.append((int(parts[0]), int(parts[1])))
        except ValueError as exc:
            raise InvalidParameterError(f"{path}:{lineno}: {exc}") from exc
    return pairs


def read_labels(path):
    out = []
    for lineno, line in _data_lines(path):
        try:
            out.append(int(line))
        except ValueError as exc:
            raise InvalidParameterError(f"{path}:{lineno}: {exc}") from exc
    return np.array(out, dtype=int)


def fmt(x) -> str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    return repr(x)


SWEEP_HEADER = ("ratio", "mean_error", "std_error", "n_repetitions", "infeasible")


def write_sweep_csv(path, rows):
    with open(path, "w", newline="") as fh:
        fh.write(",".join(SWEEP_HEADER) + "\n")
        for r in rows:
            fh.write(f"{fmt(r.ratio)},{fmt(r.mean_error)},{fmt(r.std_error)},{r.n_repetitions},{r.infeasible}\n")


def write_predictions_csv(path, predicted, scores):
    scores = np.atleast_2d(np.asarray(scores))
    with open(path, "w", newline="") as fh:
        fh.write("node,predicted_class," + ",".join(f"score_{c}" for c in range(scores.shape[1])) + "\n")
        for i, (p, row) in enumerate(zip(predicted, scores)):
            fh.write(f"{i},{int(p)}," + ",".join(fmt(v) for v in row) + "\n")


def write_manifest(path, items):
    with open(path, "w") as fh:
        for key, value in items:
            fh.write(f"{key}={value}\n")


def read_key_values(path):
    """Parse ``key=value`` lines; returns a list of ``(lineno, key, value)``."""
    out = []
    for lineno, line in _data_lines(path):
        if "=" not in line:
            raise InvalidParameterError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise InvalidParameterError(f"{path}:{lineno}: empty key")
        out.append((lineno, key, value.strip()))
    return out


def manifest_path(out) -> Path:
    out = Path(out)
    return out.with_name(out.name + ".manifest")
