"""
Summaries of fidelity batches and the CSV files they are written to.
"""

import csv
import math
from collections import Counter
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from qsynth.core import EvalMetrics

#: Columns of the per-episode training metrics file.
TRAIN_COLUMNS = (
    "episode",
    "fidelity",
    "cnots",
    "threshold",
    "c_in",
    "epsilon",
    "loss",
    "success",
)

#: Columns of evaluation and comparison files.
EVAL_COLUMNS = (
    "label",
    "budget",
    "layers",
    "n_states",
    "mean_fidelity",
    "interval_low",
    "interval_high",
    "mean_cnots",
)


def smallest_interval(values, coverage=0.95):
    """
    Shortest interval [low, high] containing ceil(coverage * N) of the N
    values. Among equally short intervals the lowest is returned.
    """
    ordered = np.sort(np.asarray(values, dtype=float))
    if ordered.size == 0:
        raise ValueError("values must not be empty")
    if not 0.0 < coverage <= 1.0:
        raise ValueError(f"coverage must be in (0, 1]; got {coverage}")
    k = max(1, math.ceil(coverage * ordered.size))
    widths = ordered[k - 1 :] - ordered[: ordered.size - k + 1]
    start = int(np.argmin(widths))
    return float(ordered[start]), float(ordered[start + k - 1])


def summarize(fidelities, cnots):
    """
    EvalMetrics for paired per-target fidelities and CNOT counts.
    """
    fidelities = [float(f) for f in fidelities]
    cnots = [int(c) for c in cnots]
    if len(fidelities) != len(cnots):
        raise ValueError("fidelities and CNOT counts must have equal lengths")
    counts = Counter(cnots)
    histogram = {c: counts[c] / len(cnots) for c in sorted(counts)}
    return EvalMetrics(
        float(np.mean(fidelities)),
        smallest_interval(fidelities),
        float(np.mean(cnots)),
        histogram,
        fidelities,
        cnots,
    )


def eval_row(label, metrics, budget=None, layers=None):
    """
    One EVAL_COLUMNS row.
    """
    low, high = metrics.interval
    return (
        label,
        budget,
        layers,
        len(metrics.fidelities),
        metrics.mean_fidelity,
        low,
        high,
        metrics.mean_cnots,
    )


def _cell(value):
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_rows(f, rows, columns=None):
    """
    Write CSV rows to an open text file, preceded by `columns` if given.
    """
    writer = csv.writer(f, lineterminator="\n")
    if columns is not None:
        writer.writerow(columns)
    writer.writerows([_cell(v) for v in row] for row in rows)


def write_csv(path, columns, rows, append=False):
    """
    Write rows under a header line. With `append` the header is only
    written to an empty file.
    """
    with open(path, "a" if append else "w", newline="", encoding="utf-8") as f:
        header = columns if not append or f.tell() == 0 else None
        write_rows(f, rows, header)


def parallel_map(fn, items, threads=1):
    """
    list(map(fn, items)), on a thread pool when threads > 1. Results keep
    the order of `items`.
    """
    if threads <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as executor:
        return list(executor.map(fn, items))
