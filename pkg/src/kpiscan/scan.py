"""Bulk classification of live-format KPI exports.

Input is a long-format CSV with header exactly ``cell_id,t,value``: one row
per sample, ``t`` a 0-based integer that must increase within each cell, and
``value`` a non-negative finite float.  Cells are classified independently:
group by cell_id, resample + normalize to the model input length, predict.

The pipeline is built for scale: pandas' C parser reads the file, grouping
and preprocessing are vectorized per distinct series length, and prediction
runs over fixed-size batches that worker threads can pick up in parallel.
Batch boundaries depend only on the input, never on the thread count, so the
report is byte-identical for any ``--threads`` value.  Cells shorter than
the minimum length are reported as skipped instead of failing the scan.
"""

from __future__ import annotations

import contextlib
import csv
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import pandas as pd

try:
    from threadpoolctl import threadpool_limits

    def _blas_single_threaded():
        return threadpool_limits(limits=1, user_api="blas")
except ImportError:  # pragma: no cover - present in the supported environment
    def _blas_single_threaded():
        return contextlib.nullcontext()

from .errors import MalformedInput
from .labels import LABEL_NAMES, ClassLabel
from .model import Model, Workspace
from .series import MIN_SERIES_LEN, prepare_matrix

HEADER = ("cell_id", "t", "value")
SKIP_TOO_SHORT = "skipped:too_short"
PREDICT_CHUNK = 1024


@dataclass(frozen=True)
class ScanRow:
    """One report row; ``probabilities`` is None for skipped cells."""

    cell_id: str
    label: str
    flagged: bool | None
    probabilities: tuple[float, ...] | None
    status: str


@dataclass(frozen=True)
class ScanReport:
    rows: tuple[ScanRow, ...]
    class_counts: dict[str, int]
    skipped: int
    total: int
    elapsed_seconds: float
    cells_per_second: float

    def summary_lines(self) -> list[str]:
        lines = [f"cells scanned: {self.total} ({self.skipped} skipped)"]
        for name in LABEL_NAMES:
            lines.append(f"  {name}: {self.class_counts.get(name, 0)}")
        lines.append(f"elapsed: {self.elapsed_seconds:.2f} s "
                     f"({self.cells_per_second:.0f} cells/s)")
        return lines


def _locate_malformed(path) -> MalformedInput:
    """Slow re-scan to pin down the first offending line of a broken file."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader, start=1):
            if lineno == 1:
                if tuple(row) != HEADER:
                    return MalformedInput(f"header must be {','.join(HEADER)}", line=1)
                continue
            if len(row) != 3:
                return MalformedInput(f"expected 3 fields, got {len(row)}", line=lineno)
            if not row[0]:
                return MalformedInput("empty cell_id", line=lineno)
            try:
                int(row[1])
            except ValueError:
                return MalformedInput(f"t is not an integer: {row[1]!r}", line=lineno)
            try:
                float(row[2])
            except ValueError:
                return MalformedInput(f"value is not a float: {row[2]!r}", line=lineno)
    return MalformedInput("file is malformed but no offending line was found")


def load_cells(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Parse and validate a KPI export.

    Returns ``(cell_ids, lengths, values)`` where ``cell_ids`` are the unique
    ids sorted lexicographically, and ``values`` concatenates each cell's
    samples in that order (original per-cell sample order preserved).
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        first = fh.readline()
    if tuple(first.rstrip("\r\n").split(",")) != HEADER:
        raise MalformedInput(f"header must be {','.join(HEADER)}", line=1)
    try:
        df = pd.read_csv(path, dtype={"cell_id": "category", "t": np.int64, "value": np.float64})
    except (pd.errors.ParserError, ValueError, TypeError):
        raise _locate_malformed(path) from None
    if list(df.columns) != list(HEADER):
        raise MalformedInput(f"header must be {','.join(HEADER)}", line=1)
    if len(df) == 0:
        return np.array([], dtype=object), np.array([], dtype=np.int64), np.array([])

    codes = df["cell_id"].cat.codes.to_numpy()
    cats = df["cell_id"].cat.categories.to_numpy(dtype=object)
    t = df["t"].to_numpy()
    values = df["value"].to_numpy()

    if (codes < 0).any():
        raise MalformedInput("empty cell_id", line=int(np.flatnonzero(codes < 0)[0]) + 2)
    bad = ~np.isfinite(values)
    if bad.any():
        raise MalformedInput("value is not finite", line=int(np.flatnonzero(bad)[0]) + 2)
    bad = values < 0
    if bad.any():
        raise MalformedInput("value is negative", line=int(np.flatnonzero(bad)[0]) + 2)

    # stable sort groups each cell while keeping its rows in file order
    rank = np.empty(len(cats), dtype=np.int64)
    rank[np.argsort(cats, kind="stable")] = np.arange(len(cats))
    order = np.argsort(rank[codes], kind="stable")
    codes = codes[order]
    t = t[order]
    values = values[order]

    same_cell = codes[1:] == codes[:-1]
    non_increasing = same_cell & (np.diff(t) <= 0)
    if non_increasing.any():
        pos = int(np.flatnonzero(non_increasing)[0]) + 1
        raise MalformedInput("t must increase within a cell", line=int(order[pos]) + 2)

    starts = np.flatnonzero(np.r_[True, ~same_cell])
    lengths = np.diff(np.r_[starts, len(codes)])
    cell_ids = cats[codes[starts]]
    return cell_ids, lengths, values


def _predict_chunked(model: Model, features: np.ndarray, threads: int) -> np.ndarray:
    """Batch prediction over fixed-size chunks; thread count never changes
    the chunking, so results are identical for any ``threads`` value.
    Each worker thread reuses one scratch workspace across its chunks."""
    n = features.shape[0]
    probs = np.empty((n, len(LABEL_NAMES)))
    bounds = [(s, min(s + PREDICT_CHUNK, n)) for s in range(0, n, PREDICT_CHUNK)]
    local = threading.local()

    def run(bound):
        a, b = bound
        ws = getattr(local, "ws", None)
        if ws is None:
            ws = local.ws = Workspace()
        probs[a:b] = model.predict_proba(features[a:b], ws)

    if threads <= 1 or len(bounds) <= 1:
        for bound in bounds:
            run(bound)
    else:
        # worker threads supply the parallelism; nested BLAS threading would
        # only oversubscribe the cores (results are unaffected either way)
        with _blas_single_threaded(), ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(run, bounds))
    return probs


def scan_file(model: Model, path, min_len: int = MIN_SERIES_LEN, threads: int = 1) -> ScanReport:
    """Classify every cell in a KPI export; never aborts on short cells."""
    start_time = time.perf_counter()
    cell_ids, lengths, values = load_cells(path)
    n_cells = len(cell_ids)
    effective_min = max(min_len, MIN_SERIES_LEN)
    keep = lengths >= effective_min
    kept_idx = np.flatnonzero(keep)

    input_len = model.config.input_length
    features = np.empty((kept_idx.size, input_len))
    starts = np.concatenate([[0], np.cumsum(lengths)])[:-1]
    kept_lengths = lengths[kept_idx]
    for ln in np.unique(kept_lengths):
        sel = kept_idx[kept_lengths == ln]
        gather = starts[sel][:, None] + np.arange(ln)[None, :]
        features[np.searchsorted(kept_idx, sel)] = prepare_matrix(values[gather], input_len)

    if kept_idx.size:
        probs = _predict_chunked(model, features, threads)
        preds = probs.argmax(axis=1)
        probs_list = probs.tolist()
    else:
        preds = np.array([], dtype=np.int64)
        probs_list = []

    rows = []
    class_counts = {name: 0 for name in LABEL_NAMES}
    kept_pos = {int(c): i for i, c in enumerate(kept_idx)}
    for c in range(n_cells):
        cell = str(cell_ids[c])
        i = kept_pos.get(c)
        if i is None:
            rows.append(ScanRow(cell, "", None, None, SKIP_TOO_SHORT))
            continue
        name = ClassLabel(int(preds[i])).name
        class_counts[name] += 1
        rows.append(ScanRow(cell, name, name != ClassLabel.Normal.name,
                            tuple(probs_list[i]), "ok"))
    elapsed = time.perf_counter() - start_time
    return ScanReport(
        rows=tuple(rows),
        class_counts=class_counts,
        skipped=int(n_cells - kept_idx.size),
        total=n_cells,
        elapsed_seconds=elapsed,
        cells_per_second=n_cells / elapsed if elapsed > 0 else float("inf"),
    )


def write_report_csv(report: ScanReport, path) -> None:
    """Write report rows sorted by cell_id (the scan already sorts them).

    The summary (which contains wall-clock fields) deliberately stays out of
    this file so repeated runs produce byte-identical reports.
    """
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["cell_id", "label", "flagged"]
                        + [f"p{i}" for i in range(len(LABEL_NAMES))] + ["status"])
        for row in report.rows:
            if row.probabilities is None:
                writer.writerow([row.cell_id, "", ""] + [""] * len(LABEL_NAMES) + [row.status])
            else:
                writer.writerow(
                    [row.cell_id, row.label, "true" if row.flagged else "false"]
                    + [repr(p) for p in row.probabilities]
                    + [row.status]
                )
