"""KPI series domain types and classifier-input preprocessing.

A raw series is whatever a performance-management export produces: any
length, any scale, any sampling interval.  The classifier consumes a fixed
number of samples in [0, 1], so preprocessing is two steps: piecewise-linear
resampling to the model's input length, then per-series min-max scaling.

The matrix variants (``resample_matrix`` / ``normalize_matrix``) apply the
exact same arithmetic row-wise; the bulk scanner relies on them producing
bit-identical results to the single-series functions.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import EmptySeries, NonFinite, TooShort
from .labels import ClassLabel

#: Shortest series that still carries trend information.
MIN_SERIES_LEN = 4

#: Value assigned to every sample of a dead-flat series after normalization.
FLAT_FILL = 0.5


class Interval(enum.Enum):
    """Sampling interval of a series.  Metadata only; no computational effect."""

    HOURLY = "hourly"
    DAILY = "daily"
    WEEKLY = "weekly"
    MONTHLY = "monthly"


@dataclass(frozen=True)
class KpiSeries:
    """One cell's KPI values over time.

    ``values`` must be non-empty, finite and non-negative; the KPI unit is
    irrelevant (Erlang, GB, rates, ...) because preprocessing is scale-free.
    """

    cell_id: str
    values: np.ndarray
    interval: Interval = Interval.HOURLY

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 1 or arr.size == 0:
            raise EmptySeries(f"series {self.cell_id!r} has no values")
        if not np.all(np.isfinite(arr)):
            raise NonFinite(f"series {self.cell_id!r} contains non-finite values")
        if np.any(arr < 0):
            raise ValueError(f"series {self.cell_id!r} contains negative values")
        object.__setattr__(self, "values", arr)

    def __len__(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class LabeledExample:
    """A fixed-length, normalized feature vector paired with its class."""

    features: np.ndarray
    label: ClassLabel
    source_id: str

    def __post_init__(self):
        arr = np.asarray(self.features, dtype=np.float64)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError(f"example {self.source_id!r} has no features")
        if not np.all(np.isfinite(arr)):
            raise NonFinite(f"example {self.source_id!r} has non-finite features")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError(f"example {self.source_id!r} has features outside [0, 1]")
        object.__setattr__(self, "features", arr)
        object.__setattr__(self, "label", ClassLabel(self.label))


def normalize_matrix(values: np.ndarray) -> np.ndarray:
    """Min-max scale each row of ``values`` to [0, 1].

    Rows where max == min (dead-flat series) are filled with ``FLAT_FILL``
    so that degenerate inputs stay classifiable.
    """
    arr = np.asarray(values, dtype=np.float64)
    lo = arr.min(axis=1, keepdims=True)
    hi = arr.max(axis=1, keepdims=True)
    span = hi - lo
    flat = span[:, 0] == 0.0
    span[flat] = 1.0  # avoid 0/0; flat rows are overwritten below
    out = (arr - lo) / span
    out[flat] = FLAT_FILL
    return out


def normalize_series(values) -> np.ndarray:
    """Min-max scale one series to [0, 1] (flat series map to all 0.5)."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise EmptySeries("cannot normalize an empty series")
    if not np.all(np.isfinite(arr)):
        raise NonFinite("cannot normalize a series with non-finite values")
    return normalize_matrix(arr[None, :])[0]


def lerp_positions(n: int, length: int) -> tuple[np.ndarray, np.ndarray]:
    """Interpolation plan mapping an n-sample series onto ``length`` points.

    Returns (lo, w) such that ``out[i] = v[lo[i]] * (1 - w[i]) + v[lo[i] + 1] * w[i]``
    evaluates the piecewise-linear interpolant at ``length`` equally spaced
    positions over [0, n - 1].  Endpoints land exactly on v[0] and v[n - 1].
    """
    pos = np.linspace(0.0, float(n - 1), length)
    lo = np.minimum(pos.astype(np.int64), n - 2)
    w = pos - lo
    return lo, w


def resample_matrix(values: np.ndarray, length: int) -> np.ndarray:
    """Resample each row of ``values`` onto ``length`` equally spaced points."""
    arr = np.asarray(values, dtype=np.float64)
    n = arr.shape[1]
    if n < MIN_SERIES_LEN:
        raise TooShort(f"need at least {MIN_SERIES_LEN} samples, got {n}")
    if length < MIN_SERIES_LEN:
        raise TooShort(f"target length must be at least {MIN_SERIES_LEN}, got {length}")
    lo, w = lerp_positions(n, length)
    return arr[:, lo] * (1.0 - w) + arr[:, lo + 1] * w


def resample_to_length(values, length: int) -> np.ndarray:
    """Piecewise-linear resample of one series onto ``length`` points.

    Endpoints are preserved exactly; when the input already has ``length``
    samples the output equals the input.
    """
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise TooShort("expected a 1-D series")
    return resample_matrix(arr[None, :], length)[0]


def prepare_example(series: KpiSeries, length: int) -> np.ndarray:
    """Resample then normalize one series into a length-``length`` vector in [0, 1]."""
    return normalize_series(resample_to_length(series.values, length))


def prepare_matrix(values: np.ndarray, length: int) -> np.ndarray:
    """Row-wise ``prepare_example`` for a batch of equal-length raw series."""
    return normalize_matrix(resample_matrix(values, length))
