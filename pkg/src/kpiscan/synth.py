"""Parametric generators for labeled KPI examples, one per traffic class.

Every class is built on the same seasonal base pattern

    base(t) = baseline * (1 + season_amp * sin(2*pi*t/season_period + phase))

and then deformed according to its structural contract:

* Normal              -- the base pattern itself
* SuddenlyIncreasing  -- base multiplied by a factor in [1.7, 2.7] from the
                         changepoint onward (single step)
* SuddenlyDecreasing  -- same with a factor in [0.38, 0.62]
* GraduallyIncreasing -- multiplier ramps linearly from 1 at the changepoint
                         to the step factor at the final sample (no jump)
* GraduallyDecreasing -- same with the decreasing factor range
* FaultySite          -- base with 3-5 dropout windows of 2-6 samples pinned
                         below 10% of baseline
* NewSite             -- exact zeros before the changepoint, base after
* DownSite            -- base before the changepoint, exact zeros after

Gaussian noise (sigma expressed as a fraction of baseline) is added on top
and the result clipped at zero; the zero stretches of NewSite/DownSite are
applied after the noise so they stay exactly zero.

Seeding: ``generate_example`` draws everything from
``numpy.random.default_rng([spec.seed, class_index])``.  ``generate_corpus``
derives one seed per example as
``SeedSequence([template_seed, class_index, instance_index])`` so corpora
are reproducible example-by-example and independent of generation order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from .errors import BadSpec, MalformedInput, TooFewPerClass
from .labels import N_CLASSES, ClassLabel
from .series import Interval, KpiSeries, LabeledExample, prepare_example

STEP_UP_RANGE = (1.7, 2.7)
STEP_DOWN_RANGE = (0.38, 0.62)
DROPOUT_WINDOW_COUNT = (3, 5)
DROPOUT_WINDOW_WIDTH = (2, 6)
DROPOUT_DEPTH_MAX = 0.08  # fraction of baseline; contract requires < 0.10


@dataclass(frozen=True)
class GeneratorSpec:
    """Knobs for one synthetic series.

    ``length`` should be at least two seasonal periods for the class shapes
    to be visually meaningful; 8 samples is the hard minimum.
    """

    length: int = 168
    seed: int = 0
    baseline: float = 100.0
    noise_sigma: float = 0.05
    season_amp: float = 0.3
    season_period: int = 24
    changepoint_frac_range: tuple[float, float] = (0.25, 0.75)

    def __post_init__(self):
        lo, hi = self.changepoint_frac_range
        if self.length < 8:
            raise BadSpec(f"length must be >= 8, got {self.length}")
        if not (isinstance(self.seed, int) and 0 <= self.seed < 2**64):
            raise BadSpec("seed must be a 64-bit unsigned integer")
        if not (np.isfinite(self.baseline) and self.baseline > 0):
            raise BadSpec("baseline must be a positive float")
        if not (np.isfinite(self.noise_sigma) and self.noise_sigma >= 0):
            raise BadSpec("noise_sigma must be >= 0")
        if not (np.isfinite(self.season_amp) and self.season_amp >= 0):
            raise BadSpec("season_amp must be >= 0")
        if self.season_period < 1:
            raise BadSpec("season_period must be a positive integer")
        if not 0.0 < lo < hi < 1.0:
            raise BadSpec(f"changepoint_frac_range must satisfy 0 < lo < hi < 1, got {lo}, {hi}")


@dataclass(frozen=True)
class Dataset:
    """A bag of labeled examples plus per-class counts."""

    examples: tuple[LabeledExample, ...]
    class_counts: tuple[int, ...]

    def __post_init__(self):
        counts = [0] * N_CLASSES
        for ex in self.examples:
            counts[int(ex.label)] += 1
        if tuple(counts) != tuple(self.class_counts):
            raise ValueError("class_counts does not match the actual labels")
        object.__setattr__(self, "examples", tuple(self.examples))
        object.__setattr__(self, "class_counts", tuple(self.class_counts))

    @classmethod
    def from_examples(cls, examples) -> "Dataset":
        counts = [0] * N_CLASSES
        examples = tuple(examples)
        for ex in examples:
            counts[int(ex.label)] += 1
        return cls(examples, tuple(counts))

    def __len__(self) -> int:
        return len(self.examples)

    def features_matrix(self) -> np.ndarray:
        return np.stack([ex.features for ex in self.examples])

    def labels_array(self) -> np.ndarray:
        return np.array([int(ex.label) for ex in self.examples], dtype=np.int64)


def _seasonal_base(spec: GeneratorSpec, rng: np.random.Generator) -> np.ndarray:
    t = np.arange(spec.length, dtype=np.float64)
    phase = rng.uniform(0.0, 2.0 * np.pi)
    return spec.baseline * (1.0 + spec.season_amp * np.sin(2.0 * np.pi * t / spec.season_period + phase))


def _draw_changepoint(spec: GeneratorSpec, rng: np.random.Generator) -> int:
    lo, hi = spec.changepoint_frac_range
    frac = rng.uniform(lo, hi)
    # clamp so both regimes keep at least one sample and ramps have room
    return int(np.clip(round(frac * spec.length), 1, spec.length - 2))


def _dropout_windows(spec: GeneratorSpec, rng: np.random.Generator) -> list[tuple[int, int]]:
    k = int(rng.integers(DROPOUT_WINDOW_COUNT[0], DROPOUT_WINDOW_COUNT[1] + 1))
    widths = rng.integers(DROPOUT_WINDOW_WIDTH[0], DROPOUT_WINDOW_WIDTH[1] + 1, size=k)
    placed: list[tuple[int, int]] = []
    # widest first packs short series more reliably; windows keep a 1-sample
    # gap so the dropout count stays unambiguous
    for w in sorted((int(w) for w in widths), reverse=True):
        for _ in range(10_000):
            s = int(rng.integers(0, spec.length - w + 1))
            if all(s + w + 1 <= ps or ps + pw + 1 <= s for ps, pw in placed):
                placed.append((s, w))
                break
        else:
            raise BadSpec(f"cannot place {k} dropout windows in a length-{spec.length} series")
    return placed


def generate_example(label: ClassLabel, spec: GeneratorSpec) -> KpiSeries:
    """Generate one raw (pre-normalization) series for ``label``.

    Pure function of (label, spec): the same pair always yields the same
    series, bit for bit.
    """
    label = ClassLabel(label)
    rng = np.random.default_rng([spec.seed, int(label)])
    base = _seasonal_base(spec, rng)
    n = spec.length
    changepoint: int | None = None

    if label is ClassLabel.Normal:
        pattern = base
    elif label in (ClassLabel.SuddenlyIncreasing, ClassLabel.SuddenlyDecreasing):
        changepoint = _draw_changepoint(spec, rng)
        factor_range = STEP_UP_RANGE if label is ClassLabel.SuddenlyIncreasing else STEP_DOWN_RANGE
        factor = rng.uniform(*factor_range)
        mult = np.ones(n)
        mult[changepoint:] = factor
        pattern = base * mult
    elif label in (ClassLabel.GraduallyIncreasing, ClassLabel.GraduallyDecreasing):
        changepoint = _draw_changepoint(spec, rng)
        factor_range = STEP_UP_RANGE if label is ClassLabel.GraduallyIncreasing else STEP_DOWN_RANGE
        factor = rng.uniform(*factor_range)
        t = np.arange(n, dtype=np.float64)
        mult = np.ones(n)
        tail = t >= changepoint
        mult[tail] = 1.0 + (factor - 1.0) * (t[tail] - changepoint) / (n - 1 - changepoint)
        pattern = base * mult
    elif label is ClassLabel.FaultySite:
        pattern = base.copy()
        for start, width in _dropout_windows(spec, rng):
            depth = rng.uniform(0.0, DROPOUT_DEPTH_MAX)
            pattern[start : start + width] = depth * spec.baseline
    elif label in (ClassLabel.NewSite, ClassLabel.DownSite):
        changepoint = _draw_changepoint(spec, rng)
        pattern = base
    else:  # pragma: no cover - exhaustive over ClassLabel
        raise AssertionError(label)

    if spec.noise_sigma > 0:
        pattern = pattern + rng.normal(0.0, spec.noise_sigma * spec.baseline, size=n)
    values = np.maximum(pattern, 0.0)

    if label is ClassLabel.NewSite:
        values[:changepoint] = 0.0
    elif label is ClassLabel.DownSite:
        values[changepoint:] = 0.0

    return KpiSeries(cell_id=f"synth-{int(label)}-{spec.seed}", values=values, interval=Interval.HOURLY)


def derive_seed(base_seed: int, class_index: int, instance: int) -> int:
    """Per-example seed mixing used by ``generate_corpus`` (documented contract)."""
    return int(np.random.SeedSequence([base_seed, class_index, instance]).generate_state(1)[0])


def generate_corpus(per_class: int, spec_template: GeneratorSpec, feature_len: int) -> Dataset:
    """Generate ``per_class`` examples of each of the 8 classes.

    Examples are emitted class-major (all of class 0, then class 1, ...),
    already resampled to ``feature_len`` and normalized to [0, 1].
    """
    if per_class < 1:
        raise BadSpec(f"per_class must be >= 1, got {per_class}")
    examples = []
    for label in ClassLabel:
        for i in range(per_class):
            spec_i = replace(spec_template, seed=derive_seed(spec_template.seed, int(label), i))
            series = generate_example(label, spec_i)
            feats = prepare_example(series, feature_len)
            examples.append(LabeledExample(feats, label, f"{label.name}-{i:04d}"))
    return Dataset.from_examples(examples)


def split(dataset: Dataset, test_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Stratified train/test split.

    Each class contributes ``round(test_fraction * count)`` examples to the
    test side (Python banker's rounding); shuffling within a class is
    seed-deterministic and the two sides are disjoint and exhaustive.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ValueError(f"test_fraction must be in (0, 1), got {test_fraction}")
    labels = dataset.labels_array()
    rng = np.random.default_rng(seed)
    test_idx: list[int] = []
    train_idx: list[int] = []
    for c in range(N_CLASSES):
        idx = np.flatnonzero(labels == c)
        if idx.size < 2:
            raise TooFewPerClass(f"class {ClassLabel(c).name} has only {idx.size} example(s)")
        n_test = round(test_fraction * idx.size)
        perm = rng.permutation(idx)
        test_idx.extend(perm[:n_test].tolist())
        train_idx.extend(perm[n_test:].tolist())
    train = Dataset.from_examples(dataset.examples[i] for i in sorted(train_idx))
    test = Dataset.from_examples(dataset.examples[i] for i in sorted(test_idx))
    return train, test


def write_jsonl(dataset: Dataset, path) -> None:
    """Write a dataset as JSON-lines records with fixed field order."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for ex in dataset.examples:
            record = {
                "source_id": ex.source_id,
                "label": int(ex.label),
                "features": ex.features.tolist(),
            }
            fh.write(json.dumps(record, separators=(",", ":"), allow_nan=False))
            fh.write("\n")


def read_jsonl(path) -> Dataset:
    """Read a JSON-lines dataset file; raises MalformedInput on bad records."""
    examples = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedInput(f"invalid JSON: {exc}", line=lineno) from exc
            if not isinstance(record, dict):
                raise MalformedInput("record is not a JSON object", line=lineno)
            try:
                label = ClassLabel(int(record["label"]))
                example = LabeledExample(
                    features=np.asarray(record["features"], dtype=np.float64),
                    label=label,
                    source_id=str(record["source_id"]),
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise MalformedInput(f"invalid record: {exc}", line=lineno) from exc
            examples.append(example)
    return Dataset.from_examples(examples)
