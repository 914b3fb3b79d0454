"""KPI anomaly-classification toolkit.

Generates labeled synthetic KPI corpora, trains a recurrent-convolutional
classifier (or a CNN-only baseline) from scratch, evaluates and compares
models, and bulk-scans live-format KPI exports.
"""

from .checkpoint import load_checkpoint, save_checkpoint
from .labels import LABEL_NAMES, N_CLASSES, ClassLabel
from .metrics import ComparisonTable, ConfusionMatrix, MetricsReport, compare, evaluate
from .model import Model, ModelConfig, TrainConfig, TrainingHistory, build_model, train
from .scan import ScanReport, ScanRow, scan_file, write_report_csv
from .series import (
    Interval,
    KpiSeries,
    LabeledExample,
    normalize_series,
    prepare_example,
    resample_to_length,
)
from .synth import (
    Dataset,
    GeneratorSpec,
    generate_corpus,
    generate_example,
    read_jsonl,
    split,
    write_jsonl,
)

__version__ = "0.1.0"

__all__ = [
    "ClassLabel",
    "ComparisonTable",
    "ConfusionMatrix",
    "Dataset",
    "GeneratorSpec",
    "Interval",
    "KpiSeries",
    "LABEL_NAMES",
    "LabeledExample",
    "MetricsReport",
    "Model",
    "ModelConfig",
    "N_CLASSES",
    "ScanReport",
    "ScanRow",
    "TrainConfig",
    "TrainingHistory",
    "build_model",
    "compare",
    "evaluate",
    "generate_corpus",
    "generate_example",
    "load_checkpoint",
    "normalize_series",
    "prepare_example",
    "read_jsonl",
    "resample_to_length",
    "save_checkpoint",
    "scan_file",
    "split",
    "train",
    "write_jsonl",
    "write_report_csv",
]
