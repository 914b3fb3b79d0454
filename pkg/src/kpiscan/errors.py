"""Exception types shared across the package."""


class KpiScanError(Exception):
    """Base class for every error this package raises on purpose."""


class EmptySeries(KpiScanError):
    """A KPI series contained no values."""


class NonFinite(KpiScanError):
    """A KPI series contained NaN or infinite values."""


class TooShort(KpiScanError):
    """A series (or resample target) is below the minimum usable length."""


class BadSpec(KpiScanError):
    """A generator spec failed validation."""


class TooFewPerClass(KpiScanError):
    """A stratified split needs at least two examples of every class."""


class ShapeMismatch(KpiScanError):
    """Array shapes are incompatible with the requested operation."""


class NonDifferentiable(KpiScanError):
    """The activation has no usable derivative (the step function)."""


class BadRate(KpiScanError):
    """Dropout rate must lie in [0, 1)."""


class BatchTooSmall(KpiScanError):
    """Batch normalization needs at least two examples in train mode."""


class WindowTooLarge(KpiScanError):
    """Pooling window exceeds the input length."""


class KernelTooLarge(KpiScanError):
    """Convolution kernel exceeds the input length."""


class NoForwardState(KpiScanError):
    """backward() was called without a cached forward pass."""


class BadArchitecture(KpiScanError):
    """The model config produces an impossible layer stack."""


class BadCheckpoint(KpiScanError):
    """Checkpoint file is unreadable or structurally invalid."""


class UnsupportedVersion(KpiScanError):
    """Checkpoint format version is not supported by this build."""


class EmptyDataset(KpiScanError):
    """Evaluation requires a non-empty dataset."""


class MalformedInput(KpiScanError):
    """An input file violates its documented format.

    ``line`` is the 1-based line number of the offending row when known.
    """

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line
