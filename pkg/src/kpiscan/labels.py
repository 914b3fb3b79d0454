"""The eight traffic-behavior classes a cell's KPI series can be assigned to."""

import enum


class ClassLabel(enum.IntEnum):
    """Traffic-behavior class of one cell.

    The integer value is the class index used everywhere (dataset files,
    one-hot targets, confusion-matrix axes); the member name is the
    canonical display string used in checkpoints and scan reports.
    """

    Normal = 0
    SuddenlyIncreasing = 1
    GraduallyIncreasing = 2
    SuddenlyDecreasing = 3
    GraduallyDecreasing = 4
    FaultySite = 5
    NewSite = 6
    DownSite = 7


N_CLASSES = len(ClassLabel)

#: Class names in index order.
LABEL_NAMES = tuple(label.name for label in ClassLabel)
