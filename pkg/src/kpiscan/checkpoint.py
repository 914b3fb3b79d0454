"""Checkpoint persistence.

A checkpoint is a single JSON document::

    {
      "format_version": 1,
      "config": { ... ModelConfig fields ... },
      "label_names": ["Normal", ...],
      "training_meta": {"epochs": ..., "train_loss": ..., ...} | null,
      "parameters": {
        "conv1.kernels": {"shape": [16, 1, 5], "data": [ ... floats ... ]},
        ...
      }
    }

Parameter names and shapes are fully determined by the config; floats are
written with Python's shortest round-trip repr, so load(save(model)) restores
every parameter bit for bit.  Unknown ``format_version`` values are rejected.
"""

from __future__ import annotations

import json

import numpy as np

from .errors import BadCheckpoint, UnsupportedVersion
from .labels import LABEL_NAMES
from .model import Model, ModelConfig

FORMAT_VERSION = 1


def save_checkpoint(model: Model, path) -> None:
    """Write ``model`` (config, parameters, running stats, metadata) to ``path``."""
    parameters = {}
    for name, arr in model.persistent_arrays():
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"parameter {name} contains non-finite values")
        parameters[name] = {"shape": list(arr.shape), "data": arr.ravel().tolist()}
    doc = {
        "format_version": FORMAT_VERSION,
        "config": model.config.to_dict(),
        "label_names": list(LABEL_NAMES),
        "training_meta": model.training_meta,
        "parameters": parameters,
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, allow_nan=False)
        fh.write("\n")


def load_checkpoint(path) -> Model:
    """Rebuild a model from ``path``; raises BadCheckpoint / UnsupportedVersion."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise BadCheckpoint(f"not a valid checkpoint document: {exc}") from exc
    if not isinstance(doc, dict):
        raise BadCheckpoint("checkpoint root is not an object")
    version = doc.get("format_version")
    if not isinstance(version, int):
        raise BadCheckpoint("missing or invalid format_version")
    if version != FORMAT_VERSION:
        raise UnsupportedVersion(f"format_version {version} not supported (expected {FORMAT_VERSION})")
    try:
        config = ModelConfig.from_dict(doc["config"])
    except Exception as exc:
        raise BadCheckpoint(f"invalid config: {exc}") from exc
    if doc.get("label_names") != list(LABEL_NAMES):
        raise BadCheckpoint("label_names do not match this build's class set")
    stored = doc.get("parameters")
    if not isinstance(stored, dict):
        raise BadCheckpoint("missing parameters")
    model = Model(config, seed=0)
    expected = dict(model.persistent_arrays())
    if set(stored) != set(expected):
        missing = sorted(set(expected) - set(stored))
        extra = sorted(set(stored) - set(expected))
        raise BadCheckpoint(f"parameter set mismatch (missing {missing}, unexpected {extra})")
    for name, entry in stored.items():
        target = expected[name]
        try:
            shape = tuple(int(v) for v in entry["shape"])
            data = np.asarray(entry["data"], dtype=np.float64)
        except (KeyError, TypeError, ValueError) as exc:
            raise BadCheckpoint(f"parameter {name} is malformed: {exc}") from exc
        if shape != target.shape or data.size != target.size:
            raise BadCheckpoint(
                f"parameter {name} has shape {shape} with {data.size} values, "
                f"expected {target.shape}"
            )
        if not np.all(np.isfinite(data)):
            raise BadCheckpoint(f"parameter {name} contains non-finite values")
        target[...] = data.reshape(shape)
    meta = doc.get("training_meta")
    if meta is not None and not isinstance(meta, dict):
        raise BadCheckpoint("training_meta must be an object or null")
    model.training_meta = meta
    return model
