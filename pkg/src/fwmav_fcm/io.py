"""File formats: dataset and trace CSVs, TS model documents.

Floats are written with 17 significant digits so that every file reads back
bit-exactly. All writers go through :func:`atomic_write`.
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .control import SimTrace, compute_rmse
from .exceptions import ConfigError
from .ts import INPUT_COLUMNS, OUTPUT_COLUMNS, GaussianMf, IoDataset, TsModel, TsRule

MODEL_FORMAT = "fwmav-fcm/ts-model"
MODEL_VERSION = 1
DATASET_HEADER = ("t",) + INPUT_COLUMNS + OUTPUT_COLUMNS


def atomic_write(path, text):
    """Write ``text`` to a temporary sibling file, then rename it over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _csv_text(header, rows):
    lines = [",".join(header)]
    lines.extend(",".join(f"{v:.17g}" for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def _read_csv(path, header):
    path = Path(path)
    with open(path) as fh:
        first = fh.readline().strip()
    if tuple(first.split(",")) != tuple(header):
        raise ConfigError(f"{path}: expected header {','.join(header)!r}, got {first!r}")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.size == 0:
        data = data.reshape(0, len(header))
    return data


def write_dataset(path, data):
    rows = np.column_stack([data.t, data.inputs, data.outputs])
    return atomic_write(path, _csv_text(DATASET_HEADER, rows))


def read_dataset(path):
    data = _read_csv(path, DATASET_HEADER)
    if data.shape[0] == 0:
        raise ConfigError(f"{path}: dataset has no rows")
    t = data[:, 0]
    dt = t[1] - t[0] if len(t) > 1 else 1.0
    return IoDataset(data[:, 1:5], data[:, 5:11], dt, t)


def model_to_dict(model):
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "input_dim": model.input_dim,
        "output_dim": model.output_dim,
        "input_scaling": model.input_scaling.tolist(),
        "rules": [
            {
                "antecedent": [{"center": mf.center, "width": mf.width} for mf in r.antecedent],
                "consequent": r.consequent.tolist(),
            }
            for r in model.rules
        ],
        "info": model.info,
    }


def model_from_dict(doc):
    if doc.get("format") != MODEL_FORMAT:
        raise ConfigError(f"not a TS model document (format={doc.get('format')!r})")
    if doc.get("version") != MODEL_VERSION:
        raise ConfigError(f"unsupported model version {doc.get('version')!r}")
    rules = tuple(
        TsRule(
            tuple(GaussianMf(mf["center"], mf["width"]) for mf in r["antecedent"]),
            np.array(r["consequent"], dtype=float),
        )
        for r in doc["rules"]
    )
    return TsModel(
        input_dim=doc["input_dim"],
        output_dim=doc["output_dim"],
        rules=rules,
        input_scaling=np.array(doc["input_scaling"], dtype=float),
        info=doc.get("info", {}),
    )


def save_model(path, model):
    return atomic_write(path, json.dumps(model_to_dict(model), indent=2) + "\n")


def load_model(path):
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: malformed model document: {exc}") from exc
    return model_from_dict(doc)


def trace_metadata_path(path):
    return Path(path).with_suffix(".json")


def write_trace(path, trace):
    """Write the trace CSV plus a JSON sidecar with metadata and RMSE."""
    path = atomic_write(path, _csv_text(SimTrace.COLUMNS, trace.as_array()))
    meta = {**trace.metadata, "rmse": trace.rmse}
    atomic_write(trace_metadata_path(path), json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return path


def read_trace(path):
    data = _read_csv(path, SimTrace.COLUMNS)
    meta_path = trace_metadata_path(path)
    meta = json.loads(meta_path.read_text()) if meta_path.exists() else {}
    meta.pop("rmse", None)
    cols = [data[:, i].copy() for i in range(6)]
    return SimTrace(*cols, rmse=compute_rmse(cols[3]), metadata=meta)
