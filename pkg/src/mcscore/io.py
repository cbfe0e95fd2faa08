"""Sample files and run manifests.

Samples are written as CSV (header ``dim0,...,dim{d-1}``, 17 significant
digits so every double round-trips) or JSON (``{"samples": [[...], ...]}``,
with ``null`` for rows of failed particles).
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .exceptions import UsageError

__all__ = ["write_samples", "read_samples", "write_json", "read_json"]


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_samples(path, samples, fmt: str = "csv") -> Path:
    path = Path(path)
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    if fmt == "csv":
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow([f"dim{j}" for j in range(samples.shape[1])])
            writer.writerows([_fmt(x) for x in row] for row in samples)
    elif fmt == "json":
        rows = [[None if math.isnan(x) else float(x) for x in row] for row in samples]
        path.write_text(json.dumps({"samples": rows}) + "\n")
    else:
        raise UsageError(f"unknown sample format {fmt!r}")
    return path


def read_samples(path) -> np.ndarray:
    """Read a samples file written by :func:`write_samples` (format from the suffix)."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise UsageError(f"cannot read samples file {path}: {exc}") from exc
    try:
        if path.suffix == ".json":
            rows = json.loads(text)["samples"]
            data = np.array([[np.nan if x is None else x for x in row] for row in rows], dtype=float)
        else:
            reader = csv.reader(text.splitlines())
            header = next(reader, None)
            if not header or not all(h.startswith("dim") for h in header):
                raise ValueError("missing dim0,... header")
            data = np.array([[float(x) for x in row] for row in reader if row], dtype=float)
    except (ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"corrupt samples file {path}: {exc}") from exc
    if data.size == 0:
        raise UsageError(f"samples file {path} holds no samples")
    return data.reshape(len(data), -1)


def write_json(path, doc) -> Path:
    path = Path(path)
    path.write_text(json.dumps(doc, indent=2) + "\n")
    return path


def read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read JSON document {path}: {exc}") from exc
