"""Deterministic CSV and key-value text output."""
from __future__ import annotations

import csv
import hashlib
import math
from pathlib import Path

import numpy as np


def fmt(value) -> str:
    """Format a value for reports: floats with 17 significant digits."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if value is None:
        return "none"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return "%.17g" % v
    if isinstance(value, (list, tuple, np.ndarray)):
        return " ".join(fmt(v) for v in np.asarray(value, dtype=object).ravel())
    return str(value)


def write_csv(path: Path, header, rows) -> Path:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def write_record(path: Path, record: dict) -> Path:
    """``key = value`` lines in insertion order."""
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        for k, v in record.items():
            fh.write(f"{k} = {fmt(v)}\n")
    return path


def read_record(path: Path) -> dict:
    out = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if " = " in line:
            k, v = line.split(" = ", 1)
            out[k] = v
    return out


def sha256(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(out_dir: Path, files, status: str, exit_code: int) -> Path:
    """Manifest listing every artifact with its checksum and the run status."""
    out_dir = Path(out_dir)
    path = out_dir / "manifest.txt"
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"status = {status}\n")
        fh.write(f"exit_code = {exit_code}\n")
        fh.write(f"partial = {fmt(status != 'ok')}\n")
        for f in files:
            fh.write(f"{sha256(f)}  {Path(f).name}\n")
    return path
