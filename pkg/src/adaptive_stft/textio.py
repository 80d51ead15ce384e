"""Plain-text matrix files: comma-separated, '.' decimals, optional '# key=value' header."""

from __future__ import annotations

from pathlib import Path

import numpy as np


class MatrixFormatError(ValueError):
    pass


def fmt(value: float) -> str:
    """Locale-independent text that round-trips a float64 exactly."""
    return repr(float(value))


def write_matrix(path, matrix, header: dict | None = None) -> None:
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    lines = []
    if header:
        lines.append("# " + " ".join(f"{k}={v}" for k, v in header.items()))
    lines.extend(",".join(fmt(v) for v in row) for row in matrix)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_matrix(path) -> tuple[np.ndarray, dict]:
    """Return ``(matrix, header)``; every data line must have the same column count."""
    header: dict = {}
    rows = []
    text = Path(path).read_text(encoding="utf-8")
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            for tok in line.lstrip("#").split():
                key, sep, val = tok.partition("=")
                if sep:
                    header[key] = val
            continue
        try:
            row = [float(v) for v in line.split(",")]
        except ValueError:
            raise MatrixFormatError(f"{path}:{lineno}: malformed line {line!r}") from None
        if rows and len(row) != len(rows[0]):
            raise MatrixFormatError(
                f"{path}:{lineno}: expected {len(rows[0])} columns, got {len(row)}")
        rows.append(row)
    if not rows:
        raise MatrixFormatError(f"{path}:1: no data rows")
    return np.array(rows), header
