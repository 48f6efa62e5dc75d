"""On-disk formats for observation patterns and matrices.

Two input formats are understood:

* coordinate text: a ``n1 n2`` header line, then one ``i j`` or
  ``i j value`` line per observed entry, indices 1-based, ``#`` starts a
  comment;
* dense CSV: comma-separated rows with the literal token ``NA`` for
  unobserved cells.

All indices are 0-based in memory and 1-based on disk.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .patterns import ObservationPattern, ObservedMatrix

NA_TOKEN = "NA"


def _strip_comment(line: str) -> str:
    return line.split("#", 1)[0].strip()


def read_coordinate(path) -> ObservedMatrix | ObservationPattern:
    """Parse a coordinate file; returns a bare pattern when values are absent."""
    lines = [_strip_comment(ln) for ln in Path(path).read_text().splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines:
        raise ValueError(f"{path}: empty coordinate file")
    head = lines[0].split()
    if len(head) != 2:
        raise ValueError(f"{path}: header must be 'n1 n2', got {lines[0]!r}")
    n1, n2 = int(head[0]), int(head[1])
    entries = []
    values = []
    has_values = None
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) not in (2, 3):
            raise ValueError(f"{path}: expected 'i j [value]', got {ln!r}")
        if has_values is None:
            has_values = len(parts) == 3
        elif has_values != (len(parts) == 3):
            raise ValueError(f"{path}: mixed entry lines with and without values")
        i, j = int(parts[0]), int(parts[1])
        if not (1 <= i <= n1 and 1 <= j <= n2):
            raise ValueError(f"{path}: index ({i},{j}) outside 1..{n1} x 1..{n2}")
        entries.append((i - 1, j - 1))
        if has_values:
            values.append(float(parts[2]))
    if not entries:
        raise ValueError(f"{path}: no entries")
    if has_values:
        order = np.lexsort((np.array(entries)[:, 1], np.array(entries)[:, 0]))
        pattern = ObservationPattern(n1, n2, entries)
        if pattern.m != len(entries):
            raise ValueError(f"{path}: duplicate indices")
        return ObservedMatrix(pattern, np.asarray(values)[order])
    return ObservationPattern(n1, n2, entries)


def write_coordinate(path, data: ObservedMatrix | ObservationPattern) -> None:
    if isinstance(data, ObservedMatrix):
        pattern, values = data.pattern, data.values
    else:
        pattern, values = data, None
    lines = [f"{pattern.n1} {pattern.n2}"]
    for k, (i, j) in enumerate(pattern.indices):
        if values is None:
            lines.append(f"{i + 1} {j + 1}")
        else:
            lines.append(f"{i + 1} {j + 1} {float(values[k])!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_dense_csv(path) -> ObservedMatrix:
    rows = []
    for ln in Path(path).read_text().splitlines():
        ln = _strip_comment(ln)
        if not ln:
            continue
        row = []
        for tok in ln.split(","):
            tok = tok.strip()
            row.append(np.nan if tok == NA_TOKEN else float(tok))
        rows.append(row)
    if not rows:
        raise ValueError(f"{path}: empty CSV")
    if len({len(r) for r in rows}) != 1:
        raise ValueError(f"{path}: ragged rows")
    dense = np.array(rows, dtype=float)
    if np.isnan(dense).all():
        raise ValueError(f"{path}: no observed entries")
    return ObservedMatrix.from_dense(dense)


def write_dense_csv(path, dense, mask=None) -> None:
    """Write a dense matrix; cells where mask is False become NA."""
    dense = np.asarray(dense, dtype=float)
    out = []
    for i in range(dense.shape[0]):
        cells = []
        for j in range(dense.shape[1]):
            hidden = (mask is not None and not mask[i, j]) or np.isnan(dense[i, j])
            cells.append(NA_TOKEN if hidden else repr(float(dense[i, j])))
        out.append(",".join(cells))
    Path(path).write_text("\n".join(out) + "\n")


def load_observed(path) -> ObservedMatrix | ObservationPattern:
    """Sniff the format: a two-integer header means coordinate, else CSV."""
    for ln in Path(path).read_text().splitlines():
        ln = _strip_comment(ln)
        if not ln:
            continue
        parts = ln.split()
        if len(parts) == 2 and all(p.lstrip("+-").isdigit() for p in parts):
            return read_coordinate(path)
        return read_dense_csv(path)
    raise ValueError(f"{path}: empty file")


def canonical_json(obj) -> str:
    """Stable serialization: sorted keys, two-space indent, trailing newline.

    Parsing this and re-serializing reproduces the bytes exactly (floats
    round-trip through repr).
    """
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def fmt(x) -> str:
    """Floats at 9 significant digits for text reports; ints verbatim."""
    if isinstance(x, bool) or not isinstance(x, (int, float, np.floating, np.integer)):
        return str(x)
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.9g}"
