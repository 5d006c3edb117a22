"""CSV and structured-text writers.

Reals are written with ``repr`` (shortest round-trip form, always ``.``
as the decimal separator) so identical runs give identical bytes.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np


def fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (complex, np.complexfloating)):
        return repr(complex(x)).strip("()")
    return str(x)


def write_csv(path, header, rows, footer=()):
    """Write ``rows`` under ``header``; ``footer`` rows are appended verbatim."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(x) for x in row])
        for row in footer:
            w.writerow([fmt(x) for x in row])
    return path


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def write_report(path, title, items, tables=()):
    """Structured text: ``key = value`` lines then ``[name]`` CSV tables."""
    lines = [f"# {title}"]
    lines += [f"{k} = {fmt(v)}" for k, v in items]
    for name, header, rows in tables:
        lines += ["", f"[{name}]", ",".join(header)]
        lines += [",".join(fmt(x) for x in row) for row in rows]
    path = Path(path)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def read_report(path):
    """Parse a report back into ``(items, tables)``."""
    items, tables, current = {}, {}, None
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line or line.startswith("#"):
            continue
        if line.startswith("["):
            current = line[1:-1]
            tables[current] = []
        elif current is None:
            k, v = line.split(" = ", 1)
            items[k] = v
        else:
            tables[current].append(line.split(","))
    return items, tables
