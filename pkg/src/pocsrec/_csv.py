"""CSV helpers shared by all writers."""

import csv

import numpy as np


def fmt(x) -> str:
    """Real number with 12 significant digits; blank for ``None`` or NaN."""
    if x is None:
        return ""
    x = float(x)
    if np.isnan(x):
        return ""
    return f"{x:.12g}"


def write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([v if isinstance(v, (str, int, np.integer)) else fmt(v) for v in r])


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
