"""CSV readers and writers.

Time series use a long format with header ``trial,channel,t,value`` and
1-based indices. Spectral tables put frequency first and one column per
off-diagonal direction, named ``from<k>_to<j>`` (1-based). Floats are
written with 17 significant digits so that parsing them back is exact.
"""
from __future__ import annotations

import csv
import io as _io
from pathlib import Path

import numpy as np

from .errors import FileFormatError

FLOAT_FMT = "%.17g"
TIMESERIES_HEADER = ["trial", "channel", "t", "value"]


def fmt(x) -> str:
    return FLOAT_FMT % x


def direction_names(k):
    return [f"from{a + 1}_to{b + 1}" for a in range(k) for b in range(k) if a != b]


def offdiag_pairs(k):
    return [(a, b) for a in range(k) for b in range(k) if a != b]


def save_timeseries_csv(trials, path):
    from .signalgen import trial_array

    data = trial_array(trials)
    n_tr, n_ch, n_t = data.shape
    buf = _io.StringIO()
    buf.write(",".join(TIMESERIES_HEADER) + "\n")
    for m in range(n_tr):
        for k in range(n_ch):
            row = data[m, k]
            for t in range(n_t):
                buf.write(f"{m + 1},{k + 1},{t + 1},{FLOAT_FMT % row[t]}\n")
    Path(path).write_text(buf.getvalue())


def load_timeseries_csv(path):
    """Read a long-format time-series CSV into a ``TrialSet``.

    Dimensions are inferred from the largest index on each axis; every
    (trial, channel, t) cell must be present exactly once.
    """
    from .signalgen import TrialSet

    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FileFormatError(f"{path}: empty file") from None
        if [h.strip().lower() for h in header] != TIMESERIES_HEADER:
            raise FileFormatError(f"{path}: header must be {','.join(TIMESERIES_HEADER)}, got {header}")
        idx, vals = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 4:
                raise FileFormatError(f"{path}:{lineno}: expected 4 cells, got {len(row)}")
            try:
                m, k, t = int(row[0]), int(row[1]), int(row[2])
                v = float(row[3])
            except ValueError:
                raise FileFormatError(f"{path}:{lineno}: non-numeric cell in {row}") from None
            if min(m, k, t) < 1:
                raise FileFormatError(f"{path}:{lineno}: indices are 1-based, got {row[:3]}")
            if not np.isfinite(v):
                raise FileFormatError(f"{path}:{lineno}: non-finite value {row[3]}")
            idx.append((m - 1, k - 1, t - 1))
            vals.append(v)
    if not idx:
        raise FileFormatError(f"{path}: no data rows")
    idx = np.array(idx)
    dims = tuple(int(d) for d in idx.max(axis=0) + 1)
    data = np.zeros(dims)
    seen = np.zeros(dims, dtype=np.int64)
    np.add.at(seen, tuple(idx.T), 1)
    data[tuple(idx.T)] = vals
    if np.any(seen > 1):
        m, k, t = np.argwhere(seen > 1)[0] + 1
        raise FileFormatError(f"{path}: duplicate cell (trial={m}, channel={k}, t={t})")
    if np.any(seen == 0):
        m, k, t = np.argwhere(seen == 0)[0] + 1
        raise FileFormatError(f"{path}: missing cell (trial={m}, channel={k}, t={t})")
    return TrialSet(data)


def write_direction_table(path, freqs, arr, as_int=False):
    """Write a (K, K, N_f) source-major array as a frequency x direction table."""
    k = arr.shape[0]
    pairs = offdiag_pairs(k)
    lines = [",".join(["frequency"] + direction_names(k))]
    for f_idx, f in enumerate(freqs):
        cells = [fmt(f)]
        for a, b in pairs:
            v = arr[a, b, f_idx]
            cells.append(str(int(v)) if as_int else fmt(v))
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n")


def read_direction_table(path):
    """Inverse of ``write_direction_table``; returns ``(freqs, arr)``.

    Diagonal entries of ``arr`` are NaN since the table does not carry them.
    """
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    if header[0] != "frequency":
        raise FileFormatError(f"{path}: first column must be 'frequency'")
    n_dir = len(header) - 1
    k = int(round((1 + np.sqrt(1 + 4 * n_dir)) / 2))
    if k * (k - 1) != n_dir or header[1:] != direction_names(k):
        raise FileFormatError(f"{path}: unexpected direction columns {header[1:]}")
    table = np.array([[float(c) for c in r] for r in body])
    arr = np.full((k, k, len(body)), np.nan)
    for col, (a, b) in enumerate(offdiag_pairs(k)):
        arr[a, b] = table[:, col + 1]
    return table[:, 0], arr


def write_coeffs(path, coeffs):
    """Write a (P, K, K) stack as ``p,j,k,value`` rows (1-based, row-major)."""
    order, k, _ = coeffs.shape
    lines = ["p,j,k,value"]
    for p in range(order):
        for j in range(k):
            for i in range(k):
                lines.append(f"{p + 1},{j + 1},{i + 1},{fmt(coeffs[p, j, i])}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_coeffs(path):
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    if rows[0] != ["p", "j", "k", "value"]:
        raise FileFormatError(f"{path}: header must be p,j,k,value")
    body = [(int(p), int(j), int(k), float(v)) for p, j, k, v in rows[1:]]
    order = max(r[0] for r in body)
    kk = max(r[1] for r in body)
    out = np.zeros((order, kk, kk))
    for p, j, k, v in body:
        out[p - 1, j - 1, k - 1] = v
    return out
