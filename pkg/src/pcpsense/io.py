"""CSV telemetry: measurement, truth and estimate files.

Files are UTF-8 with a mandatory header row, comma separator and decimal
point. Floats are written with ``repr`` so emit-then-parse is exact.
"""
from __future__ import annotations

import csv
import math
from typing import Iterable, Iterator, NamedTuple

import numpy as np

from .errors import ParseError

TWO_PI = 2 * math.pi

SAMPLE_COLUMNS = ("t", "p_D", "i_eff", "omega_s")
TRUTH_COLUMNS = ("t", "theta_p", "omega_p", "T_p", "x1", "x2", "x3", "x4")
ESTIMATE_COLUMNS = ("t", "theta_p_hat", "omega_p_hat", "T_p_hat", "y_hat", "lock", "sign_ok")
PLL_COLUMNS = ("t", "theta_pD_hat", "omega_p_hat", "lock")
EKF_COLUMNS = ("t", "x1_hat", "x2_hat", "x3_hat", "x4_hat", "y_hat", "Te_hat", "Tp_hat",
               "V", "sign_ok", "p_min_eig")


class SampleRecord(NamedTuple):
    t: float
    p_D: float
    i_eff: float
    omega_s: float


def fmt(value) -> str:
    """Deterministic, round-trip-exact text for one cell."""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if value is None:
        return ""
    return repr(float(value))


class CsvWriter:
    """Row-at-a-time writer with a fixed column set."""

    def __init__(self, stream, columns):
        self.columns = tuple(columns)
        self._w = csv.writer(stream, lineterminator="\n")
        self._w.writerow(self.columns)

    def write(self, *values):
        if len(values) != len(self.columns):
            raise ValueError(f"expected {len(self.columns)} values, got {len(values)}")
        self._w.writerow([fmt(v) for v in values])


def _header(reader, required, alternatives=None):
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise ParseError("missing header row", 1) from None
    alternatives = alternatives or {}
    index = {}
    for col in required:
        if col in header:
            index[col] = (header.index(col), 1.0)
        elif col in alternatives and alternatives[col][0] in header:
            alt, scale = alternatives[col]
            index[col] = (header.index(alt), scale)
        else:
            raise ParseError(f"missing column '{col}'", 1)
    return index, len(header)


def _rows(stream, required, alternatives=None):
    reader = csv.reader(stream)
    index, width = _header(reader, required, alternatives)
    for row in reader:
        line = reader.line_num
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != width:
            raise ParseError(f"expected {width} fields, found {len(row)}", line)
        vals = []
        for col in required:
            i, scale = index[col]
            try:
                v = float(row[i]) * scale
            except ValueError:
                raise ParseError(f"column '{col}': not a number: {row[i]!r}", line) from None
            if not math.isfinite(v):
                raise ParseError(f"column '{col}': non-finite value", line)
            vals.append(v)
        yield line, vals


def iter_samples(stream) -> Iterator[SampleRecord]:
    """Stream measurement records, validating as they are read.

    An ``omega_s_hz`` column is accepted in place of ``omega_s``.
    """
    t_prev = -math.inf
    for line, (t, p, i, w) in _rows(stream, SAMPLE_COLUMNS, {"omega_s": ("omega_s_hz", TWO_PI)}):
        if not t > t_prev:
            raise ParseError(f"t={t!r} not strictly increasing", line)
        if i < 0:
            raise ParseError("i_eff must be nonnegative", line)
        if not w > 0:
            raise ParseError("omega_s must be positive", line)
        t_prev = t
        yield SampleRecord(t, p, i, w)


def parse_samples(stream) -> list[SampleRecord]:
    return list(iter_samples(stream))


def write_samples(stream, records: Iterable[SampleRecord]):
    w = CsvWriter(stream, SAMPLE_COLUMNS)
    for r in records:
        w.write(*r)


def read_truth(stream) -> dict:
    """Truth file as a dict of column arrays."""
    t_prev = -math.inf
    rows = []
    for line, vals in _rows(stream, TRUTH_COLUMNS):
        if not vals[0] > t_prev:
            raise ParseError(f"t={vals[0]!r} not strictly increasing", line)
        t_prev = vals[0]
        rows.append(vals)
    arr = np.array(rows, dtype=float).reshape(-1, len(TRUTH_COLUMNS))
    return {c: arr[:, k] for k, c in enumerate(TRUTH_COLUMNS)}


def write_truth(stream, result):
    """Truth channel of a :class:`~pcpsense.plant.ScenarioResult`."""
    w = CsvWriter(stream, TRUTH_COLUMNS)
    for k in range(len(result.t)):
        x = result.x[k]
        w.write(result.t[k], result.theta_p[k], result.omega_p[k], result.T_p[k],
                x[0], x[1], x[2], x[3])


def scenario_samples(result) -> Iterator[SampleRecord]:
    for k in range(len(result.t)):
        yield SampleRecord(float(result.t[k]), float(result.p_D[k]), float(result.i_eff[k]),
                           float(result.omega_s[k]))


def read_columns(stream, columns) -> dict:
    """Generic numeric reader used for estimate files."""
    rows = [vals for _, vals in _rows(stream, columns)]
    arr = np.array(rows, dtype=float).reshape(-1, len(columns))
    return {c: arr[:, k] for k, c in enumerate(columns)}
