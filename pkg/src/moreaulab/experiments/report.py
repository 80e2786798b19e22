"""Report rows, CSV serialization and log-log rate fits."""

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidParams, SchemaError

HEADER = ("experiment", "trial", "m", "seed", "measured", "bound", "slack", "pass")
SCHEMA_VERSION = 1


@dataclass(frozen=True)
class Row:
    experiment: str
    trial: int
    m: int
    seed: int
    measured: float
    bound: float
    slack: float
    passed: bool

    def cells(self):
        return [
            self.experiment,
            str(int(self.trial)),
            str(int(self.m)),
            str(int(self.seed)),
            _fmt(self.measured),
            _fmt(self.bound),
            _fmt(self.slack),
            "1" if self.passed else "0",
        ]


def _fmt(v):
    v = float(v)
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    if math.isnan(v):
        return "nan"
    return repr(v)


@dataclass
class ExperimentReport:
    """Rows of one experiment plus a free-form summary.

    ``hard`` marks inequality experiments where any failed row is a
    violation; otherwise ``gamma`` is the tolerated failure fraction.
    """

    experiment: str
    config: dict = field(default_factory=dict)
    rows: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    hard: bool = True
    gamma: float = 0.0
    fit: object = None

    def add(self, trial, m, seed, measured, bound, slack=0.0, passed=None):
        if passed is None:
            passed = measured <= bound + slack
        self.rows.append(Row(self.experiment, trial, m, seed, float(measured), float(bound), float(slack), bool(passed)))

    @property
    def failures(self):
        return [r for r in self.rows if not r.passed]

    @property
    def ok(self):
        if not self.rows:
            return bool(self.summary.get("ok", True))
        extra = bool(self.summary.get("ok", True))
        if self.hard:
            return not self.failures and extra
        return len(self.failures) <= self.gamma * len(self.rows) and extra

    def to_csv(self):
        return rows_to_csv(self.rows)

    def summary_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["key", "value"])
        w.writerow(["schema_version", SCHEMA_VERSION])
        w.writerow(["experiment", self.experiment])
        w.writerow(["rows", len(self.rows)])
        w.writerow(["failures", len(self.failures)])
        w.writerow(["ok", int(self.ok)])
        for k in sorted(self.summary):
            v = self.summary[k]
            w.writerow([k, _fmt(v) if isinstance(v, float) else v])
        return buf.getvalue()


def rows_to_csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(HEADER)
    for r in rows:
        w.writerow(r.cells())
    return buf.getvalue()


def read_rows(text):
    """Parse report CSV text, checking the header."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise SchemaError("empty report") from None
    if tuple(header) != HEADER:
        raise SchemaError(f"unexpected header {header}")
    rows = []
    for i, cells in enumerate(reader, start=2):
        if len(cells) != len(HEADER):
            raise SchemaError(f"line {i}: expected {len(HEADER)} cells")
        try:
            rows.append(
                Row(cells[0], int(cells[1]), int(cells[2]), int(cells[3]), float(cells[4]), float(cells[5]), float(cells[6]), cells[7] == "1")
            )
        except ValueError as exc:
            raise SchemaError(f"line {i}: {exc}") from None
    return rows


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    r_squared: float
    points: tuple

    def predict(self, m):
        return math.exp(self.intercept) * m**self.slope


def rate_fit(points):
    """Least squares fit of ``ln value = intercept + slope * ln m``.

    Parameters
    ----------
    points : iterable of (m, value)
        At least two distinct ``m``; all values positive.
    """
    pts = tuple((float(m), float(v)) for m, v in points)
    if len({m for m, _ in pts}) < 2:
        raise InvalidParams("need at least two distinct m values")
    if any(v <= 0 or m <= 0 for m, v in pts):
        raise InvalidParams("rate fits need positive m and values")
    x = np.log([m for m, _ in pts])
    y = np.log([v for _, v in pts])
    X = np.column_stack([np.ones_like(x), x])
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum(resid**2))
    r2 = 1.0 if ss_tot <= 1e-30 * max(1.0, float(np.sum(y * y))) else 1.0 - ss_res / ss_tot
    return RateFit(float(coef[1]), float(coef[0]), r2, pts)


def median(values):
    return float(np.median(np.asarray(values, dtype=float)))
