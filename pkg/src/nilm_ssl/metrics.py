"""MAE, SAE and energy-per-day metrics plus the result-table writer."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .data.series import PowerSeries
from .errors import EvaluationError

SECONDS_PER_DAY = 86400
MISSING = "—"
METRICS = ("mae", "sae", "epd")
METRIC_HEADERS = {"mae": "MAE (W)", "sae": "SAE", "epd": "EpD (kWh/day)"}


class UndefinedMetricError(EvaluationError):
    """The metric has no value for these signals (e.g. SAE with zero energy)."""


def _paired(pred: PowerSeries, truth: PowerSeries):
    """Values and timestamps of samples valid in both series, on their common span."""
    if pred.period != truth.period:
        raise EvaluationError("prediction and truth have different sampling periods")
    start = max(pred.start, truth.start)
    end = min(pred.end, truth.end)
    if end <= start:
        raise EvaluationError("prediction and truth do not overlap")
    p = pred.crop(start, end)
    t = truth.crop(start, end)
    ok = p.valid & t.valid
    if not ok.any():
        raise EvaluationError("no sample is valid in both prediction and truth")
    return p.values[ok], t.values[ok], p.timestamps[ok], pred.period


def _kwh(watts: np.ndarray, period: int) -> float:
    return float(watts.sum()) * period / 3600.0 / 1000.0


def mae(pred: PowerSeries, truth: PowerSeries) -> float:
    p, t, _, _ = _paired(pred, truth)
    return float(np.abs(p - t).sum() / len(p))


def energy_totals(pred: PowerSeries, truth: PowerSeries) -> tuple[float, float]:
    """(predicted, true) energy in kWh over pairwise-valid samples."""
    p, t, _, period = _paired(pred, truth)
    return _kwh(p, period), _kwh(t, period)


def sae(pred: PowerSeries, truth: PowerSeries) -> float:
    r_hat, r = energy_totals(pred, truth)
    if r == 0:
        raise UndefinedMetricError("SAE is undefined when the true energy is zero")
    return abs(r_hat - r) / r


def daily_energy(pred: PowerSeries, truth: PowerSeries):
    """Per-UTC-day (day index, predicted kWh, true kWh) over days holding valid samples."""
    p, t, ts, period = _paired(pred, truth)
    day = ts // SECONDS_PER_DAY
    days, idx = np.unique(day, return_inverse=True)
    scale = period / 3600.0 / 1000.0
    e_hat = np.bincount(idx, weights=p) * scale
    e = np.bincount(idx, weights=t) * scale
    return days, e_hat, e


def epd(pred: PowerSeries, truth: PowerSeries) -> float:
    days, e_hat, e = daily_energy(pred, truth)
    if len(days) == 0:
        raise EvaluationError("no days to evaluate")
    return float(np.abs(e_hat - e).sum() / len(days))


@dataclass
class MetricsReport:
    """Metrics for one (appliance, method) cell; ``sae`` is None when undefined."""

    mae: float
    sae: Optional[float]
    epd: float
    true_kwh: float
    pred_kwh: float
    days: int

    def to_dict(self):
        return dict(self.__dict__)


def evaluate(pred: PowerSeries, truth: PowerSeries) -> MetricsReport:
    r_hat, r = energy_totals(pred, truth)
    try:
        s = sae(pred, truth)
    except UndefinedMetricError:
        s = None
    days, _, _ = daily_energy(pred, truth)
    return MetricsReport(mae(pred, truth), s, epd(pred, truth), r, r_hat, len(days))


# --------------------------------------------------------------------------
# result tables
# --------------------------------------------------------------------------


@dataclass
class Cell:
    appliance: str
    method: str                      # e.g. "S2p-FSSL"
    report: Optional[MetricsReport] = None
    error: Optional[str] = None


def _fmt(v) -> str:
    return MISSING if v is None else repr(float(v))


def best_in_row(values: dict) -> list:
    """Methods achieving the lowest present value; lower is better for every metric."""
    present = {m: v for m, v in values.items() if v is not None and math.isfinite(v)}
    if not present:
        return []
    lo = min(present.values())
    return [m for m, v in present.items() if v == lo]


@dataclass
class ResultTable:
    appliances: list
    methods: list
    values: dict                     # (appliance, method, metric) -> float | None
    energy: list                     # rows of (appliance, method, true_kwh, pred_kwh)
    errors: dict

    def row(self, appliance: str, metric: str) -> dict:
        return {m: self.values.get((appliance, m, metric)) for m in self.methods}

    def mean_row(self, metric: str) -> dict:
        out = {}
        for m in self.methods:
            vals = [self.values.get((a, m, metric)) for a in self.appliances]
            vals = [v for v in vals if v is not None]
            out[m] = sum(vals) / len(vals) if vals else None
        return out

    def rows(self):
        """(label, {metric: {method: value}}) for each appliance then the mean."""
        for a in self.appliances:
            yield a, {k: self.row(a, k) for k in METRICS}
        yield "mean", {k: self.mean_row(k) for k in METRICS}

    def header(self) -> list:
        cols = ["appliance"]
        for m in self.methods:
            cols += [f"{m} {METRIC_HEADERS[k]}" for k in METRICS]
        cols += [f"best {METRIC_HEADERS[k]}" for k in METRICS]
        return cols

    def write_csv(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.header())
            for label, per_metric in self.rows():
                row = [label]
                for m in self.methods:
                    row += [_fmt(per_metric[k][m]) for k in METRICS]
                row += [";".join(best_in_row(per_metric[k])) for k in METRICS]
                w.writerow(row)
        return path

    def write_energy_csv(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["appliance", "method", "true_kwh", "pred_kwh"])
            for a, m, t, p in self.energy:
                w.writerow([a, m, repr(t), repr(p)])
        return path


def emit_report(cells: Sequence[Cell], methods: Optional[list] = None) -> ResultTable:
    """Collect cells into a Table-IV-style result table.

    Appliance and method order follow first appearance unless ``methods``
    is given.  Failed cells and undefined metrics stay missing and are left
    out of the mean row.
    """
    if not cells:
        raise EvaluationError("no cells to report")
    appliances, seen = [], []
    for c in cells:
        if c.appliance not in appliances:
            appliances.append(c.appliance)
        if c.method not in seen:
            seen.append(c.method)
    methods = list(methods) if methods is not None else seen
    values, energy, errors = {}, [], {}
    for c in cells:
        if c.report is None:
            errors[(c.appliance, c.method)] = c.error or "failed"
            continue
        for k in METRICS:
            values[(c.appliance, c.method, k)] = getattr(c.report, k)
        energy.append((c.appliance, c.method, c.report.true_kwh, c.report.pred_kwh))
    return ResultTable(appliances, methods, values, energy, errors)


def read_estimate_csv(path, column: str = "estimate_watts") -> PowerSeries:
    """Load one column of an estimate CSV (``timestamp,estimate_watts,truth_watts``).

    Empty fields are invalid samples.
    """
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[0] != "timestamp" or column not in header:
            raise EvaluationError(f"{path}: expected a timestamp column and {column!r}")
        j = header.index(column)
        ts, vals, valid = [], [], []
        for row in reader:
            if not row:
                continue
            ts.append(int(float(row[0])))
            ok = row[j] != ""
            vals.append(float(row[j]) if ok else 0.0)
            valid.append(ok)
    if not ts:
        raise EvaluationError(f"{path}: no samples")
    period = ts[1] - ts[0] if len(ts) > 1 else 60
    if any(b - a != period for a, b in zip(ts, ts[1:])):
        raise EvaluationError(f"{path}: timestamps are not uniformly spaced")
    return PowerSeries(ts[0], period, np.array(vals), np.array(valid))


def write_estimate_csv(path, estimate: PowerSeries, truth: Optional[PowerSeries] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if truth is not None and (truth.start, truth.period, len(truth)) != (estimate.start, estimate.period, len(estimate)):
        raise EvaluationError("truth is not on the estimate's grid")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("timestamp,estimate_watts,truth_watts\n")
        ts = estimate.timestamps
        for i in range(len(estimate)):
            e = repr(float(estimate.values[i])) if estimate.valid[i] else ""
            t = ""
            if truth is not None and truth.valid[i]:
                t = repr(float(truth.values[i]))
            fh.write(f"{int(ts[i])},{e},{t}\n")
    return path
