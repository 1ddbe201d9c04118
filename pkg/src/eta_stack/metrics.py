"""MAE, MRE and MAPE plus model-comparison reports."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np


class MetricsError(ValueError):
    pass


@dataclass(frozen=True)
class MetricsReport:
    mae: float   # seconds
    mre: float   # ratio
    mape: float  # ratio; rendered x100
    n: int

    @property
    def mape_pct(self) -> float:
        return self.mape * 100.0

    def as_tuple(self) -> tuple[float, float, float]:
        """(MAE s, MRE, MAPE %) in the order and units of the comparison table."""
        return (self.mae, self.mre, self.mape_pct)


def compute_metrics(y, y_hat) -> MetricsReport:
    y = np.asarray(y, dtype=float).ravel()
    y_hat = np.asarray(y_hat, dtype=float).ravel()
    if y.shape != y_hat.shape:
        raise MetricsError(f"length mismatch: {y.size} targets vs {y_hat.size} predictions")
    if y.size == 0:
        raise MetricsError("no samples")
    if np.any(y <= 0):
        raise MetricsError("all targets must be positive durations")
    err = np.abs(y - y_hat)
    return MetricsReport(
        mae=float(np.mean(err)),
        mre=float(np.sum(err) / np.sum(y)),
        mape=float(np.mean(err / y)),
        n=int(y.size),
    )


@dataclass(frozen=True)
class ReportRow:
    model: str
    dataset: str
    metrics: MetricsReport


CSV_HEADER = ["model", "dataset", "mae_s", "mre", "mape_pct", "n"]


def report_csv(rows: list[ReportRow], extra: dict | None = None) -> str:
    """CSV text with one row per (model, dataset); ``extra`` adds constant trailing columns."""
    extra = extra or {}
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER + list(extra))
    for r in rows:
        m = r.metrics
        w.writerow([r.model, r.dataset, f"{m.mae:.4f}", f"{m.mre:.4f}", f"{m.mape_pct:.4f}", m.n,
                    *extra.values()])
    return buf.getvalue()


def report_text(rows: list[ReportRow]) -> str:
    """Aligned plain-text table in row order."""
    head = f"{'model':<14}{'dataset':<12}{'MAE [s]':>12}{'MRE':>10}{'MAPE':>10}"
    lines = [head, "-" * len(head)]
    for r in rows:
        m = r.metrics
        lines.append(f"{r.model:<14}{r.dataset:<12}{m.mae:>12.4f}{m.mre:>10.4f}{m.mape_pct:>10.4f}")
    return "\n".join(lines) + "\n"
