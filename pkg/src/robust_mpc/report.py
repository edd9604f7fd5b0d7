"""CSV output for traces and metrics; floats use 17 significant digits."""

from __future__ import annotations

import csv
import math
import re
from pathlib import Path

from .sim import METRIC_NAMES, ScenarioResult


def fmt(x) -> str:
    x = float(x)
    if math.isnan(x):
        return ""
    return format(x, ".17g")


def trace_header(n: int) -> list[str]:
    return ["t", "r", "y", "y_true", "u", "theta"] + [f"xhat_{i + 1}" for i in range(n)]


def trace_filename(res: ScenarioResult) -> str:
    safe = re.sub(r"[^A-Za-z0-9_.-]+", "_", f"{res.name}_{res.controller}")
    return f"{safe}.csv"


def write_trace_csv(res: ScenarioResult, path) -> Path:
    path = Path(path)
    n = res.x_hat.shape[1]
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(trace_header(n))
        for k in range(res.t.shape[0]):
            theta = fmt(res.theta[k]) if res.robust else ""
            w.writerow(
                [fmt(res.t[k]), fmt(res.r[k]), fmt(res.y[k]), fmt(res.y_true[k]), fmt(res.u[k]), theta]
                + [fmt(v) for v in res.x_hat[k]]
            )
    return path


METRICS_HEADER = ["scenario", "controller", "filter", "c", *METRIC_NAMES, "status"]


def metrics_row(res: ScenarioResult, c: float) -> list[str]:
    return (
        [res.name, res.controller, "robust" if res.robust else "standard", fmt(c) if res.robust else ""]
        + [fmt(res.metrics[m]) for m in METRIC_NAMES]
        + ["failed: " + (res.error or "") if res.failed else "ok"]
    )


def write_metrics_csv(pairs, path) -> Path:
    """``pairs`` is an iterable of ``(ScenarioResult, c)``."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METRICS_HEADER)
        for res, c in pairs:
            w.writerow(metrics_row(res, c))
    return path


def format_table(pairs) -> str:
    cols = ["scenario", "controller", "c", "rmse_settled", "rmse_steady", "energy", "smoothness",
            "smooth_steady", "overshoot"]
    rows = []
    for res, c in pairs:
        m = res.metrics
        rows.append([
            res.name, res.controller, f"{c:g}" if res.robust else "-",
            f"{m['tracking_rmse_settled']:.5f}", f"{m['tracking_rmse_steady']:.5f}", f"{m['control_energy']:.4g}",
            f"{m['smoothness']:.4g}", f"{m['smoothness_steady']:.4g}", f"{m['max_overshoot']:.4f}",
        ])
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h) for i, h in enumerate(cols)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(cols, widths))]
    lines += ["  ".join(v.ljust(w) for v, w in zip(r, widths)) for r in rows]
    return "\n".join(lines)
