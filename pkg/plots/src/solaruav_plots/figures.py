"""Error-bar line charts from campaign CSVs.

The input is the campaign result format: one row per (scheme, sweep
point, trial) with columns scheme, sweep_value, s_area, objective and
status.  Charts aggregate trials into mean +/- standard error and draw
one line per (scheme, panel area) combination.  Output is byte-stable:
regenerating from the same CSV yields identical files (volatile image
metadata such as SVG creation dates is stripped).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

REQUIRED_COLUMNS = ("scheme", "sweep_value", "s_area", "objective", "status")

SCHEME_LABELS = {
    "proposed": "proposed (joint optimization)",
    "baseline1": "fixed position",
    "baseline2": "random assignment",
    "oracle": "grid oracle",
}
SCHEME_COLORS = {
    "proposed": "tab:blue",
    "baseline1": "tab:orange",
    "baseline2": "tab:green",
    "oracle": "tab:red",
}
AREA_STYLES = ["-", "--", ":", "-."]


class CsvFormatError(ValueError):
    """Input CSV does not satisfy the campaign result contract."""


@dataclass(frozen=True)
class Curve:
    scheme: str
    s_area: float
    x: list
    mean: list
    stderr: list


def load_curves(csv_path) -> list[Curve]:
    """Aggregate a campaign CSV into one mean/stderr curve per line.

    Rows whose status is not "ok" (infeasible or failed trials) are
    skipped; missing required columns are named in the error.
    """
    groups: dict = {}
    with open(csv_path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in REQUIRED_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise CsvFormatError(f"CSV {csv_path} missing columns: {missing}")
        for rec in reader:
            if rec["status"] != "ok":
                continue
            key = (rec["scheme"], float(rec["s_area"]), float(rec["sweep_value"]))
            groups.setdefault(key, []).append(float(rec["objective"]))
    if not groups:
        raise CsvFormatError(f"CSV {csv_path} contains no usable rows")

    by_line: dict = {}
    for (scheme, area, x), objs in sorted(groups.items()):
        n = len(objs)
        mean = sum(objs) / n
        if n > 1:
            var = sum((o - mean) ** 2 for o in objs) / (n - 1)
            stderr = math.sqrt(var / n)
        else:
            stderr = 0.0
        by_line.setdefault((scheme, area), []).append((x, mean, stderr))
    curves = []
    for (scheme, area), pts in sorted(by_line.items()):
        pts.sort()
        curves.append(
            Curve(
                scheme=scheme,
                s_area=area,
                x=[p[0] for p in pts],
                mean=[p[1] for p in pts],
                stderr=[p[2] for p in pts],
            )
        )
    return curves


def _draw(curves: list[Curve], xlabel: str, out_path, label_area: bool):
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    areas = sorted({c.s_area for c in curves})
    for curve in curves:
        label = SCHEME_LABELS.get(curve.scheme, curve.scheme)
        if label_area:
            label += f", S = {curve.s_area:g} m$^2$"
        ax.errorbar(
            curve.x,
            curve.mean,
            yerr=curve.stderr,
            label=label,
            color=SCHEME_COLORS.get(curve.scheme),
            linestyle=AREA_STYLES[areas.index(curve.s_area) % len(AREA_STYLES)],
            marker="o",
            markersize=4,
            capsize=3,
        )
    ax.set_xlabel(xlabel)
    ax.set_ylabel("average sum throughput (bits/s/Hz)")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    _save_stable(fig, out_path)
    plt.close(fig)


def _save_stable(fig, out_path):
    """Write the figure without volatile metadata so reruns are identical."""
    path = str(out_path)
    if path.endswith(".svg"):
        with matplotlib.rc_context({"svg.hashsalt": "campaign"}):
            fig.savefig(path, metadata={"Date": None})
    elif path.endswith(".png"):
        fig.savefig(path, dpi=150, metadata={"Software": None})
    else:
        fig.savefig(path)


def plot_power_sweep(csv_path, out_path):
    """Mean objective vs transmit power budget in dBm, one line per
    (scheme, panel area); error bars show the standard error."""
    curves = load_curves(csv_path)
    label_area = len({c.s_area for c in curves}) > 1
    _draw(curves, "transmit power budget $P_{max}$ (dBm)", out_path, label_area)


def plot_user_sweep(csv_path, out_path):
    """Mean objective vs number of users, one line per (scheme, panel area)."""
    curves = load_curves(csv_path)
    label_area = len({c.s_area for c in curves}) > 1
    _draw(curves, "number of users $K$", out_path, label_area)
