"""Serialization of experiment results: results.csv, report.json, plots.svg."""

import csv
import io
import json
import math
import platform
from typing import List
from xml.sax.saxutils import escape

import numpy as np

from . import __version__
from .experiments import ExperimentResult, HeatMap, LinePlot

CSV_HEADER = ["experiment", "table", "row", "parameters", "quantity", "value"]


def _scalar(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else None
    return v


def _text(v) -> str:
    v = _scalar(v)
    if v is None:
        return "nan"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def results_csv(res: ExperimentResult) -> str:
    """Long-format table: one row per reported quantity, tagged with its parameters."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(CSV_HEADER)
    for tab in res.tables:
        for i, row in enumerate(tab.rows):
            params = ";".join(f"{k}={_text(row[k])}" for k in tab.params if k in row)
            for k, v in row.items():
                if k not in tab.params:
                    w.writerow([res.experiment, tab.name, i, params, k, _text(v)])
    for i, c in enumerate(res.checks):
        w.writerow([res.experiment, "checks", i, f"criterion={c.criterion};check={c.name};threshold={c.threshold}", "value", _text(c.value)])
        w.writerow([res.experiment, "checks", i, f"criterion={c.criterion};check={c.name};threshold={c.threshold}", "passed", _text(c.passed)])
    return buf.getvalue()


def environment(seed: int) -> dict:
    return {"xlab": __version__, "numpy": np.__version__, "python": platform.python_version(), "seed": seed}


def report_json(res: ExperimentResult, config: dict, anchor: str) -> str:
    doc = {
        "experiment": res.experiment,
        "anchor": anchor,
        "config": config,
        "environment": environment(config.get("seed", 0)),
        "passed": res.passed,
        "partial": res.partial,
        "checks": [
            {"criterion": c.criterion, "name": c.name, "value": _scalar(c.value), "threshold": c.threshold, "passed": c.passed}
            for c in res.checks
        ],
        "tables": {
            t.name: {"params": t.params, "rows": [{k: _scalar(v) for k, v in r.items()} for r in t.rows]} for t in res.tables
        },
    }
    return json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


# ---------------------------------------------------------------- SVG

PANEL_W, PANEL_H = 640, 380
MARGIN = (70, 20, 40, 60)  # left, right, top, bottom
PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2"]
RAMP = [(68, 1, 84), (59, 82, 139), (33, 145, 140), (94, 201, 98), (253, 231, 37)]


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _ticks(lo, hi, log):
    if log:
        return [10.0 ** k for k in range(math.floor(lo), math.ceil(hi) + 1) if lo <= k <= hi]
    step = 10 ** math.floor(math.log10((hi - lo) / 4)) if hi > lo else 1.0
    for m in (1, 2, 5, 10):
        if (hi - lo) / (m * step) <= 6:
            step *= m
            break
    start = math.ceil(lo / step) * step
    return [start + k * step for k in range(int((hi - start) / step + 1e-9) + 1)]


def _label(v):
    return f"{v:.3g}"


def _ramp(u: float) -> str:
    u = min(max(u, 0.0), 1.0) * (len(RAMP) - 1)
    i = min(int(u), len(RAMP) - 2)
    f = u - i
    c = [round(a + (b - a) * f) for a, b in zip(RAMP[i], RAMP[i + 1])]
    return "#%02x%02x%02x" % tuple(c)


def _frame(out, y0, title, xlabel, ylabel):
    l, r, t, b = MARGIN
    out.append(f'<g transform="translate(0,{y0})">')
    out.append(f'<text x="{PANEL_W / 2}" y="{t - 15}" text-anchor="middle" font-size="14">{escape(title)}</text>')
    out.append(f'<text x="{PANEL_W / 2}" y="{PANEL_H - 15}" text-anchor="middle" font-size="12">{escape(xlabel)}</text>')
    out.append(f'<text x="15" y="{PANEL_H / 2}" text-anchor="middle" font-size="12" '
               f'transform="rotate(-90 15 {PANEL_H / 2})">{escape(ylabel)}</text>')
    out.append(f'<rect x="{l}" y="{t}" width="{PANEL_W - l - r}" height="{PANEL_H - t - b}" fill="none" stroke="black"/>')


def _axes(out, xr, yr, logx, logy, sx, sy):
    l, r, t, b = MARGIN
    for v in _ticks(*xr, logx):
        x = sx(math.log10(v) if logx else v)
        out.append(f'<line x1="{_fmt(x)}" y1="{PANEL_H - b}" x2="{_fmt(x)}" y2="{PANEL_H - b + 5}" stroke="black"/>')
        out.append(f'<text x="{_fmt(x)}" y="{PANEL_H - b + 18}" text-anchor="middle" font-size="10">{_label(v)}</text>')
    for v in _ticks(*yr, logy):
        y = sy(math.log10(v) if logy else v)
        out.append(f'<line x1="{l - 5}" y1="{_fmt(y)}" x2="{l}" y2="{_fmt(y)}" stroke="black"/>')
        out.append(f'<text x="{l - 8}" y="{_fmt(y + 3)}" text-anchor="end" font-size="10">{_label(v)}</text>')


def _line_panel(out, y0, p: LinePlot):
    l, r, t, b = MARGIN
    tx = (lambda v: np.log10(v)) if p.logx else (lambda v: v)
    ty = (lambda v: np.log10(v)) if p.logy else (lambda v: v)
    pts = []
    for _, xs, ys in p.series:
        xs, ys = np.asarray(xs, float), np.asarray(ys, float)
        ok = np.isfinite(xs) & np.isfinite(ys) & ((xs > 0) | (not p.logx)) & ((ys > 0) | (not p.logy))
        pts.append((tx(xs[ok]), ty(ys[ok])))
    allx = np.concatenate([x for x, _ in pts]) if pts else np.zeros(1)
    ally = np.concatenate([y for _, y in pts]) if pts else np.zeros(1)
    if len(allx) == 0:
        allx, ally = np.zeros(1), np.zeros(1)
    xr = (float(allx.min()), float(allx.max()) if allx.max() > allx.min() else float(allx.min()) + 1)
    yr = (float(ally.min()), float(ally.max()) if ally.max() > ally.min() else float(ally.min()) + 1)
    sx = lambda v: l + (v - xr[0]) / (xr[1] - xr[0]) * (PANEL_W - l - r)
    sy = lambda v: PANEL_H - b - (v - yr[0]) / (yr[1] - yr[0]) * (PANEL_H - t - b)
    _frame(out, y0, p.title, p.xlabel, p.ylabel)
    _axes(out, xr, yr, p.logx, p.logy, sx, sy)
    for k, ((label, _, _), (xs, ys)) in enumerate(zip(p.series, pts)):
        color = PALETTE[k % len(PALETTE)]
        path = " ".join(f"{_fmt(sx(x))},{_fmt(sy(y))}" for x, y in zip(xs, ys))
        dash = ' stroke-dasharray="4 3"' if " fit " in label else ""
        out.append(f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>')
        out.append(f'<text x="{l + 10}" y="{t + 14 + 13 * k}" font-size="10" fill="{color}">{escape(label)}</text>')
    out.append("</g>")


def _heat_panel(out, y0, p: HeatMap):
    l, r, t, b = MARGIN
    xs, ys, V = np.asarray(p.xs, float), np.asarray(p.ys, float), np.asarray(p.values, float)
    lo, hi = float(np.nanmin(V)), float(np.nanmax(V))
    span = hi - lo if hi > lo else 1.0
    w = (PANEL_W - l - r) / len(xs)
    h = (PANEL_H - t - b) / len(ys)
    _frame(out, y0, p.title, p.xlabel, p.ylabel)
    for i in range(len(ys)):
        for j in range(len(xs)):
            out.append(f'<rect x="{_fmt(l + j * w)}" y="{_fmt(PANEL_H - b - (i + 1) * h)}" width="{_fmt(w)}" '
                       f'height="{_fmt(h)}" fill="{_ramp((V[i, j] - lo) / span)}"/>')
    sx = lambda v: l + (v - xs[0]) / (xs[-1] - xs[0]) * (PANEL_W - l - r - w) + w / 2
    sy = lambda v: PANEL_H - b - (v - ys[0]) / (ys[-1] - ys[0]) * (PANEL_H - t - b - h) - h / 2
    _axes(out, (xs[0], xs[-1]), (ys[0], ys[-1]), False, False, sx, sy)
    out.append(f'<text x="{PANEL_W - r}" y="{t - 4}" text-anchor="end" font-size="10">range {_label(lo)} to {_label(hi)}</text>')
    out.append("</g>")


def plots_svg(plots: List) -> str:
    """All plots of a run, stacked vertically in one SVG document."""
    n = max(len(plots), 1)
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{PANEL_W}" height="{PANEL_H * n}" '
           f'viewBox="0 0 {PANEL_W} {PANEL_H * n}" font-family="sans-serif">',
           f'<rect width="{PANEL_W}" height="{PANEL_H * n}" fill="white"/>']
    if not plots:
        out.append(f'<text x="{PANEL_W / 2}" y="{PANEL_H / 2}" text-anchor="middle">no plots</text>')
    for k, p in enumerate(plots):
        if isinstance(p, HeatMap):
            _heat_panel(out, k * PANEL_H, p)
        else:
            _line_panel(out, k * PANEL_H, p)
    out.append("</svg>")
    return "\n".join(out) + "\n"
