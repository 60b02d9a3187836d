"""Self-contained SVG charts and CSV tables for experiment reports.

Output depends only on the report contents, so identical reports render to
identical bytes.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

from .experiments import ExperimentReport, SweepResult

W, H = 480, 360
MARGIN = 50


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    step = 10 ** math.floor(math.log10((hi - lo) / n))
    for mult in (1, 2, 5, 10):
        if (hi - lo) / (step * mult) <= n:
            step *= mult
            break
    start = math.ceil(lo / step) * step
    return [start + i * step for i in range(int((hi - start) / step + 1e-9) + 1)]


class _Axes:
    def __init__(self, xlim, ylim):
        self.x0, self.x1 = xlim
        self.y0, self.y1 = ylim

    def x(self, v):
        return MARGIN + (v - self.x0) / (self.x1 - self.x0) * (W - 2 * MARGIN)

    def y(self, v):
        return H - MARGIN - (v - self.y0) / (self.y1 - self.y0) * (H - 2 * MARGIN)

    def frame(self, title, xlabel, ylabel) -> list[str]:
        out = [
            f'<rect x="{MARGIN}" y="{MARGIN}" width="{W - 2 * MARGIN}" height="{H - 2 * MARGIN}" '
            'fill="none" stroke="#333"/>',
            f'<text x="{W / 2}" y="{MARGIN / 2}" text-anchor="middle" font-size="14">{escape(title)}</text>',
            f'<text x="{W / 2}" y="{H - 10}" text-anchor="middle" font-size="12">{escape(xlabel)}</text>',
            f'<text x="14" y="{H / 2}" text-anchor="middle" font-size="12" '
            f'transform="rotate(-90 14 {H / 2})">{escape(ylabel)}</text>',
        ]
        for t in _ticks(self.x0, self.x1):
            out.append(f'<text x="{_fmt(self.x(t))}" y="{H - MARGIN + 14}" text-anchor="middle" '
                       f'font-size="10">{t:.3g}</text>')
        for t in _ticks(self.y0, self.y1):
            out.append(f'<text x="{MARGIN - 4}" y="{_fmt(self.y(t) + 3)}" text-anchor="end" '
                       f'font-size="10">{t:.3g}</text>')
        return out


def _svg(body: list[str], data_comment: str) -> str:
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
            f'viewBox="0 0 {W} {H}">')
    return "\n".join([head, f"<!--\n{data_comment}-->", *body, "</svg>", ""])


def _padded(lo: float, hi: float) -> tuple[float, float]:
    pad = 0.05 * (hi - lo) if hi > lo else max(abs(lo), 1.0) * 0.05
    return lo - pad, hi + pad


def scatter_svg(report: ExperimentReport) -> str:
    """Predicted price (x) against market price (y) with the identity line."""
    if not report.rows:
        raise ValueError("empty prediction table")
    pred = np.array([r.predicted_price for r in report.rows])
    true = np.array([r.true_price for r in report.rows])
    lo, hi = _padded(min(pred.min(), true.min()), max(pred.max(), true.max()))
    ax = _Axes((lo, hi), (lo, hi))
    body = ax.frame(
        f"{report.model}: R2 = {report.metrics['r2']:.6f}", "predicted price", "market price"
    )
    body.append(f'<line x1="{_fmt(ax.x(lo))}" y1="{_fmt(ax.y(lo))}" x2="{_fmt(ax.x(hi))}" '
                f'y2="{_fmt(ax.y(hi))}" stroke="#c33" stroke-dasharray="4 3"/>')
    for p, t in zip(pred, true):
        body.append(f'<circle cx="{_fmt(ax.x(p))}" cy="{_fmt(ax.y(t))}" r="2.5" fill="#247"/>')
    data = "payoff_id,predicted_price,true_price\n" + "".join(
        f"{r.payoff_id},{r.predicted_price!r},{r.true_price!r}\n" for r in report.rows
    )
    return _svg(body, data)


def histogram_svg(report: ExperimentReport, bins: int = 20) -> str:
    """Histogram of pricing errors (predicted minus market)."""
    if not report.rows:
        raise ValueError("empty prediction table")
    err = np.array([r.error for r in report.rows])
    lo, hi = float(err.min()), float(err.max())
    if hi == lo:
        lo, hi = lo - 0.5 * max(abs(lo), 1e-12), hi + 0.5 * max(abs(hi), 1e-12)
    counts, edges = np.histogram(err, bins=bins, range=(lo, hi))
    ax = _Axes((lo, hi), (0, max(int(counts.max()), 1) * 1.1))
    body = ax.frame(f"{report.model}: pricing error", "predicted - market", "count")
    for c, a, b in zip(counts, edges[:-1], edges[1:]):
        if c:
            body.append(f'<rect x="{_fmt(ax.x(a))}" y="{_fmt(ax.y(c))}" '
                        f'width="{_fmt(ax.x(b) - ax.x(a))}" height="{_fmt(ax.y(0) - ax.y(c))}" '
                        'fill="#479" stroke="#fff"/>')
    data = "bin_lo,bin_hi,count\n" + "".join(
        f"{a!r},{b!r},{int(c)}\n" for c, a, b in zip(counts, edges[:-1], edges[1:])
    )
    return _svg(body, data)


def sweep_svg(sweep: SweepResult) -> str:
    """R^2 against family size."""
    sizes = np.array(sweep.sizes, dtype=float)
    r2 = np.array(sweep.r2)
    ax = _Axes(_padded(sizes.min(), sizes.max()), _padded(min(r2.min(), 0.0), 1.0))
    body = ax.frame("R2 against family size", "family size", "R2")
    pts = " ".join(f"{_fmt(ax.x(s))},{_fmt(ax.y(r))}" for s, r in zip(sizes, r2))
    body.append(f'<polyline points="{pts}" fill="none" stroke="#247"/>')
    for s, r in zip(sizes, r2):
        body.append(f'<circle cx="{_fmt(ax.x(s))}" cy="{_fmt(ax.y(r))}" r="3" fill="#247"/>')
    return _svg(body, sweep.curve_csv())


def render_report(report: ExperimentReport, out_dir: str | Path, prefix: str | None = None) -> list[Path]:
    """Write scatter/histogram SVGs and the prediction/metric CSVs; returns the paths written."""
    if not report.rows:
        raise ValueError("empty prediction table")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = prefix if prefix is not None else report.model
    files = {
        f"{stem}_scatter.svg": scatter_svg(report),
        f"{stem}_errors.svg": histogram_svg(report),
        f"{stem}_predictions.csv": report.predictions_csv(),
        f"{stem}_metrics.csv": report.metrics_csv(),
    }
    written = []
    for name, text in files.items():
        p = out / name
        p.write_text(text)
        written.append(p)
    return written


def render_reports(reports: Sequence[ExperimentReport], out_dir: str | Path) -> list[Path]:
    """One scatter/histogram pair per model plus a combined metrics table."""
    written = []
    for rep in reports:
        written += render_report(rep, out_dir)
    table = "model,family_size,r2,r2_exotic,mse,mae\n" + "".join(
        rep.metrics_csv().splitlines()[1] + "\n" for rep in reports
    )
    p = Path(out_dir) / "table.csv"
    p.write_text(table)
    return written + [p]
