"""Figures: a hand-written SVG for one explanation and matplotlib charts for benchmark metrics."""

from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .core import as_array

ORIGINAL_STROKE = "#1f77b4"
COUNTERFACTUAL_STROKE = "#ff7f0e"

_WIDTH, _HEIGHT, _PAD = 640, 320, 48


def _points(xs, ys) -> str:
    return " ".join(f"{x:.2f},{y:.2f}" for x, y in zip(xs, ys))


def explanation_svg(original, counterfactual=None, interval=None, title: str = "") -> str:
    """SVG 1.1 with the original as one polyline and the replaced segment as another.

    Axes are drawn with ``line`` elements so the document holds exactly two
    polylines when a counterfactual is shown, one otherwise.
    """
    y0 = as_array(original)
    n = y0.size
    series = [y0]
    segment = None
    if counterfactual is not None and interval is not None:
        cf = as_array(counterfactual)
        start, stop = interval.start, interval.stop
        # include the neighbouring points so the segment joins the original visually
        lo, hi = max(0, start - 1), min(n, stop + 1)
        xs = np.arange(lo, hi)
        ys = np.concatenate([y0[lo:start], cf[start:stop], y0[stop:hi]])
        segment = (xs, ys)
        series.append(ys)
    v_min = min(float(s.min()) for s in series)
    v_max = max(float(s.max()) for s in series)
    span = v_max - v_min or 1.0
    plot_w, plot_h = _WIDTH - 2 * _PAD, _HEIGHT - 2 * _PAD

    def sx(i):
        return _PAD + plot_w * (np.asarray(i, dtype=float) / max(n - 1, 1))

    def sy(v):
        return _HEIGHT - _PAD - plot_h * (np.asarray(v, dtype=float) - v_min) / span

    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{_WIDTH}" height="{_HEIGHT}" '
        f'viewBox="0 0 {_WIDTH} {_HEIGHT}">',
        f'<rect x="0" y="0" width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>',
        f'<g class="axes" stroke="black" stroke-width="1">'
        f'<line x1="{_PAD}" y1="{_HEIGHT - _PAD}" x2="{_WIDTH - _PAD}" y2="{_HEIGHT - _PAD}"/>'
        f'<line x1="{_PAD}" y1="{_PAD}" x2="{_PAD}" y2="{_HEIGHT - _PAD}"/></g>',
        f'<g font-family="sans-serif" font-size="11" fill="black">'
        f'<text x="{_PAD}" y="{_HEIGHT - _PAD + 16}">0</text>'
        f'<text x="{_WIDTH - _PAD}" y="{_HEIGHT - _PAD + 16}" text-anchor="end">{n - 1}</text>'
        f'<text x="{_PAD - 6}" y="{_HEIGHT - _PAD}" text-anchor="end">{v_min:.3g}</text>'
        f'<text x="{_PAD - 6}" y="{_PAD + 4}" text-anchor="end">{v_max:.3g}</text>'
        f'<text x="{_WIDTH / 2:.0f}" y="{_HEIGHT - 12}" text-anchor="middle">time step</text></g>',
    ]
    if title:
        parts.append(f'<text x="{_WIDTH / 2:.0f}" y="24" text-anchor="middle" font-family="sans-serif" '
                     f'font-size="13">{escape(title)}</text>')
    parts.append(f'<polyline class="original" fill="none" stroke="{ORIGINAL_STROKE}" stroke-width="1.5" '
                 f'points="{_points(sx(np.arange(n)), sy(y0))}"/>')
    if segment is not None:
        xs, ys = segment
        parts.append(f'<polyline class="counterfactual" fill="none" stroke="{COUNTERFACTUAL_STROKE}" '
                     f'stroke-width="2.5" points="{_points(sx(xs), sy(ys))}"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_explanation_svg(path: str | Path, report) -> Path:
    path = Path(path)
    rec = report.recommended
    title = f"label {report.original_label}" + ("" if rec is None else f" -> {rec.predicted_label}")
    svg = explanation_svg(report.original, None if rec is None else rec.counterfactual,
                          None if rec is None else rec.interval, title)
    path.write_text(svg, encoding="utf-8")
    return path


def _pyplot():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def metric_figures(report, out_dir: str | Path, metrics=None, description: str | None = None) -> list[Path]:
    """One grouped bar chart per metric: classifiers on the x axis, one bar per method.

    ``description`` is stored in the PNG text metadata (used for the config echo).
    """
    from .eval.benchmark import METRICS

    plt = _pyplot()
    out_dir = Path(out_dir)
    classifiers = list(dict.fromkeys(c.classifier for c in report.cells))
    methods = list(dict.fromkeys(c.method for c in report.cells))
    width = 0.8 / max(len(methods), 1)
    paths = []
    for metric in metrics or METRICS:
        fig, ax = plt.subplots(figsize=(5, 3.2))
        for k, method in enumerate(methods):
            values = []
            for clf in classifiers:
                try:
                    v = getattr(report.cell(clf, method), metric)
                except KeyError:
                    v = None
                values.append(np.nan if v is None else v)
            ax.bar(np.arange(len(classifiers)) + (k - (len(methods) - 1) / 2) * width, values, width,
                   label=method)
        ax.set_xticks(np.arange(len(classifiers)))
        ax.set_xticklabels(classifiers)
        ax.set_ylabel(metric)
        ax.set_title(f"{report.dataset}: {metric}")
        ax.legend(frameon=False)
        fig.tight_layout()
        path = out_dir / f"{metric}.png"
        fig.savefig(path, dpi=100, metadata={"Software": None, "Description": description})
        plt.close(fig)
        paths.append(path)
    return paths
