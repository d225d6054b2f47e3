"""SVG figures: stacked-dot attribution plots, comparison and benchmark grids.

The documents are built directly (no plotting library) because their
structure is part of the interface: an attribution plot contains exactly one
``<circle class="pt">`` per sample point, stacked within value bins of width
1/50, colored by a symmetric blue-white-red diverging map scaled to the
largest absolute Shapley value.
"""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Optional, Sequence
from xml.sax.saxutils import escape

import numpy as np

from .errors import ValidationError

__all__ = [
    "ATTRIBUTION_BINS",
    "diverging_color",
    "render_attribution",
    "render_comparison_summary",
    "render_probability_heatmap",
]

ATTRIBUTION_BINS = 50

_NEGATIVE = (33, 102, 172)   # dark blue
_NEUTRAL = (247, 247, 247)   # midpoint
_POSITIVE = (178, 24, 43)    # dark red

_POINT_RADIUS = 4.0


def _blend(a: tuple, b: tuple, t: float) -> str:
    channels = tuple(round(a[i] + (b[i] - a[i]) * t) for i in range(3))
    return "#{:02x}{:02x}{:02x}".format(*channels)


def diverging_color(t: float) -> str:
    """Symmetric diverging map on [-1, 1]: blue below 0, red above, pale middle."""
    t = float(np.clip(t, -1.0, 1.0))
    if t >= 0:
        return _blend(_NEUTRAL, _POSITIVE, t)
    return _blend(_NEUTRAL, _NEGATIVE, -t)


def _document(width: float, height: float, body: list[str]) -> str:
    head = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:g}" '
        f'height="{height:g}" viewBox="0 0 {width:g} {height:g}">'
    )
    return "\n".join([head, *body, "</svg>"]) + "\n"


def _write(svg: str, path) -> None:
    if path is not None:
        Path(path).write_text(svg)


def render_attribution(sample, attribution, path=None,
                       predicted_class: Optional[str] = None,
                       true_class: Optional[str] = None) -> str:
    """Stacked-dot plot of a sorted distribution colored by Shapley values.

    Points whose values fall in the same bin (width 1/50) stack vertically.
    ``predicted_class`` / ``true_class`` are shown in the title when given.
    Returns the SVG text; also writes it to ``path`` when provided.
    """
    values = np.asarray(sample, dtype=np.float64)
    phi = np.asarray(attribution.phi, dtype=np.float64)
    if values.ndim != 1 or values.shape != phi.shape:
        raise ValidationError(
            f"sample shape {values.shape} does not match phi shape {phi.shape}"
        )
    if np.any((values < 0.0) | (values > 1.0)):
        raise ValidationError("sample values must lie in [0, 1]")

    bins = np.minimum((values * ATTRIBUTION_BINS).astype(int), ATTRIBUTION_BINS - 1)
    stack_depth = np.zeros(len(values), dtype=int)
    per_bin: dict[int, int] = {}
    for i, b in enumerate(bins):
        stack_depth[i] = per_bin.get(int(b), 0)
        per_bin[int(b)] = stack_depth[i] + 1
    tallest = max(per_bin.values()) if per_bin else 1

    margin_left, margin_right = 50.0, 30.0
    title_height, axis_height, legend_height = 40.0, 36.0, 56.0
    plot_width = 660.0
    step = 2.0 * _POINT_RADIUS
    plot_height = tallest * step + 12.0
    width = margin_left + plot_width + margin_right
    height = title_height + plot_height + axis_height + legend_height
    baseline = title_height + plot_height

    def x_of(value: float) -> float:
        return margin_left + value * plot_width

    scale = float(np.max(np.abs(phi))) if phi.size else 0.0
    body: list[str] = []

    target = attribution.target_class.value
    title = f"Shapley attribution toward {target}"
    labels = []
    if predicted_class is not None:
        labels.append(f"predicted={predicted_class}")
    if true_class is not None:
        labels.append(f"true={true_class}")
    if labels:
        title += "  (" + ", ".join(labels) + ")"
    body.append(
        f'<text class="title" x="{width / 2:g}" y="24" text-anchor="middle" '
        f'font-family="sans-serif" font-size="15">{escape(title)}</text>'
    )

    # axis with ticks at 0, 0.25, ..., 1
    body.append(
        f'<line class="axis" x1="{x_of(0):g}" y1="{baseline:g}" '
        f'x2="{x_of(1):g}" y2="{baseline:g}" stroke="#333" stroke-width="1"/>'
    )
    for tick in (0.0, 0.25, 0.5, 0.75, 1.0):
        tx = x_of(tick)
        body.append(
            f'<line x1="{tx:g}" y1="{baseline:g}" x2="{tx:g}" '
            f'y2="{baseline + 5:g}" stroke="#333" stroke-width="1"/>'
        )
        body.append(
            f'<text x="{tx:g}" y="{baseline + 18:g}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="11">{tick:g}</text>'
        )

    for i in range(len(values)):
        t = 0.0 if scale == 0.0 else phi[i] / scale
        cy = baseline - _POINT_RADIUS - 2.0 - stack_depth[i] * step
        body.append(
            f'<circle class="pt" cx="{x_of(values[i]):.3f}" cy="{cy:.3f}" '
            f'r="{_POINT_RADIUS:g}" fill="{diverging_color(t)}" '
            f'stroke="#555" stroke-width="0.4"/>'
        )

    # legend: gradient bar from -scale to +scale
    legend_top = baseline + axis_height
    legend_width, legend_cells = 240.0, 60
    legend_left = width / 2 - legend_width / 2
    cell_width = legend_width / legend_cells
    for c in range(legend_cells):
        t = 2.0 * (c + 0.5) / legend_cells - 1.0
        body.append(
            f'<rect class="legend-cell" x="{legend_left + c * cell_width:.3f}" '
            f'y="{legend_top:g}" width="{cell_width + 0.3:.3f}" height="12" '
            f'fill="{diverging_color(t)}"/>'
        )
    for anchor, position, text in (
        ("middle", legend_left, f"{-scale:.3g}"),
        ("middle", legend_left + legend_width / 2, "0"),
        ("middle", legend_left + legend_width, f"{scale:.3g}"),
    ):
        body.append(
            f'<text x="{position:g}" y="{legend_top + 26:g}" text-anchor="{anchor}" '
            f'font-family="sans-serif" font-size="11">{escape(text)}</text>'
        )
    body.append(
        f'<text x="{width / 2:g}" y="{legend_top + 42:g}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="11">phi</text>'
    )

    svg = _document(width, height, body)
    _write(svg, path)
    return svg


def _value_color(value: float, good_high: bool) -> str:
    """Single-hue scale for metric cells: white (best) to saturated (worst)."""
    t = float(np.clip(value, 0.0, 1.0))
    if good_high:
        t = 1.0 - t
    return _blend((255, 255, 255), (178, 24, 43), t)


def render_comparison_summary(cells: Sequence[Mapping], path=None) -> str:
    """Metric grid for a dual-pipeline comparison.

    ``cells`` rows need keys: method, dimensionality, sample_size, fpr, fnr,
    f1. One grid row per (method, d, sample size); columns FPR / FNR / F1,
    each cell colored by value and labeled with the exact number.
    """
    if not cells:
        raise ValidationError("no summary cells to render")
    metrics = ("fpr", "fnr", "f1")
    rows = sorted(
        cells,
        key=lambda c: (str(c["method"]), int(c["dimensionality"]), int(c["sample_size"])),
    )
    label_width, cell_width, cell_height = 190.0, 110.0, 26.0
    top = 46.0
    width = label_width + cell_width * len(metrics) + 30.0
    height = top + cell_height * len(rows) + 20.0
    body = [
        f'<text class="title" x="{width / 2:g}" y="22" text-anchor="middle" '
        f'font-family="sans-serif" font-size="14">Detection comparison '
        f'(per method, dimensionality, sample size)</text>'
    ]
    for j, metric in enumerate(metrics):
        body.append(
            f'<text x="{label_width + (j + 0.5) * cell_width:g}" y="{top - 8:g}" '
            f'text-anchor="middle" font-family="sans-serif" font-size="12">'
            f'{metric.upper()}</text>'
        )
    for i, row in enumerate(rows):
        y = top + i * cell_height
        label = (f'{row["method"]}  d={int(row["dimensionality"])}  '
                 f'n={int(row["sample_size"])}')
        body.append(
            f'<text x="{label_width - 8:g}" y="{y + 17:g}" text-anchor="end" '
            f'font-family="sans-serif" font-size="12">{escape(label)}</text>'
        )
        for j, metric in enumerate(metrics):
            value = float(row[metric])
            if not 0.0 <= value <= 1.0:
                raise ValidationError(f"{metric} must lie in [0, 1], got {value}")
            x = label_width + j * cell_width
            body.append(
                f'<rect class="cell" x="{x:g}" y="{y:g}" width="{cell_width - 2:g}" '
                f'height="{cell_height - 2:g}" '
                f'fill="{_value_color(value, good_high=(metric == "f1"))}" '
                f'stroke="#999" stroke-width="0.5"/>'
            )
            body.append(
                f'<text x="{x + (cell_width - 2) / 2:g}" y="{y + 17:g}" '
                f'text-anchor="middle" font-family="sans-serif" font-size="12">'
                f'{value:.3f}</text>'
            )
    svg = _document(width, height, body)
    _write(svg, path)
    return svg


def render_probability_heatmap(rows: Sequence[Mapping], path=None) -> str:
    """Per-optimizer class-probability heat map.

    ``rows`` need keys: config_id, deep (mapping class name -> probability)
    and stat_fraction (fraction of dimensions the statistical pipeline
    rejected). Deep probabilities are shown as-is (unnormalized over the four
    bias classes; the uniform column keeps its mass).
    """
    if not rows:
        raise ValidationError("no benchmark rows to render")
    class_names = list(rows[0]["deep"].keys())
    columns = class_names + ["stat rejected"]
    label_width, cell_width, cell_height = 230.0, 92.0, 26.0
    top = 64.0
    width = label_width + cell_width * len(columns) + 30.0
    height = top + cell_height * len(rows) + 20.0
    body = [
        f'<text class="title" x="{width / 2:g}" y="22" text-anchor="middle" '
        f'font-family="sans-serif" font-size="14">Deep class probabilities and '
        f'statistical rejection fraction per optimizer</text>'
    ]
    for j, name in enumerate(columns):
        body.append(
            f'<text x="{label_width + (j + 0.5) * cell_width:g}" y="{top - 8:g}" '
            f'text-anchor="middle" font-family="sans-serif" font-size="11">'
            f'{escape(name)}</text>'
        )
    for i, row in enumerate(rows):
        y = top + i * cell_height
        body.append(
            f'<text x="{label_width - 8:g}" y="{y + 17:g}" text-anchor="end" '
            f'font-family="sans-serif" font-size="12">{escape(str(row["config_id"]))}</text>'
        )
        values = [float(row["deep"][name]) for name in class_names]
        values.append(float(row["stat_fraction"]))
        for j, value in enumerate(values):
            if not 0.0 <= value <= 1.0:
                raise ValidationError(f"probability must lie in [0, 1], got {value}")
            x = label_width + j * cell_width
            body.append(
                f'<rect class="cell" x="{x:g}" y="{y:g}" width="{cell_width - 2:g}" '
                f'height="{cell_height - 2:g}" fill="{_blend((255, 255, 255), (33, 102, 172), value)}" '
                f'stroke="#999" stroke-width="0.5"/>'
            )
            text_color = "#fff" if value > 0.55 else "#000"
            body.append(
                f'<text x="{x + (cell_width - 2) / 2:g}" y="{y + 17:g}" '
                f'text-anchor="middle" font-family="sans-serif" font-size="11" '
                f'fill="{text_color}">{value:.3f}</text>'
            )
    svg = _document(width, height, body)
    _write(svg, path)
    return svg
