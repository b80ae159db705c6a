"""
Lambert equal-area plots of directional series as SVG.

Both hemispheres share one disk of radius sqrt(2); northern positions are
drawn as filled circles and southern ones as open crosses. The disk edge is
the equator.
"""

import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import matplotlib
matplotlib.use('Agg')
from matplotlib import rc_context
from matplotlib.collections import LineCollection
from matplotlib.figure import Figure
from matplotlib.patches import Circle
import numpy as np

from .errors import TrendInputError
from .geometry import SphericalPoint, lambert_project, polar_from_directions

DISK_RADIUS = math.sqrt(2.0)
MARGIN = 0.05
SVG_HASH_SALT = 'dirtrend'
SERIES_COLORS = ('#1f77b4', '#d62728', '#2ca02c', '#9467bd', '#ff7f0e')


@dataclass
class PlotSeries:
    label: str
    points: List[SphericalPoint]

    @classmethod
    def from_directions(cls, label: str, X: np.ndarray) -> 'PlotSeries':
        theta, phi = polar_from_directions(X)
        return cls(label, [SphericalPoint(float(t), float(f)) for t, f in zip(theta, phi)])


@dataclass
class PlotSpec:
    series: List[PlotSeries]
    width_px: int = 640
    height_px: int = 640
    north_symbol: str = 'o'
    south_symbol: str = 'x'
    connect: bool = True
    title: str = ''

    def validate(self) -> None:
        if not self.series or not any(s.points for s in self.series):
            raise TrendInputError("plot needs at least one non-empty series")
        if self.width_px <= 0 or self.height_px <= 0:
            raise TrendInputError(f"invalid plot size {self.width_px}x{self.height_px}")


@dataclass
class SeriesLayout:
    label: str
    x: np.ndarray
    y: np.ndarray
    north: np.ndarray
    segments: List[Tuple[Tuple[float, float], Tuple[float, float]]] = field(default_factory=list)


@dataclass
class LambertLayout:
    """Pixel positions; y grows downwards as in SVG."""
    center: Tuple[float, float]
    radius_px: float
    series: List[SeriesLayout]


def layout_lambert(spec: PlotSpec) -> LambertLayout:
    """Map every series onto the drawing area, disk inset by a 5% margin."""
    spec.validate()
    cx, cy = spec.width_px / 2.0, spec.height_px / 2.0
    radius_px = (1.0 - MARGIN) * min(cx, cy)
    scale = radius_px / DISK_RADIUS

    layouts = []
    for series in spec.series:
        projected = [lambert_project(pt) for pt in series.points]
        x = np.array([cx + scale * lp.u for lp in projected])
        y = np.array([cy - scale * lp.v for lp in projected])
        north = np.array([lp.north for lp in projected], dtype=bool)
        segments = []
        if spec.connect:
            segments = [((x[i], y[i]), (x[i + 1], y[i + 1])) for i in range(len(projected) - 1)]
        layouts.append(SeriesLayout(series.label, x, y, north, segments))
    return LambertLayout((cx, cy), radius_px, layouts)


def render_lambert_svg(spec: PlotSpec, path: Optional[Union[str, Path]] = None) -> str:
    """
    Render the plot as an SVG document.

    Output bytes depend only on the input: the SVG id salt is fixed and no
    date is written.
    """
    layout = layout_lambert(spec)
    with rc_context({'svg.hashsalt': SVG_HASH_SALT, 'svg.fonttype': 'none'}):
        fig = Figure(figsize=(spec.width_px / 100.0, spec.height_px / 100.0), dpi=100)
        ax = fig.add_axes((0.0, 0.0, 1.0, 1.0))
        ax.set_xlim(0, spec.width_px)
        ax.set_ylim(spec.height_px, 0)
        ax.set_aspect('equal')
        ax.set_axis_off()
        ax.add_patch(Circle(layout.center, layout.radius_px, fill=False, edgecolor='black', linewidth=1.0))

        for index, series in enumerate(layout.series):
            color = SERIES_COLORS[index % len(SERIES_COLORS)]
            if series.segments:
                ax.add_collection(LineCollection(series.segments, colors=color, linewidths=0.6))
            north = series.north
            if north.any():
                ax.scatter(series.x[north], series.y[north], marker=spec.north_symbol, s=12,
                           color=color, label=f"{series.label} (north)")
            if (~north).any():
                ax.scatter(series.x[~north], series.y[~north], marker=spec.south_symbol, s=16,
                           color=color, linewidths=0.8, label=f"{series.label} (south)")
        if spec.title:
            ax.text(spec.width_px / 2.0, 0.02 * spec.height_px, spec.title, ha='center', va='top')
        if len(layout.series) > 1:
            ax.legend(loc='lower right', fontsize=7, frameon=False)

        buffer = io.StringIO()
        fig.savefig(buffer, format='svg', metadata={'Date': None})
    svg = buffer.getvalue()
    if path is not None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(svg, encoding='utf-8')
    return svg


def series_from_directions(named: Sequence[Tuple[str, np.ndarray]]) -> List[PlotSeries]:
    return [PlotSeries.from_directions(label, X) for label, X in named if X is not None]
