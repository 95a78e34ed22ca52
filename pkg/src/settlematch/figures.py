"""Deterministic SVG figures from saved pipeline outputs.

Plain text SVG with fixed viewports and fixed decimal formatting, so a
figure built twice from the same inputs is byte-identical and can be
golden-tested. Three figure kinds: per-region count scatters with an
identity line, an equirectangular choropleth of regional overlap, and an
odds-ratio chart with confidence whiskers around the unit line.
"""

from __future__ import annotations

from math import log
from pathlib import Path

from .geio.reports import format_real
from .geio.vector import AdminRegion

# two-stop ramp for overlap values: theta 0 -> pale yellow, 1 -> deep blue
_RAMP_LO = (255, 255, 204)
_RAMP_HI = (8, 64, 129)
_MISSING_FILL = "#cccccc"


def _f(x: float) -> str:
    return f"{x:.2f}"


def theta_color(theta: float) -> str:
    """Linear RGB interpolation between the ramp endpoints."""
    t = max(0.0, min(1.0, theta))
    rgb = [round(lo + t * (hi - lo)) for lo, hi in zip(_RAMP_LO, _RAMP_HI)]
    return "#{:02x}{:02x}{:02x}".format(*rgb)


class SvgCanvas:
    def __init__(self, width: int, height: int):
        self.width = width
        self.height = height
        self.parts: list[str] = []

    def rect(self, x, y, w, h, fill="none", stroke="none", width=1.0):
        self.parts.append(f'<rect x="{_f(x)}" y="{_f(y)}" width="{_f(w)}" height="{_f(h)}" '
                          f'fill="{fill}" stroke="{stroke}" stroke-width="{_f(width)}"/>')

    def line(self, x1, y1, x2, y2, stroke="#000000", width=1.0, dash=None):
        dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
        self.parts.append(f'<line x1="{_f(x1)}" y1="{_f(y1)}" x2="{_f(x2)}" y2="{_f(y2)}" '
                          f'stroke="{stroke}" stroke-width="{_f(width)}"{dash_attr}/>')

    def circle(self, cx, cy, r, fill="#000000"):
        self.parts.append(f'<circle cx="{_f(cx)}" cy="{_f(cy)}" r="{_f(r)}" fill="{fill}"/>')

    def path(self, points: list[tuple[float, float]], fill="none", stroke="#000000", width=1.0):
        d = "M " + " L ".join(f"{_f(x)} {_f(y)}" for x, y in points) + " Z"
        self.parts.append(f'<path d="{d}" fill="{fill}" stroke="{stroke}" '
                          f'stroke-width="{_f(width)}"/>')

    def text(self, x, y, s, size=11, anchor="start", fill="#333333"):
        self.parts.append(f'<text x="{_f(x)}" y="{_f(y)}" font-family="monospace" '
                          f'font-size="{size}" text-anchor="{anchor}" fill="{fill}">{s}</text>')

    def save(self, path) -> None:
        body = "\n".join(self.parts)
        Path(path).write_text(
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.width}" '
            f'height="{self.height}" viewBox="0 0 {self.width} {self.height}">\n'
            f'<rect width="{self.width}" height="{self.height}" fill="#ffffff"/>\n'
            f"{body}\n</svg>\n", encoding="utf-8")


def counts_scatter_svg(dataset_names: list[str], region_counts: list[dict[str, int]],
                       out_path) -> None:
    """One panel per dataset pair: per-region settled-cell counts.

    Each panel draws the identity line; perfectly matching datasets put
    every point on it.
    """
    pairs = [(a, b) for i, a in enumerate(dataset_names)
             for b in dataset_names[i + 1:]]
    panel = 240
    margin = 46
    canvas = SvgCanvas(margin + len(pairs) * (panel + margin), panel + 2 * margin)
    vmax = max((max(rc.get(n, 0) for n in dataset_names) for rc in region_counts),
               default=1)
    vmax = max(vmax, 1)
    for k, (a, b) in enumerate(pairs):
        x0 = margin + k * (panel + margin)
        y0 = margin
        canvas.rect(x0, y0, panel, panel, stroke="#444444")
        canvas.line(x0, y0 + panel, x0 + panel, y0, stroke="#999999", dash="4,3")
        for rc in region_counts:
            px = x0 + panel * rc.get(a, 0) / vmax
            py = y0 + panel - panel * rc.get(b, 0) / vmax
            canvas.circle(px, py, 3.0, fill="#1f5fa8")
        canvas.text(x0 + panel / 2, y0 + panel + 26, f"{a} cells", anchor="middle")
        canvas.text(x0 - 30, y0 + panel / 2, f"{b}", anchor="middle")
        canvas.text(x0, y0 - 8, f"{a} vs {b}")
        canvas.text(x0 + panel, y0 + panel + 12, format_real(float(vmax)), anchor="end")
        canvas.text(x0 - 4, y0 + 10, format_real(float(vmax)), anchor="end")
    canvas.save(out_path)


def choropleth_svg(regions: list[AdminRegion], theta_by_region: dict[str, float | None],
                   out_path) -> None:
    """Regions on an equirectangular canvas filled by their overlap value."""
    lons = [x for r in regions for poly in r.polygons for ring in poly for x, _ in ring]
    lats = [y for r in regions for poly in r.polygons for ring in poly for _, y in ring]
    lon0, lon1 = min(lons), max(lons)
    lat0, lat1 = min(lats), max(lats)
    span_lon = max(lon1 - lon0, 1e-9)
    span_lat = max(lat1 - lat0, 1e-9)
    plot_w = 560.0
    plot_h = plot_w * span_lat / span_lon
    margin = 40
    canvas = SvgCanvas(int(plot_w + 2 * margin), int(plot_h + 2 * margin + 30))

    def project(lon, lat):
        return (margin + (lon - lon0) / span_lon * plot_w,
                margin + (lat1 - lat) / span_lat * plot_h)

    for region in regions:
        theta = theta_by_region.get(region.region_id)
        fill = _MISSING_FILL if theta is None else theta_color(theta)
        for poly in region.polygons:
            for ring in poly:
                canvas.path([project(x, y) for x, y in ring[:-1]],
                            fill=fill, stroke="#333333", width=0.8)
    # ramp legend
    ly = plot_h + margin + 16
    for i in range(40):
        canvas.rect(margin + i * 4, ly, 4, 10, fill=theta_color(i / 39.0))
    canvas.text(margin, ly + 22, "0", size=10)
    canvas.text(margin + 160, ly + 22, "1", size=10, anchor="end")
    canvas.text(margin + 200, ly + 10, "overlap", size=10)
    canvas.save(out_path)


def odds_ratio_svg(odds: list[dict], out_path) -> None:
    """Whisker chart of odds ratios on a log axis with the unit line."""
    if not odds:
        raise ValueError("no odds ratios to draw")
    row_h = 26
    plot_w = 420.0
    left = 180
    top = 30
    canvas = SvgCanvas(left + int(plot_w) + 60, top + row_h * len(odds) + 40)
    lo = min(min(o["lo"] for o in odds), 1.0) * 0.9
    hi = max(max(o["hi"] for o in odds), 1.0) * 1.1

    def x_of(v: float) -> float:
        return left + plot_w * (log(v) - log(lo)) / (log(hi) - log(lo))

    x_one = x_of(1.0)
    canvas.line(x_one, top - 10, x_one, top + row_h * len(odds) + 6,
                stroke="#888888", dash="4,3")
    canvas.text(x_one, top - 16, "1", anchor="middle", size=10)
    for i, entry in enumerate(odds):
        y = top + row_h * i + row_h / 2
        canvas.text(left - 8, y + 4, entry["feature"], anchor="end")
        xl, xh = x_of(entry["lo"]), x_of(entry["hi"])
        canvas.line(xl, y, xh, y, stroke="#1f5fa8", width=2.0)
        canvas.line(xl, y - 4, xl, y + 4, stroke="#1f5fa8", width=2.0)
        canvas.line(xh, y - 4, xh, y + 4, stroke="#1f5fa8", width=2.0)
        canvas.circle(x_of(entry["point"]), y, 3.5, fill="#0b3d66")
        canvas.text(left + plot_w + 8, y + 4,
                    f'{format_real(entry["point"])} '
                    f'[{format_real(entry["lo"])};{format_real(entry["hi"])}]', size=9)
    canvas.save(out_path)
