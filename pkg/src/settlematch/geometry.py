"""Small polygon utilities shared by the rasterizer and readers.

Polygons are plain Python structures: a ring is a list of (lon, lat)
tuples with first == last, a polygon is a list of rings (outer first,
holes after), and a multipolygon is a list of polygons. Interior tests
use the even-odd rule throughout, so ring winding never matters.
"""

from __future__ import annotations

Ring = list[tuple[float, float]]
Polygon = list[Ring]


def close_ring(ring: Ring) -> Ring:
    """Return the ring with the closing vertex appended if missing."""
    if len(ring) >= 2 and ring[0] != ring[-1]:
        return list(ring) + [ring[0]]
    return list(ring)


def ring_area_signed(ring: Ring) -> float:
    """Shoelace area; positive for counter-clockwise rings (degree^2)."""
    s = 0.0
    for (x1, y1), (x2, y2) in zip(ring, ring[1:]):
        s += x1 * y2 - x2 * y1
    return 0.5 * s


def polygon_centroid(rings: Polygon) -> tuple[float, float] | None:
    """Area centroid of a polygon with optional holes.

    Winding is normalized so the largest ring counts positive and every
    other ring negative (a hole), which matches even-odd filling for the
    building-footprint shapes this is used on. Returns None when the
    total area is zero (degenerate polygon).
    """
    areas = [ring_area_signed(r) for r in rings]
    if not areas:
        return None
    outer = max(range(len(areas)), key=lambda i: abs(areas[i]))
    total = 0.0
    cx = 0.0
    cy = 0.0
    for i, ring in enumerate(rings):
        a = abs(areas[i])
        if a == 0.0:
            continue
        sign = 1.0 if i == outer else -1.0
        sx = 0.0
        sy = 0.0
        for (x1, y1), (x2, y2) in zip(ring, ring[1:]):
            cross = x1 * y2 - x2 * y1
            sx += (x1 + x2) * cross
            sy += (y1 + y2) * cross
        # shoelace cross terms carry the ring's own winding; fold it into a
        ring_sign = 1.0 if areas[i] > 0 else -1.0
        total += sign * a
        cx += sign * ring_sign * sx / 6.0
        cy += sign * ring_sign * sy / 6.0
    if total == 0.0:
        return None
    return cx / total, cy / total


def polygon_bbox(rings: Polygon) -> tuple[float, float, float, float]:
    """(lon_min, lat_min, lon_max, lat_max) over all rings."""
    xs = [x for ring in rings for x, _ in ring]
    ys = [y for ring in rings for _, y in ring]
    return min(xs), min(ys), max(xs), max(ys)


def segments_intersect(p1, p2, p3, p4) -> bool:
    """True if segments p1-p2 and p3-p4 properly intersect or overlap."""

    def orient(a, b, c):
        v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        if v > 0:
            return 1
        if v < 0:
            return -1
        return 0

    def on_segment(a, b, c):
        return (min(a[0], b[0]) <= c[0] <= max(a[0], b[0])
                and min(a[1], b[1]) <= c[1] <= max(a[1], b[1]))

    o1, o2 = orient(p1, p2, p3), orient(p1, p2, p4)
    o3, o4 = orient(p3, p4, p1), orient(p3, p4, p2)
    if o1 != o2 and o3 != o4:
        return True
    if o1 == 0 and on_segment(p1, p2, p3):
        return True
    if o2 == 0 and on_segment(p1, p2, p4):
        return True
    if o3 == 0 and on_segment(p3, p4, p1):
        return True
    if o4 == 0 and on_segment(p3, p4, p2):
        return True
    return False


def ring_self_intersects(ring: Ring) -> bool:
    """Naive O(n^2) check for non-adjacent edge crossings."""
    n = len(ring) - 1
    if n < 4:
        return False
    edges = [(ring[i], ring[i + 1]) for i in range(n)]
    for i in range(n):
        for j in range(i + 2, n):
            if i == 0 and j == n - 1:
                continue  # first and last edges share a vertex
            if segments_intersect(*edges[i], *edges[j]):
                return True
    return False
