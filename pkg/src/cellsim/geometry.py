"""Planar geometry helpers shared by the scenario, mobility and channel code.

Exact polygon predicates are delegated to shapely; the obstruction raster
is a coarse max-height grid used for bulk line-of-sight queries where
exact segment/polygon intersection would be too slow.
"""

import math

import numpy as np
import shapely
import shapely.ops
from shapely.geometry import LineString, Point, Polygon


def polygon_is_simple(coords):
    """True if the ring given by coords is a valid simple polygon."""
    if len(coords) < 3:
        return False
    poly = Polygon(coords)
    return poly.is_valid and poly.area > 0


def polygon_contains(outer_coords, inner_coords):
    """True if the inner polygon lies within the outer one."""
    return Polygon(outer_coords).contains(Polygon(inner_coords))


def point_in_polygon(coords, xy):
    return Polygon(coords).intersects(Point(xy))


def nearest_polygon_point(coords, xy):
    """Closest point of the (filled) polygon to xy; xy itself if inside."""
    poly = Polygon(coords)
    pt = Point(xy)
    if poly.intersects(pt):
        return np.asarray(xy, dtype=float)
    q = shapely.ops.nearest_points(poly, pt)[0]
    return np.array([q.x, q.y])


def distance_to_polygon(coords, xy):
    return Polygon(coords).distance(Point(xy))


def project_into_polygon(coords, xy, margin=1e-3):
    """Return xy if inside the polygon, else the nearest interior point.

    The returned point is nudged off the boundary by ``margin`` toward the
    centroid so iterated projections stay strictly inside.
    """
    poly = Polygon(coords)
    pt = Point(xy)
    if poly.contains(pt):
        return np.asarray(xy, dtype=float)
    q = shapely.ops.nearest_points(poly, pt)[0]
    q = np.array([q.x, q.y])
    c = np.array([poly.centroid.x, poly.centroid.y])
    d = c - q
    n = np.hypot(*d)
    if n > 0:
        q = q + d / n * min(margin, n)
    return q


def segment_blocked_by_buildings(tx_xy, tx_h, rx_xy, rx_h, buildings):
    """Exact 3D occlusion test of the tx->rx segment against extruded footprints.

    buildings: iterable of (footprint_coords, height). The segment is blocked
    iff its 2D trace crosses a footprint at a point where the interpolated
    segment height is below the building height.
    """
    tx = np.asarray(tx_xy, dtype=float)
    rx = np.asarray(rx_xy, dtype=float)
    seg = LineString([tx, rx])
    total = seg.length
    for coords, height in buildings:
        poly = Polygon(coords)
        inter = seg.intersection(poly)
        if inter.is_empty:
            continue
        pieces = getattr(inter, "geoms", [inter])
        for piece in pieces:
            if piece.is_empty:
                continue
            if isinstance(piece, Point):
                ss = [seg.project(piece)]
            else:
                ss = [seg.project(Point(c)) for c in piece.coords]
            for s in ss:
                frac = s / total if total > 0 else 0.0
                h_here = tx_h + (rx_h - tx_h) * frac
                if h_here < height:
                    return True
    return False


class ObstructionRaster:
    """Max building height sampled on a regular grid.

    Serves two bulk queries: "is this point inside a building" and "is the
    segment between these endpoints blocked". Resolution is a fidelity /
    speed trade-off; 4 m works well for street-scale scenarios.
    """

    def __init__(self, extent, buildings, cell_m=4.0):
        self.extent = tuple(extent)
        self.cell_m = float(cell_m)
        x0, y0, x1, y1 = self.extent
        self.nx = max(1, int(np.ceil((x1 - x0) / cell_m)))
        self.ny = max(1, int(np.ceil((y1 - y0) / cell_m)))
        self._inv_cell = 1.0 / self.cell_m
        self.height = np.zeros((self.ny, self.nx), dtype=np.float32)
        for coords, h in buildings:
            self._burn(coords, h)

    def _burn(self, coords, h):
        x0, y0, _, _ = self.extent
        poly = Polygon(coords)
        bx0, by0, bx1, by1 = poly.bounds
        i0 = max(0, int((bx0 - x0) / self.cell_m))
        i1 = min(self.nx - 1, int((bx1 - x0) / self.cell_m))
        j0 = max(0, int((by0 - y0) / self.cell_m))
        j1 = min(self.ny - 1, int((by1 - y0) / self.cell_m))
        if i1 < i0 or j1 < j0:
            return
        ii, jj = np.meshgrid(np.arange(i0, i1 + 1), np.arange(j0, j1 + 1))
        cx = x0 + (ii.ravel() + 0.5) * self.cell_m
        cy = y0 + (jj.ravel() + 0.5) * self.cell_m
        inside = shapely.contains_xy(poly, cx, cy)
        if not inside.any():
            return
        sel_j = jj.ravel()[inside]
        sel_i = ii.ravel()[inside]
        np.maximum.at(self.height, (sel_j, sel_i), np.float32(h))

    def _cell_index(self, xy):
        x0, y0, _, _ = self.extent
        i = np.clip(((xy[..., 0] - x0) / self.cell_m).astype(np.int64), 0, self.nx - 1)
        j = np.clip(((xy[..., 1] - y0) / self.cell_m).astype(np.int64), 0, self.ny - 1)
        return j, i

    def height_at(self, xy):
        """Building height at each point (0 where open ground). xy: (..., 2)."""
        j, i = self._cell_index(np.asarray(xy, dtype=float))
        return self.height[j, i]

    def indoor(self, xy):
        return self.height_at(xy) > 0.0

    def los_clear(self, a_xy, a_h, b_xy, b_h, stride_m=None):
        """Vectorized LoS test for paired endpoints.

        a_xy, b_xy: (N, 2) arrays; a_h, b_h: scalars or (N,). Endpoints'
        own cells are excluded so a user standing inside a footprint is not
        self-occluded. Returns a boolean (N,) array, True where clear.
        Pairs are processed in distance-sorted chunks so short links pay
        for few samples.
        """
        a = np.atleast_2d(np.asarray(a_xy, dtype=float))
        b = np.atleast_2d(np.asarray(b_xy, dtype=float))
        n = len(a)
        if n == 0:
            return np.ones(0, dtype=bool)
        a_h = np.broadcast_to(np.asarray(a_h, dtype=float), (n,))
        b_h = np.broadcast_to(np.asarray(b_h, dtype=float), (n,))
        stride = float(stride_m) if stride_m else 2.0 * self.cell_m
        dist = np.hypot(*(b - a).T)
        order = np.argsort(dist, kind="stable")
        clear = np.ones(n, dtype=bool)
        ja, ia = self._cell_index(a)
        jb, ib = self._cell_index(b)
        chunk = 32768
        for lo in range(0, n, chunk):
            idx = order[lo:lo + chunk]
            d_max = dist[idx[-1]]
            k = int(min(96, max(2, math.ceil(d_max / stride))))
            fr = (np.arange(1, k + 1) / (k + 1.0))
            ax, ay = a[idx, 0][:, None], a[idx, 1][:, None]
            px = ax + (b[idx, 0][:, None] - ax) * fr
            py = ay + (b[idx, 1][:, None] - ay) * fr
            seg_h = a_h[idx][:, None] + (b_h[idx] - a_h[idx])[:, None] * fr
            x0, y0, _, _ = self.extent
            ip = np.clip(((px - x0) * self._inv_cell).astype(np.int32), 0, self.nx - 1)
            jp = np.clip(((py - y0) * self._inv_cell).astype(np.int32), 0, self.ny - 1)
            hs = self.height[jp, ip]
            own = ((jp == ja[idx][:, None]) & (ip == ia[idx][:, None])) \
                | ((jp == jb[idx][:, None]) & (ip == ib[idx][:, None]))
            clear[idx] = ~((hs > seg_h) & ~own).any(axis=1)
        return clear
