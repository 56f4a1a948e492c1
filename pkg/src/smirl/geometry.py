"""Small 2-D geometry helpers: polylines, convex polygons, distances.

Polygons are (K, 2) float arrays of vertices; convexity is assumed where
noted. All distances are Euclidean, in meters.
"""
from __future__ import annotations

import math

import numpy as np

_EPS = 1e-12


def wrap_angle(a):
    """Wrap angle(s) to (-pi, pi]."""
    a = np.asarray(a, dtype=float)
    out = -((-a + np.pi) % (2.0 * np.pi) - np.pi)
    if out.ndim == 0:
        return float(out)
    return out


class Polyline:
    """Arc-length parameterized piecewise-linear curve."""

    def __init__(self, points):
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2:
            raise ValueError("polyline needs at least 2 points of shape (M, 2)")
        seg = np.diff(pts, axis=0)
        seg_len = np.hypot(seg[:, 0], seg[:, 1])
        if np.all(seg_len < _EPS):
            raise ValueError("polyline has zero arc length")
        # drop exactly duplicated consecutive points
        keep = np.concatenate([[True], seg_len >= _EPS])
        pts = pts[keep]
        seg = np.diff(pts, axis=0)
        seg_len = np.hypot(seg[:, 0], seg[:, 1])
        self.points = pts
        self.seg = seg
        self.seg_len = seg_len
        self.cum_s = np.concatenate([[0.0], np.cumsum(seg_len)])
        self.length = float(self.cum_s[-1])

    def point_at(self, s):
        """Point at arc length s (clamped to [0, length]). Accepts arrays."""
        s = np.clip(np.asarray(s, dtype=float), 0.0, self.length)
        idx = np.clip(np.searchsorted(self.cum_s, s, side="right") - 1, 0,
                      len(self.seg_len) - 1)
        t = (s - self.cum_s[idx]) / np.maximum(self.seg_len[idx], _EPS)
        p = self.points[idx] + self.seg[idx] * t[..., None]
        return p

    def tangent_at(self, s):
        """Unit tangent at arc length s."""
        s = np.clip(np.asarray(s, dtype=float), 0.0, self.length)
        idx = np.clip(np.searchsorted(self.cum_s, s, side="right") - 1, 0,
                      len(self.seg_len) - 1)
        t = self.seg[idx] / np.maximum(self.seg_len[idx], _EPS)[..., None]
        return t

    def heading_at(self, s):
        t = self.tangent_at(s)
        return np.arctan2(t[..., 1], t[..., 0])

    def normal_at(self, s):
        """Unit left normal at arc length s."""
        t = self.tangent_at(s)
        return np.stack([-t[..., 1], t[..., 0]], axis=-1)

    def project(self, p):
        """Project a point onto the polyline.

        Returns (s, lateral, dist): arc length of the closest point, signed
        lateral offset (positive = left of travel direction), and distance.
        """
        p = np.asarray(p, dtype=float)
        d0 = p[None, :] - self.points[:-1]
        t = np.einsum("ij,ij->i", d0, self.seg) / np.maximum(self.seg_len**2, _EPS)
        t = np.clip(t, 0.0, 1.0)
        closest = self.points[:-1] + self.seg * t[:, None]
        dist = np.hypot(*(p[None, :] - closest).T)
        i = int(np.argmin(dist))
        s = float(self.cum_s[i] + t[i] * self.seg_len[i])
        tang = self.seg[i] / max(self.seg_len[i], _EPS)
        rel = p - closest[i]
        lateral = float(tang[0] * rel[1] - tang[1] * rel[0])
        return s, lateral, float(dist[i])


def project_onto_polyline_arrays(x, y, point):
    """Arc length of `point`'s projection onto each row's polyline.

    x, y: (..., N) vertex coordinates. Returns (s_proj, cum_s) where s_proj
    has shape (...,) and cum_s has shape (..., N).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    px, py = float(point[0]), float(point[1])
    dx = np.diff(x, axis=-1)
    dy = np.diff(y, axis=-1)
    seg_len = np.hypot(dx, dy)
    cum = np.concatenate([np.zeros(x.shape[:-1] + (1,)), np.cumsum(seg_len, axis=-1)],
                         axis=-1)
    rx = px - x[..., :-1]
    ry = py - y[..., :-1]
    denom = np.maximum(seg_len**2, _EPS)
    t = np.clip((rx * dx + ry * dy) / denom, 0.0, 1.0)
    cx = x[..., :-1] + dx * t
    cy = y[..., :-1] + dy * t
    dist = np.hypot(px - cx, py - cy)
    i = np.argmin(dist, axis=-1)
    take = lambda arr: np.take_along_axis(arr, i[..., None], axis=-1)[..., 0]
    s_proj = take(cum[..., :-1]) + take(t) * take(seg_len)
    return s_proj, cum


# ---------------------------------------------------------------------------
# polygon helpers (convex, CCW or CW vertex order)

def polygon_contains(poly, p):
    """True if point p lies inside (or on) the convex polygon."""
    poly = np.asarray(poly, dtype=float)
    p = np.asarray(p, dtype=float)
    edges = np.roll(poly, -1, axis=0) - poly
    rel = p[None, :] - poly
    cross = edges[:, 0] * rel[:, 1] - edges[:, 1] * rel[:, 0]
    return bool(np.all(cross >= -_EPS) or np.all(cross <= _EPS))


def _point_segment_dist(p, a, b):
    ab = b - a
    denom = float(ab @ ab)
    if denom < _EPS:
        return float(np.hypot(*(p - a)))
    t = float(np.clip((p - a) @ ab / denom, 0.0, 1.0))
    c = a + t * ab
    return float(np.hypot(*(p - c)))


def point_polygon_distance(poly, p):
    """Distance from point to convex polygon (0 if inside)."""
    poly = np.asarray(poly, dtype=float)
    p = np.asarray(p, dtype=float)
    if polygon_contains(poly, p):
        return 0.0
    nxt = np.roll(poly, -1, axis=0)
    return min(_point_segment_dist(p, a, b) for a, b in zip(poly, nxt))


def closest_polygon_point(poly, p):
    """Closest boundary point of the polygon to p (p itself if inside)."""
    poly = np.asarray(poly, dtype=float)
    p = np.asarray(p, dtype=float)
    if polygon_contains(poly, p):
        return p.copy()
    best, best_d = None, np.inf
    nxt = np.roll(poly, -1, axis=0)
    for a, b in zip(poly, nxt):
        ab = b - a
        denom = float(ab @ ab)
        t = 0.0 if denom < _EPS else float(np.clip((p - a) @ ab / denom, 0.0, 1.0))
        c = a + t * ab
        d = float(np.hypot(*(p - c)))
        if d < best_d:
            best, best_d = c, d
    return best


def segments_intersect(p0, p1, q0, q1):
    """True if segments [p0,p1] and [q0,q1] intersect (incl. touching)."""
    def orient(a, b, c):
        v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        if abs(v) < _EPS:
            return 0
        return 1 if v > 0 else -1

    def on_seg(a, b, c):
        return (min(a[0], b[0]) - _EPS <= c[0] <= max(a[0], b[0]) + _EPS and
                min(a[1], b[1]) - _EPS <= c[1] <= max(a[1], b[1]) + _EPS)

    o1 = orient(p0, p1, q0)
    o2 = orient(p0, p1, q1)
    o3 = orient(q0, q1, p0)
    o4 = orient(q0, q1, p1)
    if o1 != o2 and o3 != o4:
        return True
    if o1 == 0 and on_seg(p0, p1, q0):
        return True
    if o2 == 0 and on_seg(p0, p1, q1):
        return True
    if o3 == 0 and on_seg(q0, q1, p0):
        return True
    if o4 == 0 and on_seg(q0, q1, p1):
        return True
    return False


def segment_polygon_intersects(p0, p1, poly):
    """True if segment [p0,p1] touches or crosses the convex polygon."""
    poly = np.asarray(poly, dtype=float)
    if polygon_contains(poly, p0) or polygon_contains(poly, p1):
        return True
    nxt = np.roll(poly, -1, axis=0)
    return any(segments_intersect(p0, p1, a, b) for a, b in zip(poly, nxt))


def _segment_segment_dist(p0, p1, q0, q1):
    if segments_intersect(p0, p1, q0, q1):
        return 0.0
    return min(_point_segment_dist(p0, q0, q1),
               _point_segment_dist(p1, q0, q1),
               _point_segment_dist(q0, p0, p1),
               _point_segment_dist(q1, p0, p1))


def segment_polygon_distance(p0, p1, poly):
    """Distance from segment to convex polygon (0 if intersecting)."""
    poly = np.asarray(poly, dtype=float)
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    if segment_polygon_intersects(p0, p1, poly):
        return 0.0
    nxt = np.roll(poly, -1, axis=0)
    return min(_segment_segment_dist(p0, p1, a, b) for a, b in zip(poly, nxt))


def convex_hull(points):
    """Convex hull (CCW) via Andrew's monotone chain."""
    pts = sorted({(float(p[0]), float(p[1])) for p in np.asarray(points)})
    if len(pts) <= 2:
        return np.asarray(pts, dtype=float)

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower, upper = [], []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return np.asarray(lower[:-1] + upper[:-1], dtype=float)


def disc_polygon(center, radius, n=16):
    """Regular n-gon circumscribing nothing fancy: inscribed disc approx."""
    ang = np.linspace(0.0, 2.0 * math.pi, n, endpoint=False)
    return np.stack([center[0] + radius * np.cos(ang),
                     center[1] + radius * np.sin(ang)], axis=1)


def menger_curvature(p0, p1, p2):
    """Unsigned curvature of the circle through three points."""
    a = np.hypot(p1[0] - p0[0], p1[1] - p0[1])
    b = np.hypot(p2[0] - p1[0], p2[1] - p1[1])
    c = np.hypot(p2[0] - p0[0], p2[1] - p0[1])
    denom = a * b * c
    if denom < _EPS:
        return 0.0
    area2 = abs((p1[0] - p0[0]) * (p2[1] - p0[1]) -
                (p1[1] - p0[1]) * (p2[0] - p0[0]))
    return 2.0 * area2 / denom


def menger_curvature_batch(p0, p1, p2):
    """Vectorized menger_curvature over (K, 2) point triplets."""
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    a = np.hypot(*(p1 - p0).T)
    b = np.hypot(*(p2 - p1).T)
    c = np.hypot(*(p2 - p0).T)
    denom = a * b * c
    area2 = np.abs((p1[:, 0] - p0[:, 0]) * (p2[:, 1] - p0[:, 1]) -
                   (p1[:, 1] - p0[:, 1]) * (p2[:, 0] - p0[:, 0]))
    with np.errstate(divide="ignore", invalid="ignore"):
        k = 2.0 * area2 / denom
    return np.where(denom < _EPS, 0.0, k)


def points_polygon_distance(poly, pts):
    """Vectorized distance from points (N, 2) to one convex polygon.

    Points inside the polygon get distance 0.
    """
    poly = np.asarray(poly, dtype=float)
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    a = poly                       # (K, 2)
    b = np.roll(poly, -1, axis=0)  # (K, 2)
    ab = b - a
    rel = pts[:, None, :] - a[None, :, :]                    # (N, K, 2)
    cross = ab[None, :, 0] * rel[..., 1] - ab[None, :, 1] * rel[..., 0]
    inside = np.all(cross >= -_EPS, axis=1) | np.all(cross <= _EPS, axis=1)
    denom = np.maximum(np.einsum("kj,kj->k", ab, ab), _EPS)  # (K,)
    t = np.clip(np.einsum("nkj,kj->nk", rel, ab) / denom, 0.0, 1.0)
    closest = a[None, :, :] + ab[None, :, :] * t[..., None]
    d = np.hypot(pts[:, None, 0] - closest[..., 0],
                 pts[:, None, 1] - closest[..., 1]).min(axis=1)
    return np.where(inside, 0.0, d)
