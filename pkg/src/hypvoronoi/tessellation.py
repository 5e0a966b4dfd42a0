"""Hyperbolic Voronoi cells and Delaunay adjacency of a finite window.

Cells are computed exactly in the Klein model, where the set of points
closer to one nucleus than to another is a half-plane.  Each cell is built
in a frame boosted so that its nucleus sits at the origin, which keeps far
away cells as well conditioned as central ones.

The window structure (``Tessellation``) follows the classical route: the
Euclidean Delaunay triangulation of the Poincare coordinates, with an edge
kept iff some empty Euclidean circle through its endpoints lies inside the
unit disk (such a circle is a hyperbolic circle).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.optimize import brentq
from scipy.spatial import Delaunay, QhullError, cKDTree

from ._kernels import clip_cell
from .discretization import _polygon_min_norm
from .geometry import (
    GeometryError,
    HPoint,
    boost_to_origin,
    cosh_distance,
    euclidean_circumcircle,
    hyp_ball_volume,
    hyp_distance_many,
    hyperbolic_circle_to_euclidean,
    poincare_disk_center,
    poincare_to_hyperboloid,
)


class EmptyConfigError(GeometryError):
    """Ownership query on a configuration without nuclei."""


class TruncationError(RuntimeError):
    """A cell needed for an answer is not determined by the sampled window."""


_DISK_POLY = np.column_stack([np.cos(np.linspace(0, 2 * np.pi, 257)[:-1]),
                              np.sin(np.linspace(0, 2 * np.pi, 257)[:-1])]) * (1 - 1e-9)


@dataclass
class Cell:
    """Voronoi cell of one nucleus.

    ``local`` is the cell polygon in Klein coordinates of the frame where the
    nucleus is the origin; ``frame`` is the Lorentz boost into that frame.
    """

    nucleus: int
    center: np.ndarray
    frame: np.ndarray
    local: np.ndarray
    neighbors: tuple
    bounded: bool
    _extra: dict = field(default_factory=dict, repr=False)

    @cached_property
    def vertices(self):
        """Global hyperboloid coordinates of the cell vertices (bounded cells)."""
        if not self.bounded:
            raise GeometryError("unbounded cell has ideal vertices")
        k = self.local
        h0 = 1.0 / np.sqrt(1.0 - np.sum(k * k, axis=1))
        loc = np.column_stack([h0, h0[:, None] * k])
        # inverse boost = transpose with spatial sign flips; solve directly
        return np.linalg.solve(self.frame, loc.T).T

    @cached_property
    def vertex_radii(self):
        """Hyperbolic distance from each vertex to the nucleus."""
        k = self.local
        return np.arctanh(np.sqrt(np.sum(k * k, axis=1)))

    def _global_klein(self, frame=None):
        if self.bounded:
            v = self.vertices
        else:
            # clip to a polygon slightly inside the disk to get finite vertices
            poly = _clip_convex(self.local, _DISK_POLY)
            h0 = 1.0 / np.sqrt(1.0 - np.sum(poly * poly, axis=1))
            v = np.linalg.solve(self.frame, np.column_stack([h0, h0[:, None] * poly]).T).T
        if frame is not None:
            v = v @ frame.T
        return v[:, 1:] / v[:, :1]

    def distance_range(self, base=None):
        """``(min, max)`` hyperbolic distance from ``base`` (hyperboloid; default 0) to the cell."""
        key = None if base is None else tuple(np.round(base, 15))
        cache = self._extra.setdefault("range", {})
        if key in cache:
            return cache[key]
        frame = None if base is None else boost_to_origin(base)
        kp = self._global_klein(frame)
        lo = float(np.arctanh(min(_polygon_min_norm(kp), 1.0)))
        if not self.bounded:
            hi = math.inf
        else:
            v = self.vertices if frame is None else self.vertices @ frame.T
            hi = float(np.max(np.arccosh(np.maximum(v[:, 0], 1.0))))
        cache[key] = (lo, hi)
        return lo, hi

    @property
    def reach(self):
        return self.distance_range()[1]

    @property
    def inner(self):
        return self.distance_range()[0]

    def klein_polygon(self):
        """Cell polygon in global Klein coordinates."""
        if "klein" not in self._extra:
            self._extra["klein"] = self._global_klein()
        return self._extra["klein"]

    def vertex_disks(self):
        """``(poincare_center, radius)`` of the empty disk around each vertex."""
        v = self.vertices
        return v[:, 1:] / (1.0 + v[:, :1]), self.vertex_radii


def _clip_convex(poly, clipper):
    """Intersection of two convex polygons (counter-clockwise)."""
    out = np.asarray(poly, dtype=float)
    m = len(clipper)
    for i in range(m):
        a, b = clipper[i], clipper[(i + 1) % m]
        nrm = np.array([b[1] - a[1], a[0] - b[0]])
        s = (out - a) @ nrm
        res = []
        n = len(out)
        for j in range(n):
            p, q = out[j], out[(j + 1) % n]
            sp, sq = s[j], s[(j + 1) % n]
            if sp <= 0:
                res.append(p)
            if (sp <= 0) != (sq <= 0):
                res.append(p + sp / (sp - sq) * (q - p))
        out = np.array(res) if res else np.empty((0, 2))
        if not len(out):
            break
    return out


def compute_cell(z_id, z_h, cand_h, cand_ids, min_edge=1e-13):
    """Exact Voronoi cell of the nucleus ``z_h`` against candidate nuclei.

    Returns ``(cell, used_cosh)`` where ``used_cosh`` is the ``cosh``
    distance up to which candidates were consumed (``inf`` if the cell is
    unbounded and all candidates were used).
    """
    frame = boost_to_origin(z_h)
    if len(cand_h):
        loc = np.asarray(cand_h) @ frame.T
        order = np.argsort(loc[:, 0], kind="stable")
        loc = np.ascontiguousarray(loc[order])
    else:
        loc = np.empty((0, 3))
        order = np.empty(0, dtype=np.int64)
    xs, ys, gens, used, bounded, cosh_r = clip_cell(loc)
    poly = np.column_stack([xs, ys])
    nb = []
    n = len(xs)
    for i in range(n):
        g = gens[i]
        if g < 0:
            continue
        j = (i + 1) % n
        if math.hypot(xs[j] - xs[i], ys[j] - ys[i]) <= min_edge:
            continue
        nid = int(np.asarray(cand_ids)[order[g]])
        if nid not in nb:
            nb.append(nid)
    cell = Cell(int(z_id), np.asarray(z_h, dtype=float), frame, poly, tuple(nb), bool(bounded))
    return cell, cosh_r


# --- window tessellation ----------------------------------------------------

@dataclass
class Tessellation:
    """Voronoi/Delaunay structure of a finite ``ColoredConfig``."""

    config: object
    adjacency: list
    voronoi_vertices: dict
    euclid_neighbors: list = field(repr=False)
    _tree: object = field(default=None, repr=False)
    _cells: dict = field(default_factory=dict, repr=False)

    @cached_property
    def hyperboloid(self):
        return poincare_to_hyperboloid(self.config.points)

    def owner_of(self, y):
        return owner_of(self, y)

    def cell(self, z):
        if z not in self._cells:
            nb = self.euclid_neighbors[z]
            self._cells[z] = compute_cell(z, self.hyperboloid[z], self.hyperboloid[nb], nb)[0]
        return self._cells[z]

    def certified(self, z):
        """Whether the cell of ``z`` cannot be changed by nuclei outside the window."""
        c = self.cell(z)
        if not c.bounded:
            return False
        v = c.vertices
        far = np.arccosh(np.maximum(v[:, 0], 1.0)) + c.vertex_radii
        return bool(np.all(far < self.config.window_radius))

    def to_json(self):
        verts = {f"{a},{b},{c}": [f"{x:.17g}" for x in v.coords]
                 for (a, b, c), v in sorted(self.voronoi_vertices.items())}
        return json.dumps({
            "nuclei": [[f"{x:.17g}" for x in p] for p in self.config.points],
            "adjacency": [list(map(int, a)) for a in self.adjacency],
            "voronoi_vertices": verts,
        }, indent=1)


def _witness_ok(pa, pb, lo, hi):
    """Whether some circle through ``pa, pb`` with centre parameter in
    ``[lo, hi]`` lies strictly inside the unit disk (vectorised over edges)."""
    m = 0.5 * (pa + pb)
    e = pb - pa
    h = 0.5 * np.hypot(e[:, 0], e[:, 1])
    nrm = np.column_stack([-e[:, 1], e[:, 0]]) / (2.0 * h)[:, None]
    lo = np.maximum(lo, -4.0)
    hi = np.minimum(hi, 4.0)

    def f(s):
        c = m + s[:, None] * nrm
        return np.hypot(c[:, 0], c[:, 1]) + np.sqrt(h * h + s * s)

    a, b = lo.copy(), hi.copy()
    gr = (math.sqrt(5.0) - 1.0) / 2.0
    for _ in range(90):
        c1 = b - gr * (b - a)
        c2 = a + gr * (b - a)
        left = f(c1) < f(c2)
        b = np.where(left, c2, b)
        a = np.where(left, a, c1)
    best = np.minimum(np.minimum(f(a), f(b)), np.minimum(f(lo), f(hi)))
    # a single admissible centre means a zero-length Voronoi edge
    return (best < 1.0) & (hi - lo > 1e-12)


def _apex_param(pa, pb, pc):
    """Centre parameter and side of the circle through ``pa, pb, pc`` along
    the bisector of ``pa pb``."""
    m = 0.5 * (pa + pb)
    e = pb - pa
    h2 = 0.25 * np.sum(e * e, axis=1)
    nrm = np.column_stack([-e[:, 1], e[:, 0]]) / np.sqrt(np.sum(e * e, axis=1))[:, None]
    cm = pc - m
    side = np.sum(cm * nrm, axis=1)
    s = (np.sum(cm * cm, axis=1) - h2) / (2.0 * side)
    return s, side


def build_delaunay_d2(config):
    """Hyperbolic Delaunay adjacency and Voronoi vertices of a 2-D config."""
    if config.d != 2:
        raise GeometryError("Delaunay adjacency is implemented for d = 2 only")
    pts = np.asarray(config.points, dtype=float)
    n = len(pts)
    if n < 1:
        raise EmptyConfigError("need at least one nucleus")
    euclid = [set() for _ in range(n)]
    cons = {}  # edge -> [lo, hi]
    triangles = []
    tri = None
    if n >= 3:
        try:
            tri = Delaunay(pts)
        except QhullError:
            tri = None
    if tri is not None:
        simp = tri.simplices
        triangles = [tuple(sorted(t)) for t in simp]
        for t in simp:
            for a in range(3):
                i, j, k = t[a], t[(a + 1) % 3], t[(a + 2) % 3]
                e = (min(i, j), max(i, j))
                euclid[i].add(j)
                euclid[j].add(i)
                cons.setdefault(e, []).append(k)
    elif n >= 2:
        # all points on a line: consecutive pairs only
        d0 = pts[-1] - pts[0]
        if np.allclose(d0, 0):
            d0 = np.array([1.0, 0.0])
        order = np.argsort(pts @ d0, kind="stable")
        for a, b in zip(order[:-1], order[1:]):
            e = (min(a, b), max(a, b))
            euclid[a].add(b)
            euclid[b].add(a)
            cons.setdefault(e, [])
    edges = sorted(cons)
    adjacency = [[] for _ in range(n)]
    if edges:
        ea = np.array(edges)
        pa, pb = pts[ea[:, 0]], pts[ea[:, 1]]
        lo = np.full(len(edges), -np.inf)
        hi = np.full(len(edges), np.inf)
        rows = np.array([i for i, e in enumerate(edges) for _ in cons[e]], dtype=np.int64)
        apex = np.array([k for e in edges for k in cons[e]], dtype=np.int64)
        if len(rows):
            with np.errstate(divide="ignore", invalid="ignore"):
                s, side = _apex_param(pa[rows], pb[rows], pts[apex])
            up = side > 0
            np.minimum.at(hi, rows[up], s[up])
            down = side < 0
            np.maximum.at(lo, rows[down], s[down])
        ok = _witness_ok(pa, pb, lo, hi)
        for (i, j), keep in zip(edges, ok):
            if keep:
                adjacency[i].append(int(j))
                adjacency[j].append(int(i))
    vverts = {}
    for t in triangles:
        center, rad = euclidean_circumcircle(*pts[list(t)])
        if float(np.hypot(*center)) + rad < 1.0:
            vverts[t] = HPoint(*poincare_disk_center(center, rad))
    return Tessellation(config, [sorted(a) for a in adjacency], vverts,
                        [np.array(sorted(s), dtype=np.int64) for s in euclid])


def owner_of(tess_or_config, y):
    """Index of the nucleus nearest to ``y``; ties go to the lowest index."""
    tess = tess_or_config
    config = getattr(tess, "config", tess)
    pts = config.points
    if len(pts) == 0:
        raise EmptyConfigError("configuration has no nuclei")
    q = y.array if isinstance(y, HPoint) else np.asarray(y, dtype=float)
    tree = getattr(tess, "_tree", None)
    if tree is None:
        tree = cKDTree(pts)
        if isinstance(tess, Tessellation):
            tess._tree = tree
    k = min(8, len(pts))
    _, idx = tree.query(q, k=k)
    idx = np.atleast_1d(idx)
    r_best = float(np.min(hyp_distance_many(pts[idx], q)))
    # every nucleus at hyperbolic distance <= r_best lies in this Euclidean ball
    ec, er = hyperbolic_circle_to_euclidean(q, r_best)
    cand = np.array(sorted(tree.query_ball_point(ec, er * (1 + 1e-9) + 1e-15)), dtype=np.int64)
    cand = np.union1d(cand, idx)
    dist = hyp_distance_many(pts[cand], q)
    return int(cand[int(np.argmin(dist))])


def cell_reaches_distance(tess, z, n):
    """Whether the closed cell of ``z`` contains a point at distance ``>= n`` from 0."""
    c = tess.cell(z)
    if not c.bounded:
        return True
    return c.reach >= n


def compute_Dn(tess, n):
    """Nuclei whose closed cell meets the closed ball ``B_p(0, n)``."""
    out = {owner_of(tess, np.zeros(2))}
    for z in range(len(tess.config)):
        if tess.cell(z).inner <= n:
            out.add(z)
    return out


def truncation_radius(lam, n, d=2, tol_fail=1e-6):
    """Window radius ``4 t*`` after which boundary effects are ``<= tol_fail`` likely.

    ``t*`` is the larger of ``n`` and the smallest ``t`` with
    ``exp(-lam vol(B(0, t))) <= tol_fail``.
    """
    if not 0 < tol_fail < 1:
        raise ValueError("tol_fail must lie in (0, 1)")
    need = math.log(1.0 / tol_fail) / lam
    if d == 2:
        t_min = 2.0 * math.asinh(math.sqrt(need / (4.0 * math.pi)))
    else:
        hi = 1.0
        while hyp_ball_volume(hi, d) < need:
            hi *= 2.0
        t_min = brentq(lambda t: hyp_ball_volume(t, d) - need, 0.0, hi, xtol=1e-13)
    return 4.0 * max(float(n), t_min)


def origin_h():
    return np.array([1.0, 0.0, 0.0])


__all__ = [
    "Cell", "Tessellation", "TruncationError", "EmptyConfigError", "compute_cell",
    "build_delaunay_d2", "owner_of", "cell_reaches_distance", "compute_Dn",
    "truncation_radius", "cosh_distance",
]
