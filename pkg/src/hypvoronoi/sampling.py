"""Poisson point processes on hyperbolic space with uniform colour marks.

A nucleus is black at parameter ``p`` iff its mark is ``<= p``; realising all
``p`` from one set of marks makes the black sets nested in ``p``.

Two samplers are provided:

* ``sample_ppp`` draws a finite window ``B_p(0, R)`` in any dimension;
* ``SectorField`` draws the process of the whole hyperbolic plane lazily,
  one sector of a ``SectorIndex`` at a time, each sector from its own random
  substream.  Any finite set of sectors is therefore sampled identically no
  matter in which order it is requested.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .discretization import SectorIndex
from .geometry import (
    BallSpec,
    GeometryError,
    hyp_ball_volume,
    hyp_distance_many,
    mobius_add,
    radial_volume,
)

# purpose tags for stream paths
BASE = 0
RESAMPLE = 1
WINDOW = 2


@dataclass(frozen=True)
class RngStream:
    """A reproducible random substream addressed by ``(root_seed, path)``.

    Backed by numpy's counter-based Philox generator; the path becomes the
    ``spawn_key`` of a ``SeedSequence``, so distinct paths give independent
    streams.
    """

    root_seed: int
    path: tuple = ()

    def child(self, *keys):
        return RngStream(self.root_seed, self.path + tuple(int(k) for k in keys))

    def generator(self):
        ss = np.random.SeedSequence(self.root_seed, spawn_key=self.path)
        return np.random.Generator(np.random.Philox(ss))


def _as_stream(rng):
    if isinstance(rng, RngStream):
        return rng
    return RngStream(int(rng))


@dataclass(frozen=True)
class ColoredConfig:
    """Nuclei of a Poisson process in the window ``B_p(0, window_radius)``."""

    lam: float
    d: int
    window_radius: float
    points: np.ndarray = field(repr=False)
    marks: np.ndarray = field(repr=False)
    seed: int = 0

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1, self.d)
        mk = np.asarray(self.marks, dtype=float).reshape(-1)
        if len(pts) != len(mk):
            raise ValueError("points and marks differ in length")
        if np.any(mk < 0) or np.any(mk > 1):
            raise ValueError("marks must lie in [0, 1]")
        pts.setflags(write=False)
        mk.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "marks", mk)

    def __len__(self):
        return len(self.marks)

    def __eq__(self, other):
        if not isinstance(other, ColoredConfig):
            return NotImplemented
        return (self.lam == other.lam and self.d == other.d
                and self.window_radius == other.window_radius and self.seed == other.seed
                and np.array_equal(self.points, other.points)
                and np.array_equal(self.marks, other.marks))

    __hash__ = None

    def with_marks(self, marks):
        return ColoredConfig(self.lam, self.d, self.window_radius, self.points, marks, self.seed)

    # -- serialisation ------------------------------------------------------

    def dumps(self):
        head = json.dumps({"lambda": self.lam, "d": self.d,
                           "window_radius": self.window_radius, "seed": self.seed})
        lines = [head]
        for x, m in zip(self.points, self.marks):
            lines.append(" ".join(f"{v:.17g}" for v in (*x, m)))
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text):
        lines = text.splitlines()
        head = json.loads(lines[0])
        d = int(head["d"])
        rows = [list(map(float, ln.split())) for ln in lines[1:] if ln.strip()]
        arr = np.array(rows, dtype=float).reshape(-1, d + 1)
        return cls(float(head["lambda"]), d, float(head["window_radius"]),
                   arr[:, :d], arr[:, d], int(head["seed"]))


def expected_count(lam, window_radius, d=2):
    return lam * hyp_ball_volume(window_radius, d)


def _radii_by_bisection(u, radius, d, tol=1e-12):
    """Solve ``vol(t) = u * vol(radius)`` for each ``u`` by bisection."""
    target = u * radial_volume(radius, d)
    lo = np.zeros_like(u)
    hi = np.full_like(u, float(radius))
    while np.max(hi - lo, initial=0.0) > tol:
        mid = 0.5 * (lo + hi)
        below = radial_volume(mid, d) < target
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return 0.5 * (lo + hi)


def _uniform_ball(g, count, radius, d):
    direction = g.standard_normal((count, d))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    t = _radii_by_bisection(g.random(count), radius, d)
    return direction * np.tanh(t / 2.0)[:, None]


def sample_ppp(lam, window_radius, d, rng):
    """Poisson process of intensity ``lam`` in ``B_p(0, window_radius)`` of H^d."""
    if not lam > 0:
        raise GeometryError("intensity must be > 0")
    if not window_radius > 0:
        raise GeometryError("window radius must be > 0")
    stream = _as_stream(rng)
    g = stream.generator()
    count = g.poisson(expected_count(lam, window_radius, d))
    pts = _uniform_ball(g, count, window_radius, d)
    marks = g.random(count)
    return ColoredConfig(lam, d, window_radius, pts, marks, stream.root_seed)


def black_nuclei(config, p):
    """Indices of nuclei black at parameter ``p``."""
    return np.flatnonzero(config.marks <= p)


def resample_region(config, region, rng, index=None):
    """Replace the points of ``region`` by an independent fresh sample.

    ``region`` is a ``BallSpec`` or a sector id of ``index`` (d = 2).
    Points outside the region are kept bit for bit, in their original order,
    and the fresh points are appended.
    """
    g = _as_stream(rng).generator()
    pts = config.points
    if isinstance(region, BallSpec):
        c = region.center.array
        if hyp_distance_many(c[None], np.zeros(config.d))[0] + region.radius > config.window_radius:
            raise GeometryError("region leaves the window")
        inside = hyp_distance_many(pts, c) < region.radius if len(pts) else np.zeros(0, bool)
        count = g.poisson(config.lam * hyp_ball_volume(region.radius, config.d))
        fresh = mobius_add(c, _uniform_ball(g, count, region.radius, config.d))
        marks = g.random(count)
    else:
        if index is None or config.d != 2:
            raise GeometryError("sector regions need a SectorIndex and d = 2")
        index.validate(region)
        if index.annulus_bounds(region[0])[1] > config.window_radius * (1 + 1e-12):
            raise GeometryError("sector leaves the window")
        inside = np.array([index.locate(x) == tuple(region) for x in pts], dtype=bool)
        h, marks = sample_sector(g, config.lam, index, region)
        fresh = h[:, 1:] / (1.0 + h[:, :1])
    new_pts = np.concatenate([pts[~inside], fresh.reshape(-1, config.d)])
    new_marks = np.concatenate([config.marks[~inside], marks])
    return ColoredConfig(config.lam, config.d, config.window_radius, new_pts, new_marks, config.seed)


def sample_sector(g, lam, index, sid):
    """Poisson points of sector ``sid`` in hyperboloid coordinates, and marks.

    Draws a Poisson count, then one row of uniforms each for the radius,
    the angle and the mark.  Within an annulus ``[a, b)`` the area below
    radius ``t`` is ``2 pi (cosh t - 1)``, so ``cosh t`` is uniform on
    ``[cosh a, cosh b)``.
    """
    k, _ = sid
    count = int(g.poisson(lam * index.sector_area(sid)))
    if count == 0:
        return np.empty((0, 3)), np.empty(0)
    u = g.random((3, count))
    a, b = index.annulus_bounds(k)
    ca, cb = math.cosh(a), math.cosh(b)
    ch = ca + u[0] * (cb - ca)
    t1, t2 = index.angles(sid)
    ang = t1 + u[1] * (t2 - t1)
    sh = np.sqrt(ch * ch - 1.0)
    h = np.empty((count, 3))
    h[:, 0] = ch
    h[:, 1] = sh * np.cos(ang)
    h[:, 2] = sh * np.sin(ang)
    return h, u[2]


def default_epsilon(lam):
    """Sector scale giving a few expected points per sector."""
    # sector area <= 4 pi sinh^2 eps; aim for about 3 points
    return float(min(1.0, max(0.1, math.asinh(math.sqrt(3.0 / (4.0 * math.pi * lam))))))


class SectorField:
    """Lazily sampled coloured Poisson process on the whole hyperbolic plane.

    The points of sector ``(k, l)`` come from stream path
    ``stream.child(k, l, version)``; ``version`` is 0 unless the sector has
    been resampled (``with_resampled``).
    """

    def __init__(self, lam, epsilon, stream, versions=None):
        if not lam > 0:
            raise GeometryError("intensity must be > 0")
        self.lam = float(lam)
        self.index = SectorIndex(float(epsilon))
        self.stream = _as_stream(stream)
        self.versions = dict(versions or {})

    def sample(self, sid):
        g = self.stream.child(sid[0], sid[1], self.versions.get(sid, 0)).generator()
        return sample_sector(g, self.lam, self.index, sid)

    def with_resampled(self, sid):
        v = dict(self.versions)
        v[sid] = v.get(sid, 0) + 1
        return SectorField(self.lam, self.index.epsilon, self.stream, v)

    def window(self, radius):
        """Materialise the field in ``B_p(0, radius)`` as a ``ColoredConfig``."""
        hs, ms = [], []
        k_max = int(math.ceil(radius / (2.0 * self.index.epsilon)))
        for k in range(k_max):
            for sid in self.index.annulus_sectors(k):
                h, m = self.sample(sid)
                hs.append(h)
                ms.append(m)
        h = np.concatenate(hs) if hs else np.empty((0, 3))
        m = np.concatenate(ms) if ms else np.empty(0)
        keep = np.arccosh(np.maximum(h[:, 0], 1.0)) < radius
        h, m = h[keep], m[keep]
        pts = h[:, 1:] / (1.0 + h[:, :1])
        return ColoredConfig(self.lam, 2, float(radius), pts, m, self.stream.root_seed)


__all__ = [
    "RngStream", "ColoredConfig", "SectorField", "sample_ppp", "black_nuclei",
    "resample_region", "expected_count", "sample_sector", "default_epsilon",
]
