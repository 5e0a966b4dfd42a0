"""Annulus-sector grid of the hyperbolic plane.

The plane is cut into annuli ``[2k eps, 2(k+1) eps)`` around the origin and
annulus ``k >= 1`` into ``N_k = floor(sinh((2k+1) eps) / sinh eps) + 1``
congruent sectors; annulus 0 is the single disk ``B_p(0, 2 eps)``.  Every
sector has hyperbolic area at most ``4 pi sinh(eps)^2``.

Sector ids are ``(k, l)`` with ``0 <= l < N_k``; sector ``(k, l)`` spans the
polar angles ``[2 pi l / N_k, 2 pi (l+1) / N_k)``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import lru_cache

import mpmath
import numpy as np

from ._kernels import polygon_meets_wedge_annulus, sectors_in_disk
from .geometry import GeometryError, HPoint, hyperbolic_circle_to_euclidean

TWO_PI = 2.0 * math.pi
_SNAP = 1e-12


class SectorRangeError(GeometryError):
    """Point or sector outside the covered ball."""


@lru_cache(maxsize=None)
def _sector_count(eps, k):
    if k == 0:
        return 1
    a, b = (2 * k + 1) * eps, eps
    if a < 600.0:
        ratio = math.sinh(a) / math.sinh(b)
        if ratio < 2.0 ** 50 and abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio):
            return int(math.floor(ratio)) + 1
    # exact floor needs more digits than a double carries
    digits = int(a / math.log(10)) + 30
    with mpmath.workdps(digits):
        e = mpmath.mpf(eps)
        ratio = mpmath.sinh((2 * k + 1) * e) / mpmath.sinh(e)
        return int(mpmath.floor(ratio)) + 1


@lru_cache(maxsize=None)
def _sector_area(eps, k):
    n = _sector_count(eps, k)
    if k == 0:
        return 4.0 * math.pi * math.sinh(eps) ** 2
    a = (2 * k + 1) * eps
    if a < 600.0:
        return 4.0 * math.pi * math.sinh(a) * math.sinh(eps) / n
    digits = int(a / math.log(10)) + 30
    with mpmath.workdps(digits):
        e = mpmath.mpf(eps)
        val = 4 * mpmath.pi * mpmath.sinh((2 * k + 1) * e) * mpmath.sinh(e) / n
        return float(val)


def _counts_array(eps, k_hi):
    cached = _COUNTS.get(eps)
    if cached is None or len(cached) <= k_hi:
        size = k_hi + 1
        cached = np.array([_sector_count(eps, k) for k in range(size)], dtype=np.int64)
        _COUNTS[eps] = cached
    return cached


_COUNTS = {}


@dataclass(frozen=True)
class SectorIndex:
    """The sector grid ``K_eps`` up to a covered hyperbolic radius.

    ``max_radius`` may be ``inf`` for an unbounded (lazily evaluated) grid.
    """

    epsilon: float
    max_radius: float = math.inf

    def __post_init__(self):
        if not self.epsilon > 0:
            raise GeometryError("epsilon must be > 0")

    # -- structure ----------------------------------------------------------

    @property
    def n_annuli(self):
        if math.isinf(self.max_radius):
            return math.inf
        return int(math.ceil(self.max_radius / (2.0 * self.epsilon) - _SNAP))

    @property
    def covered_radius(self):
        return 2.0 * self.epsilon * self.n_annuli

    def count(self, k):
        """Number of sectors ``N_k`` in annulus ``k``."""
        return _sector_count(self.epsilon, int(k))

    def counts(self):
        return [self.count(k) for k in range(self.n_annuli)]

    def annulus_bounds(self, k):
        return 2.0 * k * self.epsilon, 2.0 * (k + 1) * self.epsilon

    def angles(self, sid):
        k, l = sid
        w = TWO_PI / self.count(k)
        return l * w, (l + 1) * w

    def sectors(self):
        for k in range(self.n_annuli):
            for l in range(self.count(k)):
                yield (k, l)

    def annulus_sectors(self, k):
        return [(k, l) for l in range(self.count(k))]

    def representative(self, sid):
        k, l = sid
        if k == 0:
            return HPoint.origin()
        return HPoint.polar(2.0 * k * self.epsilon, self.angles(sid)[0])

    def validate(self, sid):
        k, l = sid
        if k < 0 or k >= self.n_annuli or not 0 <= l < self.count(k):
            raise SectorRangeError(f"sector {sid} not in index")

    # -- measures -------------------------------------------------------------

    def sector_area(self, sid):
        self.validate(sid)
        return _sector_area(self.epsilon, sid[0])

    def annulus_area(self, k):
        a, b = self.annulus_bounds(k)
        return 4.0 * math.pi * (math.sinh(b / 2.0) ** 2 - math.sinh(a / 2.0) ** 2)

    # -- queries ------------------------------------------------------------

    def locate(self, y):
        """Sector id containing the point ``y`` (Poincare coordinates)."""
        c = y.array if isinstance(y, HPoint) else np.asarray(y, dtype=float)
        rho = float(math.hypot(c[0], c[1]))
        r = 2.0 * math.atanh(rho)
        k = _snap_floor(r / (2.0 * self.epsilon))
        if k >= self.n_annuli:
            raise SectorRangeError(f"radius {r} outside covered radius {self.covered_radius}")
        if k == 0:
            return (0, 0)
        n = self.count(k)
        theta = math.atan2(c[1], c[0]) % TWO_PI
        l = _snap_floor(theta / (TWO_PI / n)) % n
        return (k, l)

    def intersects_sphere(self, sid, rho, closed=False):
        """Whether the centred sphere of hyperbolic radius ``rho`` meets the sector."""
        a, b = self.annulus_bounds(sid[0])
        if closed:
            return a <= rho <= b
        return a <= rho < b

    def sectors_on_sphere(self, rho, closed=False):
        k = _snap_floor(rho / (2.0 * self.epsilon))
        ks = [k]
        if closed and k > 0 and abs(rho - 2.0 * k * self.epsilon) <= _SNAP * max(1.0, rho):
            ks = [k - 1, k]
        out = []
        for kk in ks:
            if kk < self.n_annuli:
                out.extend(self.annulus_sectors(kk))
        return out

    def sectors_meeting_disk(self, center, radius, pad=1e-12):
        """Sector ids whose closure meets the closed hyperbolic disk ``B_p(center, radius)``.

        ``center`` is in Poincare coordinates.  Candidates come from the polar
        bounding box of the disk and are then tested exactly against the
        Euclidean image of the disk.
        """
        center = np.asarray(center, dtype=float)
        dist = float(math.hypot(center[0], center[1]))
        s = 2.0 * math.atanh(dist) if dist > 0 else 0.0
        two_e = 2.0 * self.epsilon
        k_lo = max(int(math.floor(max(0.0, s - radius) / two_e * (1 - 1e-12))), 0)
        k_hi = int(math.floor((s + radius) / two_e * (1 + 1e-12) + 1e-12))
        if not math.isinf(self.max_radius):
            k_hi = min(k_hi, self.n_annuli - 1)
        if k_hi < k_lo:
            return []
        ec, er = hyperbolic_circle_to_euclidean(center, radius)
        ks, ls = sectors_in_disk(float(ec[0]), float(ec[1]), er + pad, k_lo, k_hi,
                                 self._counts_upto(k_hi), self.epsilon)
        # ranges wrapping around the circle can repeat a sector
        return list(dict.fromkeys(zip(ks.tolist(), ls.tolist())))

    def _counts_upto(self, k_hi):
        return _counts_array(self.epsilon, k_hi)

    def sector_meets_klein_polygon(self, sid, verts):
        """Whether a convex Klein-model polygon meets the closed sector ``sid``."""
        k = sid[0]
        poly = np.ascontiguousarray(verts, dtype=float)
        t1, t2 = self.angles(sid) if k > 0 else (0.0, 0.0)
        return bool(polygon_meets_wedge_annulus(
            poly[:, 0].copy(), poly[:, 1].copy(), t1, t2,
            math.tanh(2.0 * k * self.epsilon), math.tanh(2.0 * (k + 1) * self.epsilon), k > 0))

    def summary_rows(self, k_max=None):
        k_max = self.n_annuli if k_max is None else k_max
        return [(k, self.count(k), _sector_area(self.epsilon, k)) for k in range(k_max)]

    def write_summary_csv(self, path, k_max=None):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["k", "N_k", "sector_area"])
            for k, n, a in self.summary_rows(k_max):
                w.writerow([k, n, f"{a:.17g}"])


def build_sector_index(epsilon, max_radius):
    if max_radius < 2.0 * epsilon:
        raise GeometryError("max_radius must be at least 2*epsilon")
    return SectorIndex(float(epsilon), float(max_radius))


def locate_sector(index, y):
    return index.locate(y)


def sector_area(index, sid):
    return index.sector_area(sid)


def sector_intersects_sphere(index, sid, rho, closed=False):
    index.validate(sid)
    return index.intersects_sphere(sid, rho, closed=closed)


def _snap_floor(x):
    f = math.floor(x)
    if x - f > 1.0 - _SNAP * max(1.0, abs(x)):
        f += 1
    return int(f)


def _polygon_min_norm(poly):
    """Smallest Euclidean norm over a convex polygon (0 if it contains 0)."""
    n = len(poly)
    if n == 1:
        return float(np.hypot(*poly[0]))
    q = np.roll(poly, -1, axis=0)
    cross = poly[:, 0] * q[:, 1] - poly[:, 1] * q[:, 0]
    if n >= 3 and (np.all(cross >= 0) or np.all(cross <= 0)):
        return 0.0
    e = q - poly
    ee = np.sum(e * e, axis=1)
    t = np.where(ee > 0, np.clip(-np.sum(poly * e, axis=1) / np.where(ee > 0, ee, 1), 0, 1), 0)
    proj = poly + t[:, None] * e
    return float(np.min(np.hypot(proj[:, 0], proj[:, 1])))
