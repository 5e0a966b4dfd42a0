"""Poincare-ball geometry of hyperbolic space (curvature -1).

Points are stored as Poincare-ball coordinates.  Radii passed through the
public functions are hyperbolic lengths; the Euclidean radius of a centred
sphere is an internal detail (``euclidean_radius``).

Besides the Poincare model the module carries two coordinate systems used
internally by the tessellation code:

* hyperboloid coordinates ``(h0, h1, ..., hd)`` with ``h0^2 - |h|^2 = 1``,
  where ``cosh d(x, y) = x0*y0 - <x, y>``;
* Klein coordinates ``h / h0``, in which geodesics are straight chords and
  hyperbolic bisectors are straight lines.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate

#: points at or beyond this Euclidean norm are rejected
MAX_NORM = 1.0 - 1e-12


class GeometryError(ValueError):
    """Invalid geometric input (out of the ball, negative radius, ...)."""


class DegeneracyError(GeometryError):
    """Collinear or otherwise degenerate configuration."""


@dataclass(frozen=True)
class HPoint:
    """A point of H^d in Poincare-ball coordinates."""

    coords: tuple

    def __init__(self, *coords):
        if len(coords) == 1 and np.ndim(coords[0]) == 1:
            coords = tuple(coords[0])
        c = tuple(float(v) for v in coords)
        if len(c) < 2:
            raise GeometryError("HPoint needs dimension d >= 2")
        if math.sqrt(math.fsum(v * v for v in c)) >= MAX_NORM:
            raise GeometryError(f"point {c} is not inside the open unit ball")
        object.__setattr__(self, "coords", c)

    @classmethod
    def origin(cls, d=2):
        return cls((0.0,) * d)

    @classmethod
    def polar(cls, radius, angle):
        """Point of H^2 at hyperbolic distance ``radius`` from 0 and polar ``angle``."""
        rho = euclidean_radius(radius)
        return cls(rho * math.cos(angle), rho * math.sin(angle))

    @property
    def dim(self):
        return len(self.coords)

    @property
    def array(self):
        return np.asarray(self.coords, dtype=float)

    @property
    def norm(self):
        return math.sqrt(math.fsum(v * v for v in self.coords))


@dataclass(frozen=True)
class Annulus:
    """Half-open annulus ``inner <= d(0, y) < outer`` centred at the origin."""

    inner: float
    outer: float

    def __post_init__(self):
        if not (0.0 <= self.inner < self.outer):
            raise GeometryError(f"need 0 <= inner < outer, got {self.inner}, {self.outer}")


@dataclass(frozen=True)
class BallSpec:
    center: HPoint
    radius: float

    def __post_init__(self):
        if not (0.0 <= self.radius < math.inf):
            raise GeometryError(f"ball radius must be finite and >= 0, got {self.radius}")

    def contains(self, y):
        return hyp_distance(self.center, y) < self.radius


def _coords(x):
    if isinstance(x, HPoint):
        return x.array
    return np.asarray(x, dtype=float)


def hyp_distance(x, y):
    """Hyperbolic distance between two points of the Poincare ball."""
    a, b = _coords(x), _coords(y)
    if a.shape != b.shape:
        raise GeometryError(f"dimension mismatch: {a.shape} vs {b.shape}")
    diff = float(np.sqrt(np.sum((a - b) ** 2)))
    den = math.sqrt((1.0 - float(a @ a)) * (1.0 - float(b @ b)))
    return 2.0 * math.asinh(diff / den)


def hyp_distance_many(points, y):
    """Vectorised ``hyp_distance`` from each row of ``points`` to ``y``."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    q = _coords(y)
    diff = np.sqrt(np.sum((pts - q) ** 2, axis=1))
    den = np.sqrt((1.0 - np.sum(pts * pts, axis=1)) * (1.0 - float(q @ q)))
    return 2.0 * np.arcsinh(diff / den)


def euclidean_radius(r):
    """Euclidean radius of the centred hyperbolic sphere of radius ``r``."""
    if np.any(np.asarray(r) < 0):
        raise GeometryError("hyperbolic radius must be >= 0")
    return np.tanh(np.asarray(r, dtype=float) / 2.0) if np.ndim(r) else math.tanh(r / 2.0)


def hyperbolic_radius(rho):
    """Inverse of ``euclidean_radius``."""
    arr = np.asarray(rho, dtype=float)
    if np.any(arr < 0) or np.any(arr >= 1.0):
        raise GeometryError("Euclidean radius must lie in [0, 1)")
    return 2.0 * np.arctanh(arr) if np.ndim(rho) else 2.0 * math.atanh(rho)


def unit_sphere_area(d):
    """Surface measure of the unit sphere S^{d-1} in R^d."""
    return 2.0 * math.pi ** (d / 2.0) / math.gamma(d / 2.0)


def hyp_ball_volume(r, d=2):
    """Hyperbolic volume of a ball of radius ``r`` in H^d."""
    if r < 0:
        raise GeometryError("radius must be >= 0")
    if d < 2:
        raise GeometryError("dimension must be >= 2")
    if d == 2:
        return 4.0 * math.pi * math.sinh(r / 2.0) ** 2
    val, _ = integrate.quad(lambda t: math.sinh(t) ** (d - 1), 0.0, r,
                            epsrel=1e-10, epsabs=0.0, limit=200)
    return unit_sphere_area(d) * val


def radial_volume(t, d=2):
    """Vectorised ball volume by the closed-form ``sinh`` power recurrence.

    Used where many volumes are needed at once (radial CDF inversion);
    ``hyp_ball_volume`` remains the reference.
    """
    t = np.asarray(t, dtype=float)
    return unit_sphere_area(d) * _sinh_power_integral(t, d - 1)


def _sinh_power_integral(t, m):
    # int_0^t sinh^m, via I_m = sinh^{m-1} cosh / m - (m-1)/m I_{m-2}
    if m == 0:
        return t
    if m == 1:
        return np.cosh(t) - 1.0
    if m == 2:
        return 0.25 * np.sinh(2.0 * t) - 0.5 * t
    s = np.sinh(t)
    return s ** (m - 1) * np.cosh(t) / m - (m - 1) / m * _sinh_power_integral(t, m - 2)


def in_annulus(y, a):
    return a.inner <= hyp_distance(np.zeros(len(_coords(y))), y) < a.outer


def hyp_circumcenter_d2(a, b, c, tol=1e-12):
    """Hyperbolic circumcenter of three points of the Poincare disk.

    Hyperbolic circles are Euclidean circles, so the Euclidean circumcircle is
    computed and, if it lies inside the unit disk, its hyperbolic centre is
    returned.  ``None`` means the three points have no hyperbolic
    circumcircle (the circle meets or leaves the ideal boundary).
    """
    pa, pb, pc = (_coords(v) for v in (a, b, c))
    ec = euclidean_circumcircle(pa, pb, pc, tol=tol)
    center, radius = ec
    dist = float(np.hypot(*center))
    if dist + radius >= 1.0 - 1e-15:
        return None
    return HPoint(*poincare_disk_center(center, radius))


def euclidean_circumcircle(pa, pb, pc, tol=1e-12):
    ax, ay = pa
    bx, by = pb
    cx, cy = pc
    den = 2.0 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by))
    scale = max(abs(bx - ax), abs(by - ay), abs(cx - ax), abs(cy - ay), 1e-300) ** 2
    if abs(den) <= tol * scale:
        raise DegeneracyError("collinear triple has no circumcircle")
    a2, b2, c2 = ax * ax + ay * ay, bx * bx + by * by, cx * cx + cy * cy
    ux = (a2 * (by - cy) + b2 * (cy - ay) + c2 * (ay - by)) / den
    uy = (a2 * (cx - bx) + b2 * (ax - cx) + c2 * (bx - ax)) / den
    return np.array([ux, uy]), float(math.hypot(ax - ux, ay - uy))


def poincare_disk_center(center, radius):
    """Hyperbolic centre of a Euclidean circle lying inside the unit disk."""
    center = np.asarray(center, dtype=float)
    dist = float(np.linalg.norm(center))
    if dist == 0.0:
        return np.zeros_like(center)
    # the diameter through 0 meets the circle at signed radii dist -/+ radius
    s_far = hyperbolic_radius(dist + radius)
    s_near = 2.0 * math.atanh(dist - radius)
    s_mid = 0.5 * (s_far + s_near)
    return center / dist * math.tanh(s_mid / 2.0)


def hyperbolic_circle_to_euclidean(center, radius):
    """Euclidean (centre, radius) of the hyperbolic circle ``S_p(center, radius)``."""
    c = _coords(center)
    dist = float(np.linalg.norm(c))
    s = hyperbolic_radius(dist) if dist > 0 else 0.0
    t_far = math.tanh((s + radius) / 2.0)
    t_near = math.tanh((s - radius) / 2.0)
    direction = c / dist if dist > 0 else np.eye(len(c))[0]
    return direction * (0.5 * (t_far + t_near)), 0.5 * (t_far - t_near)


# --- coordinate systems -----------------------------------------------------

def poincare_to_hyperboloid(u):
    u = np.asarray(u, dtype=float)
    n2 = np.sum(u * u, axis=-1, keepdims=True)
    den = 1.0 - n2
    return np.concatenate([(1.0 + n2) / den, 2.0 * u / den], axis=-1)


def hyperboloid_to_poincare(h):
    h = np.asarray(h, dtype=float)
    return h[..., 1:] / (1.0 + h[..., :1])


def klein_to_hyperboloid(k):
    k = np.asarray(k, dtype=float)
    h0 = 1.0 / np.sqrt(1.0 - np.sum(k * k, axis=-1, keepdims=True))
    return np.concatenate([h0, h0 * k], axis=-1)


def klein_to_poincare(k):
    k = np.asarray(k, dtype=float)
    n2 = np.sum(k * k, axis=-1, keepdims=True)
    return k / (1.0 + np.sqrt(1.0 - n2))


def poincare_to_klein(u):
    u = np.asarray(u, dtype=float)
    n2 = np.sum(u * u, axis=-1, keepdims=True)
    return 2.0 * u / (1.0 + n2)


def cosh_distance(x, y):
    """``cosh d`` between hyperboloid points (broadcasting over leading axes)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return x[..., 0] * y[..., 0] - np.sum(x[..., 1:] * y[..., 1:], axis=-1)


def acosh_clamped(c):
    return np.arccosh(np.maximum(c, 1.0))


def klein_norm_to_distance(knorm):
    """Hyperbolic distance from 0 of a Klein point with Euclidean norm ``knorm``."""
    return np.arctanh(np.minimum(knorm, 1.0))


@lru_cache(maxsize=4096)
def _boost_matrix(h):
    h0, hs = h[0], np.asarray(h[1:])
    dim = len(hs)
    m = np.eye(dim + 1)
    m[0, 0] = h0
    m[0, 1:] = -hs
    m[1:, 0] = -hs
    m[1:, 1:] += np.outer(hs, hs) / (1.0 + h0)
    return m


def boost_to_origin(h):
    """Lorentz matrix of the isometry sending hyperboloid point ``h`` to the origin."""
    return _boost_matrix(tuple(float(v) for v in np.asarray(h)))


def mobius_add(x, y):
    """Gyrovector addition ``x (+) y``: the isometry taking 0 to ``x`` applied to ``y``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xy = np.sum(x * y, axis=-1, keepdims=True)
    x2 = np.sum(x * x, axis=-1, keepdims=True)
    y2 = np.sum(y * y, axis=-1, keepdims=True)
    num = (1.0 + 2.0 * xy + y2) * x + (1.0 - x2) * y
    return num / (1.0 + 2.0 * xy + x2 * y2)


def polar_box(center_poincare, radius):
    """Polar bounding box of the hyperbolic disk ``B_p(center, radius)`` (d=2).

    Returns ``(rmin, rmax, angle, halfwidth)`` with hyperbolic radial bounds;
    ``halfwidth`` is ``pi`` when the disk surrounds the origin.  The angular
    extent is exact for a Euclidean disk.
    """
    c = np.asarray(center_poincare, dtype=float)
    dist = float(math.hypot(c[0], c[1]))
    s = 2.0 * math.atanh(dist) if dist > 0 else 0.0
    rmin = max(0.0, s - radius)
    rmax = s + radius
    if radius >= s:
        return rmin, rmax, 0.0, math.pi
    ec, er = hyperbolic_circle_to_euclidean(c, radius)
    en = float(np.linalg.norm(ec))
    half = math.asin(min(1.0, er / en))
    return rmin, rmax, math.atan2(c[1], c[0]), half


__all__ = [
    "HPoint", "Annulus", "BallSpec", "GeometryError", "DegeneracyError",
    "hyp_distance", "hyp_distance_many", "euclidean_radius", "hyperbolic_radius",
    "hyp_ball_volume", "radial_volume", "in_annulus", "hyp_circumcenter_d2",
    "euclidean_circumcircle", "poincare_disk_center", "hyperbolic_circle_to_euclidean",
    "poincare_to_hyperboloid", "hyperboloid_to_poincare", "klein_to_hyperboloid",
    "klein_to_poincare", "poincare_to_klein", "cosh_distance", "boost_to_origin",
    "mobius_add", "polar_box", "unit_sphere_area",
]
