"""Compiled inner loops."""
import numpy as np
from numba import njit


@njit(cache=True)
def clip_cell(cand):
    """Voronoi cell of the hyperboloid origin ``(1, 0, 0)`` among ``cand``.

    ``cand`` holds hyperboloid coordinates of the other nuclei, sorted by
    increasing ``cand[:, 0]`` (``cosh`` of the distance to the origin).  In
    Klein coordinates the set of points closer to the origin than to ``w`` is
    the half-plane ``w1*x + w2*y <= w0 - 1``.  The unit disk is enclosed in
    the square ``[-1, 1]^2``; a surviving vertex outside the disk means the
    cell is unbounded with respect to ``cand``.

    Candidates are consumed until the next one is farther than twice the
    current circumradius of the cell, beyond which no point can cut it.

    Returns ``(xs, ys, gens, used, bounded, cosh_rmax)``; ``gens[i]`` is the
    candidate row generating the edge from vertex ``i`` to ``i + 1`` (-1 for
    the bounding square).
    """
    m = cand.shape[0]
    cap = m + 8
    xs = np.empty(cap)
    ys = np.empty(cap)
    gs = np.empty(cap, dtype=np.int64)
    nx = np.empty(cap)
    ny = np.empty(cap)
    ng = np.empty(cap, dtype=np.int64)
    xs[0], ys[0] = -1.0, -1.0
    xs[1], ys[1] = 1.0, -1.0
    xs[2], ys[2] = 1.0, 1.0
    xs[3], ys[3] = -1.0, 1.0
    for i in range(4):
        gs[i] = -1
    n = 4
    used = 0
    bounded = False
    cosh_r = np.inf
    for j in range(m):
        if bounded and cand[j, 0] > 2.0 * cosh_r * cosh_r - 1.0:
            break
        a1 = cand[j, 1]
        a2 = cand[j, 2]
        b = cand[j, 0] - 1.0
        k = 0
        for i in range(n):
            i2 = i + 1 if i + 1 < n else 0
            sp = a1 * xs[i] + a2 * ys[i] - b
            sq = a1 * xs[i2] + a2 * ys[i2] - b
            if sp <= 0.0:
                nx[k] = xs[i]
                ny[k] = ys[i]
                ng[k] = gs[i]
                k += 1
                if sq > 0.0:
                    t = sp / (sp - sq)
                    nx[k] = xs[i] + t * (xs[i2] - xs[i])
                    ny[k] = ys[i] + t * (ys[i2] - ys[i])
                    ng[k] = j
                    k += 1
            elif sq <= 0.0:
                t = sp / (sp - sq)
                nx[k] = xs[i] + t * (xs[i2] - xs[i])
                ny[k] = ys[i] + t * (ys[i2] - ys[i])
                ng[k] = gs[i]
                k += 1
        n = k
        for i in range(n):
            xs[i] = nx[i]
            ys[i] = ny[i]
            gs[i] = ng[i]
        used = j + 1
        bounded = True
        cmax = 1.0
        for i in range(n):
            r2 = xs[i] * xs[i] + ys[i] * ys[i]
            if r2 >= 1.0:
                bounded = False
                break
            c = 1.0 / np.sqrt(1.0 - r2)
            if c > cmax:
                cmax = c
        cosh_r = cmax if bounded else np.inf
    return xs[:n].copy(), ys[:n].copy(), gs[:n].copy(), used, bounded, cosh_r


@njit(cache=True)
def _clip(xs, ys, a1, a2, pad):
    n = xs.shape[0]
    ox = np.empty(n + 2)
    oy = np.empty(n + 2)
    k = 0
    for i in range(n):
        i2 = i + 1 if i + 1 < n else 0
        sp = a1 * xs[i] + a2 * ys[i] - pad
        sq = a1 * xs[i2] + a2 * ys[i2] - pad
        if sp <= 0.0:
            ox[k] = xs[i]
            oy[k] = ys[i]
            k += 1
        if (sp <= 0.0) != (sq <= 0.0):
            t = sp / (sp - sq)
            ox[k] = xs[i] + t * (xs[i2] - xs[i])
            oy[k] = ys[i] + t * (ys[i2] - ys[i])
            k += 1
    return ox[:k], oy[:k]


@njit(cache=True)
def polygon_meets_wedge_annulus(xs, ys, t1, t2, kap_lo, kap_hi, wedge):
    """Whether a convex polygon meets ``{kap_lo <= |x| <= kap_hi}`` within the
    closed angular wedge ``[t1, t2]`` (the whole plane if not ``wedge``)."""
    if wedge:
        xs, ys = _clip(xs, ys, np.sin(t1), -np.cos(t1), 1e-13)
        if xs.shape[0] == 0:
            return False
        xs, ys = _clip(xs, ys, -np.sin(t2), np.cos(t2), 1e-13)
        if xs.shape[0] == 0:
            return False
    n = xs.shape[0]
    nmax = 0.0
    for i in range(n):
        r = np.sqrt(xs[i] * xs[i] + ys[i] * ys[i])
        if r > nmax:
            nmax = r
    if nmax < kap_lo * (1 - 1e-12):
        return False
    # smallest norm: 0 if the polygon contains the origin
    if n >= 3:
        pos = True
        neg = True
        for i in range(n):
            i2 = i + 1 if i + 1 < n else 0
            c = xs[i] * ys[i2] - ys[i] * xs[i2]
            if c < 0:
                pos = False
            if c > 0:
                neg = False
        if pos or neg:
            return True
    nmin = np.inf
    for i in range(n):
        i2 = i + 1 if i + 1 < n else 0
        ex = xs[i2] - xs[i]
        ey = ys[i2] - ys[i]
        ee = ex * ex + ey * ey
        t = 0.0
        if ee > 0:
            t = -(xs[i] * ex + ys[i] * ey) / ee
            t = min(max(t, 0.0), 1.0)
        px = xs[i] + t * ex
        py = ys[i] + t * ey
        r = np.sqrt(px * px + py * py)
        if r < nmin:
            nmin = r
    return nmin <= kap_hi * (1 + 1e-12)


@njit(cache=True)
def _rect_dist(rc, phi, r1, r2, t1, t2):
    rel = (phi - t1) % (2.0 * np.pi)
    if rel <= t2 - t1:
        return abs(min(max(rc, r1), r2) - rc)
    best = np.inf
    for edge in (t1, t2):
        cosd = np.cos(phi - edge)
        t = min(max(rc * cosd, r1), r2)
        d2 = t * t + rc * rc - 2.0 * t * rc * cosd
        best = min(best, np.sqrt(max(d2, 0.0)))
    return best


@njit(cache=True)
def sectors_in_disk(cx, cy, er, k_lo, k_hi, counts, eps):
    """Sector ids ``(k, l)``, ``k_lo <= k <= k_hi``, whose closed polar
    rectangle is within Euclidean distance ``er`` of ``(cx, cy)``.

    ``counts[k]`` is the number of sectors in annulus ``k``; annulus 0 is
    the disk of Euclidean radius ``tanh(eps)``.
    """
    rc = np.sqrt(cx * cx + cy * cy)
    phi = np.arctan2(cy, cx)
    two_pi = 2.0 * np.pi
    cap = 64
    ks = np.empty(cap, dtype=np.int64)
    ls = np.empty(cap, dtype=np.int64)
    m = 0
    full = rc <= er
    hw = np.pi if full else np.arcsin(er / rc)
    for k in range(k_lo, k_hi + 1):
        if k == 0:
            if max(0.0, rc - np.tanh(eps)) <= er:
                ks[m] = 0
                ls[m] = 0
                m += 1
            continue
        n = counts[k]
        w = two_pi / n
        r1 = np.tanh(k * eps)
        r2 = np.tanh((k + 1) * eps)
        if full or 2.0 * hw + 2.0 * w >= two_pi:
            lo = 0
            hi = n - 1
        else:
            lo = int(np.floor((phi - hw) / w)) - 1
            hi = int(np.floor((phi + hw) / w)) + 1
        for j in range(lo, hi + 1):
            l = j % n
            if _rect_dist(rc, phi, r1, r2, l * w, (l + 1) * w) <= er:
                if m == cap:
                    cap *= 2
                    k2 = np.empty(cap, dtype=np.int64)
                    l2 = np.empty(cap, dtype=np.int64)
                    k2[:m] = ks[:m]
                    l2[:m] = ls[:m]
                    ks, ls = k2, l2
                ks[m] = k
                ls[m] = l
                m += 1
    return ks[:m], ls[:m]
