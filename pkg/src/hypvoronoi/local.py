"""Lazily revealed Voronoi tessellation of the whole hyperbolic plane.

Points are drawn sector by sector from a ``SectorField`` only when a query
needs them.  A cell is accepted once every nucleus that could cut it has been
revealed: if the cell is bounded with circumradius ``R`` around its nucleus,
only nuclei within distance ``2R`` matter, so revealing all sectors that meet
``B(z, 2R)`` makes the cell exact.  No truncation window is involved.

Point ids are ``(k, l, j)``: the ``j``-th point of sector ``(k, l)``.
"""
from __future__ import annotations

import math

import numpy as np

from .geometry import hyp_ball_volume
from .tessellation import TruncationError, compute_cell, owner_of

_MAX_RADIUS = 60.0


class LocalTessellation:
    """Exact Voronoi cells of a ``SectorField``, computed on demand.

    Parameters
    ----------
    field : SectorField
        Source of the points.
    """

    def __init__(self, field, _sectors=None, _cells=None):
        self.field = field
        self.index = field.index
        self._sectors = dict(_sectors or {})
        self._cells = dict(_cells or {})
        self._deps = {}
        # initial search radius: about 8 expected points
        need = 8.0 / field.lam
        self._r0 = 2.0 * math.asinh(math.sqrt(need / (4.0 * math.pi)))

    # -- points -------------------------------------------------------------

    def reveal(self, sids):
        for sid in sids:
            if sid not in self._sectors:
                h, m = self.field.sample(sid)
                ids = [(sid[0], sid[1], j) for j in range(len(h))]
                self._sectors[sid] = (h, m, ids)

    @property
    def revealed(self):
        return set(self._sectors)

    def sector_points(self, sid):
        self.reveal([sid])
        return self._sectors[sid]

    def point(self, pid):
        return self._sectors[pid[:2]][0][pid[2]]

    def mark(self, pid):
        return float(self._sectors[pid[:2]][1][pid[2]])

    def _gather(self, sids):
        self.reveal(sids)
        hs, ids = [], []
        for sid in sids:
            h, _, pids = self._sectors[sid]
            if len(h):
                hs.append(h)
                ids.extend(pids)
        if not hs:
            return np.empty((0, 3)), []
        return np.concatenate(hs), ids

    def _disk_sectors(self, h, radius):
        u = h[1:] / (1.0 + h[0])
        return self.index.sectors_meeting_disk(u, radius)

    # -- queries ------------------------------------------------------------

    def owner(self, q):
        """Id of the nucleus nearest to hyperboloid point ``q`` (ties: lowest id)."""
        q = np.asarray(q, dtype=float)
        radius = self._r0
        while radius < _MAX_RADIUS:
            hs, ids = self._gather(self._disk_sectors(q, radius))
            if len(ids):
                c = hs[:, 0] * q[0] - hs[:, 1:] @ q[1:]
                best = float(np.min(c))
                if best <= math.cosh(radius):
                    ties = [ids[i] for i in np.flatnonzero(c == best)]
                    return min(ties)
            radius *= 1.5
        raise RuntimeError("no nucleus found near query point")

    def cell(self, pid):
        """Exact cell of nucleus ``pid``."""
        c = self._cells.get(pid)
        if c is not None:
            return c
        z = self.point(pid)
        radius = self._r0
        while True:
            hs, ids = self._gather(self._disk_sectors(z, radius))
            keep = [i for i, x in enumerate(ids) if x != pid]
            cell, cosh_r = compute_cell(0, z, hs[keep], np.arange(len(keep)))
            if cell.bounded and 2.0 * cosh_r * cosh_r - 1.0 <= math.cosh(radius):
                break
            if radius > _MAX_RADIUS:
                raise RuntimeError(f"cell of {pid} not bounded within radius {_MAX_RADIUS}")
            # more candidates only shrink the cell; early bounds on R are loose
            grow = radius * 1.5
            if cell.bounded:
                grow = min(grow, 2.0 * math.acosh(cosh_r) * (1 + 1e-9))
            radius = grow
        cell.nucleus = pid
        cell.neighbors = tuple(ids[keep[i]] for i in cell.neighbors)
        self._cells[pid] = cell
        return cell

    def deps(self, pid):
        """Sectors whose points determine the cell of ``pid``.

        These are the sectors meeting some closed vertex disk ``B(v, r_v)``
        (which contain every nucleus cutting the cell) and the nucleus' own
        sector.
        """
        d = self._deps.get(pid)
        if d is None:
            cell = self.cell(pid)
            centers, radii = cell.vertex_disks()
            s = {pid[:2]}
            for u, r in zip(centers, radii):
                s.update(self.index.sectors_meeting_disk(u, float(r), pad=1e-9))
            d = frozenset(s)
            self._deps[pid] = d
        return d

    def with_resampled(self, sid):
        """Engine for the field with sector ``sid`` redrawn, sharing valid cells."""
        field = self.field.with_resampled(sid)
        sectors = {k: v for k, v in self._sectors.items() if k != sid}
        cells = {}
        deps = {}
        for pid, c in self._cells.items():
            if pid[:2] == sid:
                continue
            dp = self.deps(pid)
            if sid not in dp:
                cells[pid] = c
                deps[pid] = dp
        out = LocalTessellation(field, sectors, cells)
        out._deps = deps
        return out

    def expected_points(self, radius):
        return self.field.lam * hyp_ball_volume(radius, 2)




class WindowEngine:
    """``LocalTessellation``-like view of a window ``Tessellation``.

    Only cells certified by the window are handed out; asking for any other
    cell raises ``TruncationError``.
    """

    def __init__(self, tess):
        self.tess = tess
        self.config = tess.config

    def owner(self, q):
        q = np.asarray(q, dtype=float)
        return owner_of(self.tess, q[1:] / (1.0 + q[0]))

    def cell(self, z):
        if not self.tess.certified(z):
            raise TruncationError(f"cell {z} is not determined by the window")
        return self.tess.cell(z)

    def point(self, z):
        return self.tess.hyperboloid[z]

    def mark(self, z):
        return float(self.config.marks[z])


__all__ = ["LocalTessellation", "WindowEngine"]
