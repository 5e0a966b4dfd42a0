"""Increasing events of Voronoi percolation and their evaluation.

Each event is evaluated on a ``LocalTessellation`` (the whole plane, exact)
or on a window ``Tessellation``.  Colours come from the marks (black iff
``mark <= p``) unless overridden per nucleus.

Because the events are increasing and all ``p`` are coupled through the
marks, each event has a per-sample *threshold* ``p*``: it holds at ``p`` iff
``p* <= p``.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .geometry import HPoint, poincare_to_hyperboloid
from .tessellation import TruncationError, owner_of

ORIGIN = np.array([1.0, 0.0, 0.0])


def _base_h(base):
    if base is None:
        return ORIGIN
    return poincare_to_hyperboloid(np.asarray(base.array if isinstance(base, HPoint) else base, float))


def _colour(L, p, override):
    if override is None:
        return lambda pid: L.mark(pid) <= p
    return lambda pid: override[pid] if pid in override else L.mark(pid) <= p


def _reach(cell, base_h):
    frame = None if base_h is ORIGIN else base_h
    return cell.distance_range(frame)


def arm_holds(L, p, n, base=None, override=None):
    """Whether the black cluster of the owner of ``base`` reaches distance ``n`` from it.

    Explores black cells outward first (a heap on nucleus distance), and
    stops as soon as a cell with a point at distance ``>= n`` is found.
    """
    bh = _base_h(base)
    black = _colour(L, p, override)
    o = L.owner(bh)
    if not black(o):
        return False
    if n <= 0:
        return True
    seen = {o}
    heap = [(0.0, o)]
    while heap:
        _, c = heapq.heappop(heap)
        cell = L.cell(c)
        if _reach(cell, bh)[1] >= n:
            return True
        for nb in cell.neighbors:
            if nb not in seen and black(nb):
                seen.add(nb)
                h = L.point(nb)
                heapq.heappush(heap, (-(h[0] * bh[0] - h[1:] @ bh[1:]), nb))
    return False


def arm_thresholds(L, ns, base=None, p_cap=1.0):
    """Per-sample thresholds ``p*_n`` of the one-arm events for every ``n`` in ``ns``.

    ``p*_n`` is the smallest ``p`` at which the arm event holds: the minimax
    mark over cell paths from the owner of ``base`` to a cell reaching
    distance ``n``.  Thresholds above ``p_cap`` are reported as ``inf``.
    """
    bh = _base_h(base)
    ns = np.asarray(ns, dtype=float)
    out = np.full(len(ns), math.inf)
    order = np.argsort(ns)
    o = L.owner(bh)
    b0 = L.mark(o)
    if b0 > p_cap:
        return out
    heap = [(b0, o)]
    done = set()
    j = 0
    while heap and j < len(order):
        b, c = heapq.heappop(heap)
        if c in done:
            continue
        done.add(c)
        reach = None
        while j < len(order):
            nn = ns[order[j]]
            if nn > 0:
                if reach is None:
                    reach = _reach(L.cell(c), bh)[1]
                if reach < nn:
                    break
            out[order[j]] = b
            j += 1
        if j == len(order):
            break
        for nb in L.cell(c).neighbors:
            if nb not in done:
                nbb = max(b, L.mark(nb))
                if nbb <= p_cap:
                    heapq.heappush(heap, (nbb, nb))
    return out


def cluster_within(L, p, n, base=None, override=None):
    """Black cluster of the owner of ``base`` restricted to cells meeting ``B(base, n)``.

    Returns ``(cluster, boundary)``: the cluster ids and the ids of cells
    meeting the ball that are adjacent to it but not in it.
    """
    bh = _base_h(base)
    black = _colour(L, p, override)
    o = L.owner(bh)
    if not black(o):
        return set(), {o}
    cluster = {o}
    boundary = set()
    stack = [o]
    while stack:
        c = stack.pop()
        for nb in L.cell(c).neighbors:
            if nb in cluster or nb in boundary:
                continue
            if _reach(L.cell(nb), bh)[0] > n:
                continue
            if black(nb):
                cluster.add(nb)
                stack.append(nb)
            else:
                boundary.add(nb)
    return cluster, boundary


# --- event specs ------------------------------------------------------------

@dataclass(frozen=True)
class OwnerBlack:
    """The nucleus owning ``base`` (default: the origin) is black."""

    base: tuple | None = None
    increasing = True

    def holds(self, L, p, override=None):
        o = L.owner(_base_h(self.base))
        return _colour(L, p, override)(o)

    def threshold(self, L, p_cap=1.0):
        m = L.mark(L.owner(_base_h(self.base)))
        return m if m <= p_cap else math.inf

    def candidates(self, L, p):
        return {L.owner(_base_h(self.base))}

    def holds_window(self, tess, p, override=None):
        o = owner_of(tess, np.zeros(2) if self.base is None else np.asarray(self.base, float))
        return bool(override[o]) if override and o in override else bool(tess.config.marks[o] <= p)

    def exact_probability(self, p):
        return float(p)


@dataclass(frozen=True)
class OneArm:
    """The black cluster of the owner of ``base`` reaches distance ``n`` from ``base``."""

    n: float
    base: tuple | None = None
    increasing = True

    def holds(self, L, p, override=None):
        return arm_holds(L, p, self.n, self.base, override)

    def threshold(self, L, p_cap=1.0):
        return float(arm_thresholds(L, [self.n], self.base, p_cap)[0])

    def candidates(self, L, p):
        # a pivotal nucleus is in the cluster or next to it, within B(base, n)
        cluster, boundary = cluster_within(L, p, self.n, self.base)
        return cluster | boundary | {L.owner(_base_h(self.base))}

    def holds_window(self, tess, p, override=None):
        return one_arm_window(tess, p, self.n, self.base, override)


@dataclass(frozen=True)
class AlwaysTrue:
    increasing = True

    def holds(self, L, p, override=None):
        return True

    def threshold(self, L, p_cap=1.0):
        return -math.inf

    def candidates(self, L, p):
        return set()

    def holds_window(self, tess, p, override=None):
        return True

    def exact_probability(self, p):
        return 1.0


def one_arm_window(tess, p, n, base=None, override=None):
    """One-arm event on a window tessellation.

    Raises ``TruncationError`` if an explored cell is not determined by the
    window.
    """
    cfg = tess.config
    bpt = np.zeros(2) if base is None else np.asarray(base, dtype=float)
    bh = _base_h(None if base is None else bpt)

    def black(z):
        if override is not None and z in override:
            return bool(override[z])
        return bool(cfg.marks[z] <= p)

    o = owner_of(tess, bpt)
    if not black(o):
        return False
    if n <= 0:
        return True
    seen = {o}
    stack = [o]
    while stack:
        z = stack.pop()
        if not tess.certified(z):
            raise TruncationError(f"cell {z} is not determined by the window")
        if _reach(tess.cell(z), bh)[1] >= n:
            return True
        for nb in tess.adjacency[z]:
            if nb not in seen and black(nb):
                seen.add(nb)
                stack.append(nb)
    return False


def pivotal_count(L, p, event):
    """Number of nuclei whose colour flip changes the event at ``p``."""
    return len(pivotal_ids(L, p, event))


def pivotal_ids(L, p, event, candidates=None):
    base = event.holds(L, p)
    cand = event.candidates(L, p) if candidates is None else candidates
    out = set()
    for pid in sorted(cand):
        flipped = not (L.mark(pid) <= p)
        if event.holds(L, p, {pid: flipped}) != base:
            out.add(pid)
    return out


__all__ = [
    "OwnerBlack", "OneArm", "AlwaysTrue", "arm_holds", "arm_thresholds", "cluster_within",
    "one_arm_window", "pivotal_ids", "pivotal_count",
]
