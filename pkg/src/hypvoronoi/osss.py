"""Decision trees over the sector product space.

The sector grid splits the Poisson process into independent pieces, one per
sector.  ``run_algorithm_k`` is a decision tree over these pieces that
determines the one-arm indicator by growing the black clusters of the
sphere ``S(0, k)`` sector by sector; ``estimate_revealment`` and
``estimate_influence`` measure how often it reads a sector and how much a
sector matters.  ``verify_osss_discrete`` checks the OSSS inequality exactly
on finite product spaces.
"""
from __future__ import annotations

import heapq
import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .discretization import SectorIndex
from .events import ORIGIN, arm_holds, arm_thresholds
from .local import LocalTessellation, WindowEngine
from .parallel import trial_map
from .percolation import Z95, EstimateResult, _eps, trial_engine
from .sampling import ColoredConfig
from .tessellation import Tessellation, build_delaunay_d2


class InvalidTreeError(ValueError):
    """The decision tree does not determine the function."""


def _engine(source, index=None):
    if isinstance(source, LocalTessellation):
        return source, source.index if index is None else index
    if isinstance(source, ColoredConfig):
        source = build_delaunay_d2(source)
    if isinstance(source, Tessellation):
        if index is None:
            raise ValueError("a SectorIndex is needed for a window configuration")
        return WindowEngine(source), index
    return source, index


def _poincare(h):
    return h[1:] / (1.0 + h[0])


# --- DISCOVER ---------------------------------------------------------------

def _cache(eng, name):
    d = getattr(eng, name, None)
    if d is None:
        d = {}
        setattr(eng, name, d)
    return d


def _discover(eng, index, sid):
    """Cells meeting the closed sector, found by walking from its corner's owner.

    The answer does not depend on colours, so it is cached on the engine.
    """
    cache = _cache(eng, "_discover_cache")
    key = (index.epsilon, sid)
    if key not in cache:
        cache[key] = frozenset(_walk_sector(eng, index, sid))
    return cache[key]


def _cell_sectors(eng, index, c):
    """Sectors whose closure meets the cell of ``c`` (cached on the engine)."""
    cache = _cache(eng, "_cell_sector_cache")
    key = (index.epsilon, c)
    if key not in cache:
        cell = eng.cell(c)
        poly = cell.klein_polygon()
        cand = index.sectors_meeting_disk(_poincare(cell.center), float(np.max(cell.vertex_radii)), pad=1e-9)
        cache[key] = tuple(s for s in cand if index.sector_meets_klein_polygon(s, poly))
    return cache[key]


def _walk_sector(eng, index, sid):
    rep = index.representative(sid).array
    n2 = float(rep @ rep)
    q = np.concatenate([[(1 + n2) / (1 - n2)], 2 * rep / (1 - n2)])
    start = eng.owner(q)
    found = {start}
    stack = [start]
    while stack:
        c = stack.pop()
        for nb in eng.cell(c).neighbors:
            if nb in found:
                continue
            if index.sector_meets_klein_polygon(sid, eng.cell(nb).klein_polygon()):
                found.add(nb)
                stack.append(nb)
    return found


def discover(source, sid, index=None, p=None):
    """Colours of all cells meeting the closed sector ``sid``.

    Returns ``(colours, revealed)``: a map from nucleus id to its mark
    (or, if ``p`` is given, to ``mark <= p``) for every cell meeting the
    sector, and the set of sectors whose points were needed to certify
    those cells (only for lazily sampled sources).
    """
    eng, index = _engine(source, index)
    cells = _discover(eng, index, sid)
    colours = {c: (eng.mark(c) <= p if p is not None else eng.mark(c)) for c in sorted(cells)}
    revealed = set()
    if isinstance(eng, LocalTessellation):
        for c in cells:
            revealed |= eng.deps(c)
    return colours, revealed


# --- the exploration algorithm ------------------------------------------------------

@dataclass
class DecisionTrace:
    """Sectors read by ``run_algorithm_k`` and per-step set sizes."""

    revealed: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    value: bool = False
    auxiliary: set = field(default_factory=set)


def _sector_rep_radius(index, sid):
    return 2.0 * sid[0] * index.epsilon


def run_algorithm_k(source, p, index, n, k):
    """Determine ``0 <-> S(0, n)`` by exploring black clusters of ``S(0, k)``.

    Sectors are read one at a time, always the lowest ``(k, l)`` among the
    unread sectors of ``I`` (representative within distance ``n + 1``) whose
    closure meets ``Z``: the sphere ``S(0, k)`` together with the black
    cells known to be connected to it.  Reading a sector certifies every
    cell meeting its closure.  Returns ``(value, trace)``.
    """
    if not 0 <= k <= n:
        raise ValueError("need 0 <= k <= n")
    eng, index = _engine(source, index)
    lazy = isinstance(eng, LocalTessellation)

    def in_i(sid):
        return _sector_rep_radius(index, sid) < n + 1

    def meets_sphere(cell):
        lo, hi = cell.distance_range()
        return lo <= k <= hi

    trace = DecisionTrace()
    known = {}
    z_cells = set()
    read = set()
    frontier = set()
    heap = []

    def push(sid):
        if sid not in read and sid not in frontier and in_i(sid):
            frontier.add(sid)
            heapq.heappush(heap, sid)

    if k == 0:
        push((0, 0))
    else:
        for sid in index.sectors_on_sphere(float(k), closed=True):
            push(sid)
    while heap:
        y = heapq.heappop(heap)
        frontier.discard(y)
        cells = _discover(eng, index, y)
        read.add(y)
        trace.revealed.append(y)
        if lazy:
            for c in cells:
                trace.auxiliary |= eng.deps(c)
        for c in cells:
            if c not in known:
                known[c] = eng.mark(c) <= p
        # black known cells connected to the sphere through black known cells
        grown = set(z_cells)
        grown.update(c for c, b in known.items() if b and c not in grown and meets_sphere(eng.cell(c)))
        stack = list(grown)
        while stack:
            c = stack.pop()
            for nb in eng.cell(c).neighbors:
                if known.get(nb) and nb not in grown:
                    grown.add(nb)
                    stack.append(nb)
        new = grown - z_cells
        for c in sorted(new):
            z_cells.add(c)
            for sid in _cell_sectors(eng, index, c):
                push(sid)
        w = sum(1 for c, b in known.items() if b and c not in z_cells)
        trace.snapshots.append({"X": len(read), "Z": len(z_cells), "W": w, "M": len(frontier)})
    # value: the Z component of the cell holding the origin reaches distance n
    origin_cells = [c for c in z_cells if eng.cell(c).distance_range()[0] == 0.0]
    value = False
    if origin_cells:
        comp = set(origin_cells)
        stack = list(origin_cells)
        while stack and not value:
            c = stack.pop()
            if eng.cell(c).distance_range()[1] >= n:
                value = True
                break
            for nb in eng.cell(c).neighbors:
                if nb in z_cells and nb not in comp:
                    comp.add(nb)
                    stack.append(nb)
    trace.value = value
    return value, trace


# --- revealment and influence ---------------------------------------------------------

def _sparse_estimates(counts, trials, seed, keys):
    out = {}
    for sid in keys:
        c = counts.get(sid, 0)
        mean = c / trials
        var = (c - c * c / trials) / (trials - 1) if trials > 1 else 0.0
        se = math.sqrt(max(var, 0.0) / trials)
        out[sid] = EstimateResult(mean, se, trials, (mean - Z95 * se, mean + Z95 * se), int(seed))
    return out


def candidate_sectors(index, n):
    """The sectors of ``I``: representative within distance ``n + 1``."""
    out = []
    kk = 0
    while 2.0 * kk * index.epsilon < n + 1:
        out.extend(index.annulus_sectors(kk))
        kk += 1
    return out


def _reveal_trial(t, lam, eps, seed, p, n, k):
    L = trial_engine(lam, eps, seed, t)
    _, trace = run_algorithm_k(L, p, L.index, n, k)
    return trace.revealed


def estimate_revealment(lam, p, epsilon, n, k, trials, seed, workers=None):
    """Per-sector frequency of being read by ``run_algorithm_k``."""
    eps = _eps(lam, epsilon)
    res = trial_map(_reveal_trial, trials, (lam, eps, seed, p, n, k), workers)
    counts = {}
    for rev in res:
        for sid in rev:
            counts[tuple(sid)] = counts.get(tuple(sid), 0) + 1
    keys = sorted(set(candidate_sectors(SectorIndex(eps), n)) | set(counts))
    return _sparse_estimates(counts, trials, seed, keys)


def _relevant_sectors(L):
    """Sectors whose resampling can change anything explored so far in ``L``."""
    o = L.owner(ORIGIN)
    rad = float(np.arccosh(max(L.point(o)[0], 1.0)))
    out = set(L.index.sectors_meeting_disk(np.zeros(2), rad, pad=1e-9))
    for pid in list(L._cells):
        out |= L.deps(pid)
    return out


def influence_flips(L, p, n):
    """Sectors whose independent resampling flips ``0 <-> S(0, n)`` in this sample.

    Sectors outside the dependency region of the cells explored while
    evaluating the event cannot change it, so only those inside are
    resampled.
    """
    base = arm_holds(L, p, n)
    flips = []
    for sid in sorted(_relevant_sectors(L)):
        if arm_holds(L.with_resampled(sid), p, n) != base:
            flips.append(sid)
    return base, flips


def _influence_trial(t, lam, eps, seed, p, n):
    L = trial_engine(lam, eps, seed, t)
    return influence_flips(L, p, n)[1]


def estimate_influence(lam, p, epsilon, n, trials, seed, workers=None):
    """Per-sector probability that resampling the sector flips ``0 <-> S(0, n)``.

    One base sample per trial is shared by all sectors.
    """
    eps = _eps(lam, epsilon)
    res = trial_map(_influence_trial, trials, (lam, eps, seed, p, n), workers)
    counts = {}
    for flips in res:
        for sid in flips:
            counts[tuple(sid)] = counts.get(tuple(sid), 0) + 1
    return _sparse_estimates(counts, trials, seed, sorted(counts))


def _lemma4_trial(t, lam, eps, seed, p, n, dp):
    L = trial_engine(lam, eps, seed, t)
    thr = float(arm_thresholds(L, [n], p_cap=p + dp)[0])
    _, flips = influence_flips(trial_engine(lam, eps, seed, t), p, n)
    return thr, len(flips)


def lemma4_audit(lam, p, epsilon, n, dp, trials, seed, workers=None):
    """Check ``d theta_n / dp >= (1/2) sum_x Inf_x`` on paired trials.

    The derivative is the mark-coupled central difference.  Passes iff the
    mean of ``D - S/2`` is at least ``-3`` standard errors, where ``D`` and
    ``S`` are the per-trial derivative and influence-sum samples.
    """
    if not dp > 0:
        raise ValueError("dp must be > 0")
    eps = _eps(lam, epsilon)
    res = trial_map(_lemma4_trial, trials, (lam, eps, seed, p, n, dp), workers)
    thr = np.array([r[0] for r in res])
    s = np.array([r[1] for r in res], dtype=float)
    d = ((thr <= p + dp).astype(float) - (thr <= p - dp).astype(float)) / (2.0 * dp)
    deriv = EstimateResult.from_samples(d, seed)
    infl = EstimateResult.from_samples(s, seed)
    diff = EstimateResult.from_samples(d - 0.5 * s, seed)
    return {"lambda": lam, "p": p, "epsilon": eps, "n": n, "dp": dp, "trials": trials,
            "seed": seed, "derivative": deriv.as_dict(), "influence_sum": infl.as_dict(),
            "half_influence_sum": 0.5 * infl.mean, "margin": diff.mean,
            "margin_std_error": diff.std_error,
            "passed": bool(diff.mean >= -3.0 * diff.std_error)}


# --- exact discrete OSSS ---------------------------------------------------------------

@dataclass
class DiscreteOSSSCase:
    """A function on a finite product space with a decision tree.

    ``table`` lists ``f`` over the product of the alphabets in row-major
    order.  Tree nodes are ``{"query": i, "children": [...]}`` (one child per
    letter of coordinate ``i``) or ``{"leaf": True}``.
    """

    alphabets: list
    probabilities: list
    table: list
    tree: dict

    def __post_init__(self):
        self.probabilities = [[Fraction(q) for q in ps] for ps in self.probabilities]
        self.table = [Fraction(v) for v in self.table]
        for a, ps in zip(self.alphabets, self.probabilities):
            if len(a) != len(ps) or sum(ps) != 1 or any(q < 0 for q in ps):
                raise ValueError("each coordinate needs a probability vector over its alphabet")
        size = math.prod(len(a) for a in self.alphabets)
        if size > 10 ** 6:
            raise ValueError("input space larger than 10^6")
        if len(self.table) != size:
            raise ValueError("function table has the wrong length")

    @property
    def n(self):
        return len(self.alphabets)


def _frac(v):
    if isinstance(v, (list, tuple)):
        return Fraction(int(v[0]), int(v[1]))
    return Fraction(v)


def load_osss_case(text):
    """Parse a JSON case (probabilities as ``[num, den]`` pairs)."""
    doc = json.loads(text)
    unknown = set(doc) - {"alphabets", "probabilities", "table", "tree"}
    if unknown:
        raise ValueError(f"unknown keys {sorted(unknown)}")
    return DiscreteOSSSCase(doc["alphabets"], [[_frac(q) for q in ps] for ps in doc["probabilities"]],
                            [_frac(v) for v in doc["table"]], doc["tree"])


def sequential_tree(alphabets, table, order=None):
    """Query coordinates in ``order`` until ``f`` is constant on what is left."""
    sizes = [len(a) for a in alphabets]
    order = list(range(len(sizes))) if order is None else list(order)
    f = np.array([Fraction(v) for v in table], dtype=object).reshape(sizes)

    def build(fixed, depth):
        sub = f[tuple(fixed.get(i, slice(None)) for i in range(len(sizes)))]
        vals = set(np.asarray(sub).ravel().tolist())
        if len(vals) <= 1 or depth == len(order):
            return {"leaf": True}
        i = order[depth]
        return {"query": i, "children": [build({**fixed, i: a}, depth + 1) for a in range(sizes[i])]}

    return build({}, 0)


def verify_osss_discrete(case):
    """Exact ``Var(f)``, revealments, influences and the OSSS inequality."""
    sizes = [len(a) for a in case.alphabets]
    probs = case.probabilities
    inputs = list(itertools.product(*[range(s) for s in sizes]))
    f = dict(zip(inputs, case.table))
    weight = {x: math.prod((probs[i][x[i]] for i in range(len(x))), start=Fraction(1)) for x in inputs}
    mean = sum(weight[x] * f[x] for x in inputs)
    var = sum(weight[x] * f[x] * f[x] for x in inputs) - mean * mean
    delta = [Fraction(0)] * len(sizes)
    leaf_values = {}
    for x in inputs:
        node = case.tree
        path = []
        while "query" in node:
            i = int(node["query"])
            if i in path:
                raise InvalidTreeError("coordinate queried twice on one path")
            path.append(i)
            node = node["children"][x[i]]
        for i in path:
            delta[i] += weight[x]
        key = (id(node),)
        if key in leaf_values and leaf_values[key] != f[x]:
            raise InvalidTreeError("tree leaf reached by inputs with different values")
        leaf_values[key] = f[x]
    infl = []
    for i in range(len(sizes)):
        tot = Fraction(0)
        for x in inputs:
            for a in range(sizes[i]):
                y = x[:i] + (a,) + x[i + 1:]
                if f[y] != f[x]:
                    tot += weight[x] * probs[i][a]
        infl.append(tot)
    rhs = sum(d * q for d, q in zip(delta, infl))
    return {"variance": var, "delta": delta, "influence": infl, "rhs": rhs, "holds": var <= rhs}


def report_to_json(report):
    """Exact report with fractions written as ``"num/den"`` strings."""
    def conv(v):
        if isinstance(v, Fraction):
            return f"{v.numerator}/{v.denominator}"
        if isinstance(v, list):
            return [conv(x) for x in v]
        return v
    return json.dumps({k: conv(v) for k, v in report.items()}, indent=1, sort_keys=True)


def boolean_sweep(n_bits=3):
    """OSSS check for every boolean function on ``n_bits`` uniform bits."""
    alph = [[0, 1]] * n_bits
    probs = [[Fraction(1, 2), Fraction(1, 2)]] * n_bits
    size = 2 ** n_bits
    violations = 0
    count = 0
    for code in range(2 ** size):
        table = [(code >> j) & 1 for j in range(size)]
        case = DiscreteOSSSCase(alph, probs, table, sequential_tree(alph, table))
        count += 1
        if not verify_osss_discrete(case)["holds"]:
            violations += 1
    return {"functions": count, "violations": violations}


__all__ = [
    "DecisionTrace", "DiscreteOSSSCase", "InvalidTreeError", "discover", "run_algorithm_k",
    "estimate_revealment", "estimate_influence", "influence_flips", "lemma4_audit",
    "verify_osss_discrete", "load_osss_case", "sequential_tree", "boolean_sweep",
    "candidate_sectors", "report_to_json",
]
