"""Acceptance criteria 1-12, each at its stated scale and tolerance.

Run alone with ``pytest tests/test_acceptance.py -v``; the terminal summary
ends with one PASS/FAIL line per criterion.
"""
import math
import time

import mpmath
import numpy as np

from oracles import bisector_adjacency, bfs_clusters, random_disk_points
from hypvoronoi.cli import main
from hypvoronoi.discretization import SectorIndex
from hypvoronoi.events import OneArm, OwnerBlack, arm_holds
from hypvoronoi.osss import boolean_sweep, lemma4_audit, run_algorithm_k
from hypvoronoi.parallel import trial_map
from hypvoronoi.percolation import (
    black_clusters,
    estimate_pc,
    estimate_theta,
    fit_decay,
    mean_field_check,
    russo_audit,
    theta_curve,
    trial_engine,
)
from hypvoronoi.sampling import ColoredConfig, default_epsilon, sample_ppp
from hypvoronoi.tessellation import build_delaunay_d2, owner_of

SEED = 20240601
_PC = {}


def pc_lambda_one():
    if "pc" not in _PC:
        _PC["pc"] = estimate_pc(1.0, 6, 1000, 0.01, SEED)
    return _PC["pc"]


def test_c01_theta_zero_is_p(criterion):
    t = time.perf_counter()
    rows = []
    ok = True
    for p in (0.3, 0.5, 0.7):
        r = estimate_theta(1.0, p, 0, 10_000, SEED)
        ok &= abs(r.mean - p) <= 3 * r.std_error
        rows.append(f"p={p}: {r.mean:.4f}+-{r.std_error:.4f}")
    dt = time.perf_counter() - t
    ok &= dt < 60
    assert criterion(1, ok, "; ".join(rows) + f" ({dt:.0f}s)")


def test_c02_subcritical_decay(criterion):
    est = theta_curve(1.0, 0.1, list(range(1, 9)), 10_000, SEED)
    fit = fit_decay(est)
    ok = fit.slope_ci95[1] < 0 and fit.r_squared >= 0.9
    means = ", ".join(f"{r.mean:.2g}" for _, r in est)
    assert criterion(2, ok, f"slope={fit.slope:.3f} CI=({fit.slope_ci95[0]:.3f}, {fit.slope_ci95[1]:.3f}) "
                            f"r2={fit.r_squared:.3f} theta=[{means}]")


def test_c03_supercritical(criterion):
    (_, t4), (_, t8) = theta_curve(1.0, 0.9, [4, 8], 10_000, SEED)
    ratio = t8.mean / t4.mean
    pc = pc_lambda_one().midpoint
    grid = [round(x, 10) for x in np.arange(pc + 0.1, 0.9 + 1e-9, 0.1)]
    if grid[-1] < 0.9 - 1e-9:
        grid.append(0.9)
    c_hat, rep = mean_field_check(1.0, grid, 8, 4000, SEED, pc)
    ok = ratio >= 0.8 and c_hat is not None and rep["passed"]
    lo = rep["c_lower95"]
    assert criterion(3, ok, f"theta8/theta4={ratio:.3f}; pc={pc:.3f} grid={grid[0]:.3f}..0.9 "
                            f"c_hat={c_hat} c_lower95={lo}")


def test_c04_pc_nontrivial(criterion):
    res = pc_lambda_one()
    ok = 0.05 <= res.lo and res.hi <= 0.95
    assert criterion(4, ok, f"[{res.lo:.4f}, {res.hi:.4f}] (conditional crossing, n=6, 1000 trials)")


def test_c05_small_lambda(criterion):
    res = estimate_pc(0.1, 6, 1000, 0.01, SEED)
    ok = 0.05 <= res.midpoint <= 0.21
    assert criterion(5, ok, f"midpoint={res.midpoint:.4f} in [0.05, 0.21]; target pi*0.1/3={math.pi * 0.1 / 3:.4f}")


def test_c06_russo(criterion):
    own = russo_audit(1.0, OwnerBlack(), 0.5, 0.02, 10_000, SEED)
    exact = own["pivotal_min"] == own["pivotal_max"] == 1 and abs(own["exact_derivative"] - 1) < 1e-12
    arm = russo_audit(1.0, OneArm(2.0), 0.5, 0.02, 10_000, SEED)
    ok = exact and own["passed"] and arm["passed"]
    d, v = arm["derivative"], arm["pivotal"]
    assert criterion(6, ok, f"owner-black: |Piv|=1 always, derivative exactly 1: {exact}; "
                            f"arm(2): d/dp={d['mean']:.3f}+-{d['std_error']:.3f} "
                            f"E|Piv|={v['mean']:.3f}+-{v['std_error']:.3f}")


def test_c07_osss_sweep(criterion):
    t = time.perf_counter()
    rep = boolean_sweep(3)
    dt = time.perf_counter() - t
    ok = rep == {"functions": 256, "violations": 0} and dt < 1.0
    assert criterion(7, ok, f"{rep['functions']} functions, {rep['violations']} violations ({dt:.2f}s)")


def _ak_trial(t, seed):
    L = trial_engine(1.0, default_epsilon(1.0), seed, t)
    bad = 0
    for p in (0.3, 0.5, 0.7):
        truth = arm_holds(L, p, 3.0)
        for k in range(4):
            bad += run_algorithm_k(L, p, L.index, 3.0, k)[0] != truth
    return bad


def test_c08_algorithm_equivalence(criterion):
    bad = sum(trial_map(_ak_trial, 1000, (SEED,)))
    assert criterion(8, bad == 0, f"{bad} mismatches in 1000 configs x 4 k x 3 p = 12000 runs")


def test_c09_lemma4(criterion):
    rep = lemma4_audit(1.0, 0.5, 0.25, 2.0, 0.02, 10_000, SEED)
    d = rep["derivative"]
    assert criterion(9, rep["passed"], f"d/dp={d['mean']:.3f}, half influence sum={rep['half_influence_sum']:.3f}, "
                                       f"margin={rep['margin']:.3f}+-{rep['margin_std_error']:.3f}")


def _scan_owner(points, qs):
    num = ((qs[:, None, :] - points[None]) ** 2).sum(-1)
    den = (1 - (points ** 2).sum(-1))[None] * (1 - (qs ** 2).sum(-1))[:, None]
    return np.argmin(num / den, axis=1)


def test_c10_tessellation_oracles(criterion):
    rng = np.random.default_rng(SEED)
    owner_bad = 0
    for i in range(10):
        cfg = sample_ppp(1.0, 5.0, 2, SEED + i)
        tess = build_delaunay_d2(cfg)
        qs = random_disk_points(rng, 10_000, math.tanh(2.5))
        got = np.array([owner_of(tess, q) for q in qs])
        owner_bad += int(np.sum(got != _scan_owner(cfg.points, qs)))
    adj_bad = 0
    for i in range(100):
        n = int(rng.integers(2, 13))
        pts = random_disk_points(rng, n, rng.choice([0.5, 0.9, 0.99]))
        cfg = ColoredConfig(1.0, 2, 10.0, pts, rng.random(n))
        adj_bad += build_delaunay_d2(cfg).adjacency != [sorted(a) for a in bisector_adjacency(pts)]
    clu_bad = 0
    for i in range(100):
        cfg = sample_ppp(1.0, 3.0, 2, SEED + 100 + i)
        tess = build_delaunay_d2(cfg)
        p = float(rng.random())
        clu_bad += black_clusters(tess, p) != bfs_clusters(tess.adjacency, cfg.marks <= p)
    ok = owner_bad == adj_bad == clu_bad == 0
    assert criterion(10, ok, f"owner {owner_bad}/100000, adjacency {adj_bad}/100, clusters {clu_bad}/100 mismatches")


def test_c11_discretization(criterion):
    count_bad = area_bad = sum_bad = 0
    for eps in (0.1, 0.25, 0.5, 1.0):
        idx = SectorIndex(eps)
        e = mpmath.mpf(eps)
        bound = 4 * math.pi * math.sinh(eps) ** 2
        for k in range(1001):
            with mpmath.workdps(int((2 * k + 1) * eps / 2.3) + 40):
                ref = 1 if k == 0 else int(mpmath.floor(mpmath.sinh((2 * k + 1) * e) / mpmath.sinh(e))) + 1
                ring = 2 * mpmath.pi * (mpmath.cosh(2 * (k + 1) * e) - mpmath.cosh(2 * k * e))
                n = idx.count(k)
                count_bad += n != ref
                area = idx.sector_area((k, 0))
                area_bad += area > bound * (1 + 1e-12)
                if n <= 20_000:
                    total = mpmath.mpf(math.fsum(idx.sector_area(s) for s in idx.annulus_sectors(k)))
                else:
                    total = n * mpmath.mpf(area)
                sum_bad += abs(total / ring - 1) > 1e-9
    ok = count_bad == area_bad == sum_bad == 0
    assert criterion(11, ok, f"N_k mismatches {count_bad}, area bound violations {area_bad}, "
                             f"annulus sum errors {sum_bad} (k<=1000, 4 eps)")


def test_c12_determinism(criterion, tmp_path):
    cmds = [
        ["theta", "--p-grid", "0.3,0.5,0.7", "--n-grid", "0,1,2", "--trials", "300"],
        ["pc", "--n", "3", "--trials", "200"],
        ["reveal", "--p", "0.5", "--n", "2", "--k", "1", "--trials", "40"],
        ["lemma4-audit", "--p", "0.5", "--n", "1", "--epsilon", "0.5", "--trials", "40"],
    ]
    ok = True
    for j, cmd in enumerate(cmds):
        outs = []
        for w in ("1", "2", "3"):
            path = tmp_path / f"{j}_{w}.out"
            main(cmd + ["--seed", str(SEED), "--workers", w, "--out", str(path)])
            outs.append(path.read_bytes())
        ok &= outs[0] == outs[1] == outs[2] and len(outs[0]) > 0
    assert criterion(12, ok, f"{len(cmds)} commands byte-identical across 1, 2 and 3 workers")
