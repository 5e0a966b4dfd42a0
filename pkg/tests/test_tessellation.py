import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import bisector_adjacency, bfs_clusters, linear_owner, random_disk_points
from hypvoronoi.geometry import hyp_distance
from hypvoronoi.local import LocalTessellation, WindowEngine
from hypvoronoi.percolation import black_clusters
from hypvoronoi.sampling import ColoredConfig, RngStream, SectorField, sample_ppp
from hypvoronoi.tessellation import (
    EmptyConfigError,
    TruncationError,
    build_delaunay_d2,
    compute_Dn,
    owner_of,
    truncation_radius,
)


def config_from(points, seed=0):
    rng = np.random.default_rng(seed)
    return ColoredConfig(1.0, 2, 10.0, points, rng.random(len(points)))


def test_truncation_radius_frozen():
    # t_min = 2 asinh(sqrt(log(1e6) / (4 pi)))
    assert truncation_radius(1.0, 1) == pytest.approx(7.3222, abs=1e-4)
    assert truncation_radius(1.0, 5) == 20.0
    with pytest.raises(ValueError):
        truncation_radius(1.0, 1, tol_fail=0.0)
    assert truncation_radius(1.0, 0, d=3) > 0


def test_small_configs():
    with pytest.raises(EmptyConfigError):
        build_delaunay_d2(config_from(np.empty((0, 2))))
    one = build_delaunay_d2(config_from(np.array([[0.1, 0.2]])))
    assert one.adjacency == [[]]
    assert owner_of(one, np.zeros(2)) == 0
    line = config_from(np.array([[-0.5, 0.0], [0.0, 0.0], [0.4, 0.0], [0.7, 0.0]]))
    assert build_delaunay_d2(line).adjacency == [[1], [0, 2], [1, 3], [2]]


def test_square_is_cocircular():
    # four cocircular points: the diagonals meet in a single Voronoi vertex
    pts = 0.5 * np.array([[1, 0], [0, 1], [-1, 0], [0, -1]], dtype=float)
    tess = build_delaunay_d2(config_from(pts))
    assert tess.adjacency == bisector_adjacency(pts)
    assert tess.adjacency == [[1, 3], [0, 2], [1, 3], [0, 2]]


@settings(max_examples=150, deadline=None)
@given(st.integers(2, 12), st.sampled_from([0.3, 0.9, 0.99]), st.integers(0, 2**32 - 1))
def test_adjacency_matches_bisectors(n, radius, seed):
    pts = random_disk_points(np.random.default_rng(seed), n, radius)
    tess = build_delaunay_d2(config_from(pts, seed))
    assert tess.adjacency == [sorted(a) for a in bisector_adjacency(pts)]


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_owner_matches_scan(seed):
    rng = np.random.default_rng(seed)
    cfg = sample_ppp(1.0, 3.0, 2, seed)
    tess = build_delaunay_d2(cfg)
    for q in random_disk_points(rng, 50, math.tanh(1.5)):
        assert owner_of(tess, q) == linear_owner(cfg.points, q)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0, 1))
def test_clusters_match_bfs(seed, p):
    cfg = sample_ppp(1.0, 3.0, 2, seed)
    tess = build_delaunay_d2(cfg)
    assert black_clusters(tess, p) == bfs_clusters(tess.adjacency, cfg.marks <= p)


def test_cells_agree_with_adjacency():
    cfg = sample_ppp(1.0, 4.0, 2, 2)
    tess = build_delaunay_d2(cfg)
    for z in range(len(cfg)):
        if tess.certified(z):
            assert sorted(tess.cell(z).neighbors) == tess.adjacency[z]


def test_cell_geometry():
    cfg = sample_ppp(1.0, 4.0, 2, 5)
    tess = build_delaunay_d2(cfg)
    h = tess.hyperboloid
    for z in range(len(cfg)):
        if not tess.certified(z):
            continue
        cell = tess.cell(z)
        v = cell.vertices
        # each vertex is equidistant from the nucleus and at least two neighbours
        for vert, r in zip(v, cell.vertex_radii):
            c = h @ (vert * np.array([1, -1, -1]))
            dz = math.acosh(max(c[z], 1.0))
            assert dz == pytest.approx(r, abs=1e-7)
            assert np.sum(np.abs(np.arccosh(np.maximum(c, 1.0)) - dz) < 1e-6) >= 3
            assert np.all(np.arccosh(np.maximum(c, 1.0)) >= dz - 1e-7)


def test_dn_contains_owner_and_grows():
    cfg = sample_ppp(1.0, 6.0, 2, 1)
    tess = build_delaunay_d2(cfg)
    d1, d2 = compute_Dn(tess, 1.0), compute_Dn(tess, 2.0)
    assert owner_of(tess, np.zeros(2)) in d1
    assert d1 <= d2
    for z in d1:
        assert tess.cell(z).inner <= 1.0 + 1e-12


def test_to_json_roundtrip():
    tess = build_delaunay_d2(sample_ppp(1.0, 2.0, 2, 1))
    doc = json.loads(tess.to_json())
    assert doc["adjacency"] == tess.adjacency
    assert len(doc["nuclei"]) == len(tess.config)


def test_window_engine_refuses_uncertified():
    cfg = sample_ppp(1.0, 3.0, 2, 1)
    eng = WindowEngine(build_delaunay_d2(cfg))
    far = int(np.argmax(np.linalg.norm(cfg.points, axis=1)))
    with pytest.raises(TruncationError):
        eng.cell(far)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_lazy_cells_match_window(seed):
    field = SectorField(1.0, 0.5, RngStream(seed))
    cfg = field.window(7.0)
    tess = build_delaunay_d2(cfg)
    lazy = LocalTessellation(field)
    # window index -> lazy id, through the owner of each nucleus' position
    ids = {}
    for z in range(len(cfg)):
        if hyp_distance(cfg.points[z], np.zeros(2)) < 3.0 and tess.certified(z):
            pid = lazy.owner(tess.hyperboloid[z])
            ids[z] = pid
            assert np.allclose(lazy.point(pid), tess.hyperboloid[z], atol=1e-9)
    assert len(ids) > 20
    inv = {v: k for k, v in ids.items()}
    for z, pid in ids.items():
        cell = lazy.cell(pid)
        assert cell.reach == pytest.approx(tess.cell(z).reach, abs=1e-9)
        got = sorted(inv[n] for n in cell.neighbors if n in inv)
        want = sorted(n for n in tess.adjacency[z] if n in ids)
        assert got == want


def test_lazy_owner_is_nearest():
    field = SectorField(1.0, 0.5, RngStream(4))
    lazy = LocalTessellation(field)
    cfg = field.window(6.0)
    rng = np.random.default_rng(0)
    for q in random_disk_points(rng, 100, math.tanh(1.0)):
        pid = lazy.owner(np.concatenate([[1 + q @ q], 2 * q]) / (1 - q @ q))
        z = linear_owner(cfg.points, q)
        assert np.allclose(lazy.point(pid)[1:] / (1 + lazy.point(pid)[0]), cfg.points[z], atol=1e-12)
