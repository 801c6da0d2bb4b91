"""Both kernel backends must agree bit for bit on random inputs."""

from __future__ import annotations

import math

import numpy as np
import pytest

from shadownbv import kernels

from conftest import BACKENDS

pytestmark = pytest.mark.skipif(len(BACKENDS) < 2, reason="compiled kernels not built")

PY = kernels.backend("python")


@pytest.fixture(scope="module")
def cy():
    return kernels.backend("cython")


def grid2(rng, n=(4, 40), occ=0.25, unk=0.2):
    w, h = (int(v) for v in rng.integers(*n, 2))
    cells = rng.choice([0, 1, 2], size=(w, h), p=[1 - occ - unk, occ, unk]).astype(np.uint8)
    sx, sy = int(rng.integers(w)), int(rng.integers(h))
    cells[sx, sy] = 0
    return cells, sx, sy


def grid3(rng, shape=(20, 20, 8), occ=0.1, unk=0.4):
    return rng.choice([0, 1, 2], size=shape, p=[1 - occ - unk, occ, unk]).astype(np.uint8)


def both(fn_name, cy, *args, fresh=()):
    """Call a kernel on both backends with copies of the arrays named by index in ``fresh``."""
    outs = []
    for mod in (PY, cy):
        a = [x.copy() if i in fresh else x for i, x in enumerate(args)]
        outs.append((getattr(mod, fn_name)(*a), a))
    return outs


@pytest.mark.parametrize("seed", range(40))
def test_rsc_fill(cy, seed):
    rng = np.random.default_rng(seed)
    cells, sx, sy = grid2(rng)
    mask = (rng.random(cells.shape) > 0.2).astype(np.uint8) if seed % 2 else None
    (rp, ap), (rc, ac) = both("rsc_fill", cy, cells, sx, sy, np.zeros_like(cells), mask, fresh=(3,))
    assert rp == rc and np.array_equal(ap[3], ac[3])


@pytest.mark.parametrize("seed", range(30))
def test_raycast_fill(cy, seed):
    rng = np.random.default_rng(seed)
    cells, sx, sy = grid2(rng)
    n, rng_ = int(rng.integers(1, 400)), float(rng.choice([math.inf, rng.uniform(1, 30)]))
    (rp, ap), (rc, ac) = both("raycast_fill", cy, cells, sx, sy, n, rng_, np.zeros_like(cells), fresh=(5,))
    assert rp == rc and np.array_equal(ap[5], ac[5])


@pytest.mark.parametrize("seed", range(20))
def test_los_fill(cy, seed):
    rng = np.random.default_rng(seed)
    cells, sx, sy = grid2(rng, (2, 20))
    (_, ap), (_, ac) = both("los_fill", cy, cells, sx, sy, np.zeros_like(cells), fresh=(3,))
    assert np.array_equal(ap[3], ac[3])


@pytest.mark.parametrize("seed", range(20))
def test_integrate_rays(cy, seed):
    rng = np.random.default_rng(seed)
    cells = np.full((16, 16, 8), 2, np.uint8)
    origin = rng.uniform([2, 2, 2], [14, 14, 6])
    ends = np.ascontiguousarray(origin + rng.normal(size=(200, 3)) * 6)
    hit = (rng.random(200) < 0.5).astype(np.uint8)
    (_, ap), (_, ac) = both("integrate_rays", cy, cells, origin, ends, hit, fresh=(0,))
    assert np.array_equal(ap[0], ac[0])


@pytest.mark.parametrize("seed", range(20))
def test_cuboid_footprint_and_gain(cy, seed):
    rng = np.random.default_rng(seed)
    cells = grid3(rng)
    mask = np.zeros((12, 10), np.uint8)
    args = (0.0, 0.0, 0.2, 3, 4, 1.6, 1.8, *np.array([math.cos(seed), math.sin(seed)]), 0.9, 0.7)
    (_, mp), (_, mc) = both("cuboid_footprint", cy, mask, *args, fresh=(0,))
    assert np.array_equal(mp[0], mc[0])
    m = mp[0]
    srcs = np.array([(5, 4), (6, 6)], dtype=np.intc)
    (rp, vp), (rc, vc) = both("cuboid_gain", cy, cells, 3, 4, 1, 6, m, srcs, np.zeros_like(m), fresh=(7,))
    assert rp == rc and np.array_equal(vp[7], vc[7])


@pytest.mark.parametrize("seed", range(20))
def test_raycast_gain(cy, seed):
    rng = np.random.default_rng(seed)
    cells = grid3(rng)
    sx, sy = 6, 7
    cells[3 + sx, 2 + sy, :] = 0
    vis = np.zeros((14, 15), np.uint8)
    n = int(rng.choice([0, 8, 64]))
    (rp, vp), (rc, vc) = both("raycast_gain", cy, cells, 3, 2, 0, 7, sx, sy, 4.5, 7.5, n, vis, fresh=(10,))
    assert rp == rc and np.array_equal(vp[10], vc[10])


@pytest.mark.parametrize("seed", range(30))
def test_edge_and_ball_gain_from_cells(cy, seed):
    rng = np.random.default_rng(seed)
    cells = grid3(rng, (30, 30, 12))
    o = (0.0, 0.0, 0.0)
    a = rng.uniform(0.5, 5.5, 3)
    b = a + rng.normal(size=3)
    d = b[:2] - a[:2]
    length = float(np.linalg.norm(b - a))
    ux, uy = d / max(np.linalg.norm(d), 1e-12)
    args = (cells, *o, 0.2, *a, *b, length, ux, uy, 1.5, float(rng.choice([0.5, 2.0])))
    assert PY.edge_gain_cells(*args) == cy.edge_gain_cells(*args)
    args = (cells, *o, 0.2, *a, 1.5, int(rng.choice([0, 16])))
    assert PY.raycast_gain_cells(*args) == cy.raycast_gain_cells(*args)


@pytest.mark.parametrize("seed", range(30))
def test_segment_clear_and_sweep_steps(cy, seed):
    rng = np.random.default_rng(seed)
    cells = (rng.random((20, 20, 10)) < 0.03).astype(np.uint8)
    a = list(rng.uniform(0, 20, 3) * [1, 1, 0.5])
    b = list(rng.uniform(0, 20, 3) * [1, 1, 0.5])
    n = PY.sweep_steps(*a, *b)
    assert n == cy.sweep_steps(*a, *b)
    half = [1.5, 1.5, 1.25]
    assert PY.segment_clear(cells, a, b, half, n) == cy.segment_clear(cells, a, b, half, n)


@pytest.mark.parametrize("seed", range(20))
def test_ray_boxes_nearest(cy, seed):
    rng = np.random.default_rng(seed)
    lo = rng.uniform(0, 9, (8, 3))
    hi = lo + rng.uniform(0.1, 2, (8, 3))
    dirs = rng.normal(size=(100, 3))
    dirs[:10, 2] = 0.0  # parallel to a slab
    dirs /= np.linalg.norm(dirs, axis=1)[:, None]
    origin = rng.uniform(0, 10, 3)
    assert np.array_equal(PY.ray_boxes_nearest(origin, dirs, lo, hi), cy.ray_boxes_nearest(origin, dirs, lo, hi))


@pytest.mark.parametrize("seed", range(20))
def test_nearest_and_extend(cy, seed):
    rng = np.random.default_rng(seed)
    cells = (rng.random((30, 30, 12)) < 0.02).astype(np.uint8)
    pos = np.ascontiguousarray(rng.uniform(1, 5, (10, 3)))
    pos[3] = pos[7]  # duplicate: first index wins
    q = rng.uniform(1, 5, 3)
    assert PY.nearest(pos, 10, *q) == cy.nearest(pos, 10, *q)
    args = (
        cells, pos, 10, rng.random(3), np.zeros(3), np.array([6.0, 6.0, 2.4]), 1.5,
        np.zeros(3), 0.2, np.array([1.5, 1.5, 1.25]),
    )
    assert PY.extend(*args) == cy.extend(*args)
