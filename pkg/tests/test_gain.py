from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shadownbv.fov import los_oracle, raycast_visible, rsc_visible
from shadownbv.gain import (
    EdgeGain,
    EdgeGainParams,
    edge_cuboid,
    edge_gain,
    fov_sources,
    node_gain,
    raycast_node_gain,
)
from shadownbv.grid_map import Box, CellState, Grid2D, MapError, OccupancyMap

FREE, OCC, UNK = CellState.FREE, CellState.OCCUPIED, CellState.UNKNOWN


def cuboid_window(m: OccupancyMap, a, b, I_range, l_max):
    """Voxel index window, footprint mask and source cells of an edge cuboid, by voxel-centre enumeration."""
    box = edge_cuboid(a, b, I_range)
    srcs = [m.index_of(s) for s in fov_sources(a, b, l_max)]
    r = m.resolution
    centres = [m.origin[ax] + (np.arange(m.shape[ax]) + 0.5) * r for ax in range(3)]
    fp_full = box.footprint(centres[0], centres[1])
    for s in srcs:
        fp_full[s[0], s[1]] = True
    xs, ys = np.nonzero(fp_full.any(axis=1))[0], np.nonzero(fp_full.any(axis=0))[0]
    zs = np.nonzero(np.abs(centres[2] - box.center[2]) <= box.half_h + 1e-9)[0]
    return box, srcs, fp_full, (xs[0], xs[-1]), (ys[0], ys[-1]), zs


def reference_edge_count(m: OccupancyMap, a, b, I_range, l_max):
    """Unknown voxels in the cuboid that masked shadowcasting sees from any source, slice by slice."""
    _, srcs, fp, (x0, x1), (y0, y1), zs = cuboid_window(m, a, b, I_range, l_max)
    fp = fp[x0 : x1 + 1, y0 : y1 + 1]
    total = 0
    for k in zs:
        layer = np.ascontiguousarray(m.cells[x0 : x1 + 1, y0 : y1 + 1, k])
        seen = np.zeros(layer.shape, dtype=bool)
        for s in srcs:
            src = (s[0] - x0, s[1] - y0)
            if layer[src] == OCC:
                continue
            seen |= rsc_visible(Grid2D(layer, src), fp).visible
        total += int(np.count_nonzero(seen & fp & (layer == UNK)))
    return total


def _los_masked(g, mask):
    # line of sight restricted to the cuboid: cells outside are made transparent
    cells = np.where(mask, g.cells, FREE).astype(np.uint8)
    return los_oracle(Grid2D(cells, g.source))


# -- sources -----------------------------------------------------------------------------


def test_short_edge_one_source_at_midpoint():
    s = fov_sources((0, 0, 1), (1, 0, 1), 4.0)
    assert len(s) == 1 and np.allclose(s[0], (0.5, 0, 1))


def test_nine_metre_edge_three_sources():
    s = fov_sources((0, 0, 0), (9, 0, 0), 4.0)
    assert np.allclose([p[0] for p in s], [1.5, 4.5, 7.5])


def test_zero_length_edge_source_at_node():
    s = fov_sources((2, 3, 1), (2, 3, 1), 1.0)
    assert len(s) == 1 and np.array_equal(s[0], (2, 3, 1))


@given(L=st.floats(0.0, 30.0), l_max=st.floats(0.1, 5.0))
def test_sources_cover_edge_in_equal_short_pieces(L, l_max):
    s = fov_sources((0, 0, 0), (L, 0, 0), l_max)
    k = len(s)
    assert k == (1 if L <= l_max else math.ceil(L / l_max - 1e-9))
    piece = L / k
    assert piece <= l_max + 1e-9
    assert np.allclose([p[0] for p in s], [(i + 0.5) * piece for i in range(k)])


# -- edge gain -----------------------------------------------------------------------------


def test_fully_explored_cuboid_gives_zero():
    m = OccupancyMap(Box((0, 0, 0), (10, 10, 3)), 0.2)
    m.fill(FREE)
    g = edge_gain(m, (4, 5, 1.5), (5, 5, 1.5), EdgeGainParams(2.0, 2.0, 0.3, 0.2))
    assert g.gain == 0.0 and g.fov_source_count == 1


@pytest.mark.parametrize(
    "a, b, I_range",
    [((4.1, 5.1, 1.5), (5.3, 5.1, 1.5), 2.0), ((3.0, 3.0, 1.0), (4.0, 4.2, 1.4), 1.5), ((5, 5, 1), (5, 5, 1), 1.0)],
)
def test_unknown_empty_cuboid_counts_every_voxel(a, b, I_range):
    m = OccupancyMap(Box((0, 0, 0), (10, 10, 3)), 0.2)
    g = edge_gain(m, a, b, EdgeGainParams(I_range, 2.0, 0.3, 0.2))
    _, _, fp, _, _, zs = cuboid_window(m, a, b, I_range, 2.0)
    assert g.gain == pytest.approx(np.count_nonzero(fp) * len(zs) * m.voxel_volume, rel=0, abs=1e-12)


def test_wall_hides_far_side_of_cuboid():
    m = OccupancyMap(Box((0, 0, 0), (10, 10, 3)), 0.2)
    m.fill(OCC, Box((6.0, 0, 0), (6.2, 10, 3)))
    a, b = (4.1, 5.1, 1.5), (5.1, 5.1, 1.5)
    g = edge_gain(m, a, b, EdgeGainParams(2.5, 2.0, 0.3, 0.2))
    _, _, fp, _, _, zs = cuboid_window(m, a, b, 2.5, 2.0)
    xs = (np.arange(m.shape[0]) + 0.5) * 0.2
    near = fp & (xs < 6.0)[:, None]
    assert g.gain == pytest.approx(np.count_nonzero(near) * len(zs) * m.voxel_volume, abs=1e-12)
    # per-slice centre line of sight is a lower bound
    los = 0
    _, srcs, fpw, (x0, x1), (y0, y1), zs = cuboid_window(m, a, b, 2.5, 2.0)
    mask = fpw[x0 : x1 + 1, y0 : y1 + 1]
    for k in zs:
        layer = np.ascontiguousarray(m.cells[x0 : x1 + 1, y0 : y1 + 1, k])
        seen = np.zeros(layer.shape, bool)
        for s in srcs:
            seen |= _los_masked(Grid2D(layer, (s[0] - x0, s[1] - y0)), mask).visible
        los += np.count_nonzero(seen & mask & (layer == UNK))
    assert g.gain >= los * m.voxel_volume - 1e-12


def _random_explored_map(rng):
    m = OccupancyMap(Box((0, 0, 0), (8, 7, 2.4)), 0.2)
    m.cells[...] = rng.choice([FREE, OCC, UNK], size=m.shape, p=[0.5, 0.1, 0.4]).astype(np.uint8)
    return m


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_edge_gain_matches_slice_by_slice_reference(seed):
    rng = np.random.default_rng(seed)
    m = _random_explored_map(rng)
    a = rng.uniform([0.1, 0.1, 0.1], [7.9, 6.9, 2.3])
    b = np.clip(a + rng.uniform(-4, 4, 3), [0.05] * 3, [7.95, 6.95, 2.35])
    I_range, l_max = float(rng.uniform(0.5, 4)), float(rng.uniform(0.4, 3))
    g = edge_gain(m, a, b, EdgeGainParams(I_range, l_max, 0.3, 0.2))
    assert g.fov_source_count == len(fov_sources(a, b, l_max))
    assert g.gain == reference_edge_count(m, a, b, I_range, l_max) * m.voxel_volume


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_edge_gain_bounded_by_unknown_in_cuboid(seed):
    rng = np.random.default_rng(seed)
    m = _random_explored_map(rng)
    a = rng.uniform([0.1, 0.1, 0.1], [7.9, 6.9, 2.3])
    b = np.clip(a + rng.uniform(-2, 2, 3), 0.05, [7.95, 6.95, 2.35])
    I_range = float(rng.uniform(0.5, 3))
    g = edge_gain(m, a, b, EdgeGainParams(I_range, 2.0, 0.3, 0.2))
    _, _, fp, _, _, zs = cuboid_window(m, a, b, I_range, 2.0)
    present = np.count_nonzero((m.cells[:, :, zs] == UNK) & fp[:, :, None])
    assert 0 <= g.gain <= present * m.voxel_volume + 1e-12
    assert edge_gain(m, a, b, EdgeGainParams(I_range, 2.0, 0.3, 0.2)).gain == g.gain


def test_endpoint_outside_map_rejected():
    m = OccupancyMap(Box((0, 0, 0), (4, 4, 2)), 0.2)
    with pytest.raises(MapError):
        edge_gain(m, (1, 1, 1), (5, 1, 1), EdgeGainParams(2, 2, 0.3, 0.2))


@pytest.mark.parametrize("kw", [dict(I_range=0), dict(l_max=-1), dict(lam=-0.1)])
def test_bad_params_rejected(kw):
    base = dict(I_range=1.0, l_max=1.0, lam=0.1, r=0.2)
    base.update(kw)
    with pytest.raises(ValueError):
        EdgeGainParams(**base)


# -- node gain recursion ----------------------------------------------------------------------


def test_zero_edge_gain_keeps_parent():
    assert node_gain(7.5, EdgeGain(0, 0.0, 1), 3.0, 0.4) == 7.5


def test_no_distance_penalty():
    assert node_gain(10.0, 8.0, 5.0, 0.0) == 18.0


def test_weighted_increment():
    assert node_gain(10.0, 8.0, 2.0, 0.25) == pytest.approx(10 + 8 * math.exp(-0.5), rel=1e-15)


def test_negative_inputs_rejected():
    with pytest.raises(ValueError):
        node_gain(0, 1, -1, 0.1)
    with pytest.raises(ValueError):
        node_gain(0, 1, 1, -0.1)


@given(
    gains=st.lists(st.floats(0, 1e3), min_size=1, max_size=12),
    dists=st.lists(st.floats(0, 5), min_size=12, max_size=12),
    lam=st.floats(0, 3),
    c=st.floats(0.01, 100),
)
def test_chain_is_monotone_and_linear(gains, dists, lam, c):
    I, Ic = 0.0, 0.0
    for g, d in zip(gains, dists):
        nxt = node_gain(I, g, d, lam)
        assert nxt >= I
        I = nxt
        Ic = node_gain(Ic, c * g, d, lam)
    assert Ic == pytest.approx(c * I, rel=1e-12, abs=1e-300)


def test_large_lambda_kills_increments():
    assert node_gain(0.0, 1.0, 1.0, 50.0) < 1e-18 * 1.0


# -- raycast node gain -----------------------------------------------------------------------------


def reference_ball_count(m, p, d_max, n_rays=None):
    """Unknown cells hit by rays on each voxel layer of the ball, via map slices."""
    r = m.resolution
    k0 = m.index_of(p)[2]
    total = 0
    for k in range(m.shape[2]):
        zc = m.origin[2] + (k + 0.5) * r
        if abs(zc - p[2]) > d_max + 1e-9:
            continue
        rad = math.sqrt(max((d_max / r) ** 2 - ((zc - p[2]) / r) ** 2, 0.0))
        g = m.slice(p, d_max, d_max, zc)
        if g.cells[g.source] == OCC or not (g.cells == UNK).any():
            continue
        rays = n_rays if n_rays else max(8, math.ceil(2 * math.pi * rad))
        v = raycast_visible(g, rays, rad)
        total += int(np.count_nonzero(v.visible & (g.cells == UNK)))
    assert k0 is not None
    return total


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n_rays=st.sampled_from([None, 16, 360]))
def test_raycast_gain_matches_slice_reference(seed, n_rays):
    rng = np.random.default_rng(seed)
    m = _random_explored_map(rng)
    p = rng.uniform([0.1, 0.1, 0.1], [7.9, 6.9, 2.3])
    d = float(rng.uniform(0.3, 2.5))
    gain, reads = raycast_node_gain(m, p, d, n_rays)
    assert gain == reference_ball_count(m, p, d, n_rays) * m.voxel_volume
    assert reads >= 0


def test_raycast_gain_zero_when_explored_and_rejects_outside():
    m = OccupancyMap(Box((0, 0, 0), (4, 4, 2)), 0.2)
    m.fill(FREE)
    assert raycast_node_gain(m, (2, 2, 1), 1.5)[0] == 0.0
    with pytest.raises(MapError):
        raycast_node_gain(m, (5, 2, 1), 1.5)
