from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shadownbv.grid_map import Box, CellState, Grid2D, MapError, OccupancyMap

from conftest import free_map

FREE, OCC, UNK = CellState.FREE, CellState.OCCUPIED, CellState.UNKNOWN


# -- oracles -------------------------------------------------------------------


def prism_free_oracle(m: OccupancyMap, p, dims) -> bool:
    """Enumerate every voxel; any non-Free voxel whose open box meets the open prism blocks.

    Faces closer than 1e-9 voxel count as touching, not overlapping.
    """
    r = m.resolution
    eps = 1e-9 * r
    p = np.asarray(p, float)
    lo = p - np.asarray(dims) / 2 - m.origin
    hi = p + np.asarray(dims) / 2 - m.origin
    ext = np.asarray(m.shape) * r
    if np.any(lo < -eps) or np.any(hi > ext + eps):
        return False
    for idx in np.argwhere(m.cells != FREE):
        vlo, vhi = idx * r, (idx + 1) * r
        if np.all((vlo < hi - eps) & (vhi > lo + eps)):
            return False
    return True


def ray_voxels_oracle(m: OccupancyMap, a, b, step=1e-4):
    """Voxels met by dense sampling of the segment ``a -> b``, endpoint voxel excluded."""
    a, b = np.asarray(a, float), np.asarray(b, float)
    n = int(np.ceil(np.linalg.norm(b - a) / (step * m.resolution)))
    end = m.index_of(b)
    out = set()
    for t in np.linspace(0, 1, n + 1):
        idx = m.index_of(a + (b - a) * t)
        if idx is not None and idx != end:
            out.add(idx)
    return out, end


# -- construction ----------------------------------------------------------------


def test_apartment_bounds_quantize_to_25_50_8():
    m = OccupancyMap(Box((0, 0, 0), (10, 20, 3)), 0.4)
    assert m.shape == (25, 50, 8)
    assert np.all(m.cells == UNK)


def test_single_voxel_map():
    m = OccupancyMap(Box((0, 0, 0), (1, 1, 1)), 1.0)
    assert m.shape == (1, 1, 1)
    assert m.state_at((0.5, 0.5, 0.5)) == UNK


def test_two_metre_cube_at_half_metre():
    m = OccupancyMap(Box((0, 0, 0), (2, 2, 2)), 0.5)
    assert m.cells.size == 64
    assert m.unknown_volume() == 8.0


@pytest.mark.parametrize("r", [0.0, -0.2])
def test_non_positive_resolution_rejected(r):
    with pytest.raises(MapError):
        OccupancyMap(Box((0, 0, 0), (1, 1, 1)), r)


def test_bounds_smaller_than_voxel_rejected():
    with pytest.raises(MapError):
        OccupancyMap(Box((0, 0, 0), (1, 0.1, 1)), 0.2)


@given(
    ext=st.tuples(*[st.floats(0.3, 6.0)] * 3),
    r=st.sampled_from([0.1, 0.2, 0.25, 0.4, 0.5]),
)
def test_cell_count_is_ceil_extent_over_r(ext, r):
    if min(ext) < r:
        return
    m = OccupancyMap(Box((0, 0, 0), ext), r)
    for n, e in zip(m.shape, ext):
        q = e / r
        want = round(q) if abs(q - round(q)) < 1e-9 else math.ceil(q)
        assert n == want


# -- scan integration ----------------------------------------------------------------


def test_hit_two_metres_ahead_frees_four_and_occupies_one():
    m = OccupancyMap(Box((0, 0, 0), (5, 1, 1)), 0.5)
    m.integrate_scan((0.25, 0.25, 0.25), [(2.25, 0.25, 0.25)], [], 20.0)
    assert [int(c) for c in m.cells[:, 0, 0]] == [FREE] * 4 + [OCC] + [UNK] * 5
    assert m.count_state(FREE) == 4 and m.count_state(OCC) == 1


def test_miss_ray_frees_up_to_max_range_only():
    m = OccupancyMap(Box((0, 0, 0), (5, 1, 1)), 0.5)
    m.integrate_scan((0.25, 0.25, 0.25), [], [(1, 0, 0)], 2.0)
    assert m.count_state(OCC) == 0
    free = {tuple(i) for i in np.argwhere(m.cells == FREE)}
    assert free == {(i, 0, 0) for i in range(5)}


@pytest.mark.parametrize("order", [(0, 1), (1, 0)])
def test_occupied_latches_over_free_within_a_scan(order):
    m = OccupancyMap(Box((0, 0, 0), (5, 1, 1)), 0.5)
    # one ray ends in the voxel at x=1.25, the other passes through it to x=3.25
    hits = np.array([(1.25, 0.25, 0.25), (3.25, 0.25, 0.25)])[list(order)]
    m.integrate_scan((0.25, 0.25, 0.25), hits, [], 4.0)
    assert m.state_at((1.25, 0.25, 0.25)) == OCC
    assert m.state_at((2.25, 0.25, 0.25)) == FREE
    assert m.state_at((3.25, 0.25, 0.25)) == OCC


def test_newer_scan_wins_across_scans_but_never_back_to_unknown():
    m = OccupancyMap(Box((0, 0, 0), (5, 1, 1)), 0.5)
    m.integrate_scan((0.25, 0.25, 0.25), [(1.25, 0.25, 0.25)], [], 20.0)
    assert m.state_at((1.25, 0.25, 0.25)) == OCC
    m.integrate_scan((0.25, 0.25, 0.25), [], [(1, 0, 0)], 4.0)
    assert m.state_at((1.25, 0.25, 0.25)) == FREE
    m.integrate_scan((0.25, 0.25, 0.25), [], [], 4.0)
    assert m.count_state(UNK) == m.cells.size - 9


def test_scan_origin_outside_rejected():
    m = OccupancyMap(Box((0, 0, 0), (1, 1, 1)), 0.5)
    with pytest.raises(MapError):
        m.integrate_scan((2, 0.5, 0.5), [], [(1, 0, 0)], 1.0)


def test_random_rays_match_dense_sampling_oracle():
    rng = np.random.default_rng(5)
    for _ in range(30):
        m = OccupancyMap(Box((0, 0, 0), (4, 3, 2)), 0.25)
        o = rng.uniform([0.1, 0.1, 0.1], [3.9, 2.9, 1.9])
        hit = rng.uniform([0.1, 0.1, 0.1], [3.9, 2.9, 1.9])
        m.integrate_scan(o, [hit], [], 10.0)
        free, end = ray_voxels_oracle(m, o, hit)
        got_free = {tuple(int(v) for v in i) for i in np.argwhere(m.cells == FREE)}
        assert got_free == free
        if end is not None:
            assert m.cells[end] == OCC


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_unknown_never_increases_and_rescan_is_idempotent(seed):
    rng = np.random.default_rng(seed)
    m = OccupancyMap(Box((0, 0, 0), (3, 3, 2)), 0.2)
    prev = m.unknown_volume()
    for _ in range(4):
        o = rng.uniform([0.2, 0.2, 0.2], [2.8, 2.8, 1.8])
        hits = rng.uniform(0, [3, 3, 2], size=(rng.integers(0, 8), 3))
        misses = rng.normal(size=(rng.integers(0, 8), 3))
        m.integrate_scan(o, hits, misses, float(rng.uniform(0.5, 4)))
        u = m.unknown_volume()
        assert u <= prev
        prev = u
        # partition and exact quantization
        assert sum(m.count_state(s) for s in CellState) == m.cells.size
        assert m.unknown_volume() == np.count_nonzero(m.cells == UNK) * m.voxel_volume


def test_identical_scan_twice_gives_identical_map():
    rng = np.random.default_rng(1)
    m = OccupancyMap(Box((0, 0, 0), (3, 3, 2)), 0.2)
    o = (1.5, 1.5, 1.0)
    hits = rng.uniform(0, [3, 3, 2], size=(30, 3))
    misses = rng.normal(size=(30, 3))
    m.integrate_scan(o, hits, misses, 1.2)
    once = m.cells.copy()
    m.integrate_scan(o, hits, misses, 1.2)
    assert np.array_equal(once, m.cells)


# -- state queries -----------------------------------------------------------------


def test_state_at_fresh_hit_and_outside():
    m = OccupancyMap(Box((0, 0, 0), (2, 2, 2)), 0.5)
    assert m.state_at((1.1, 0.3, 1.7)) == UNK
    m.integrate_scan((0.25, 0.25, 0.25), [(1.3, 0.3, 0.3)], [], 5.0)
    assert m.state_at((1.3, 0.3, 0.3)) == OCC
    assert m.state_at((2.5, 0.3, 0.3)) is None
    assert m.state_at((-0.01, 0.3, 0.3)) is None


# -- slicing ----------------------------------------------------------------------


def test_slice_covering_map_is_full_layer():
    m = OccupancyMap(Box((0, 0, 0), (4, 3, 2)), 0.5)
    m.cells[...] = np.random.default_rng(0).integers(0, 3, m.shape)
    g = m.slice((2.0, 1.5), 10, 10, 0.7)
    assert g.shape == (8, 6)
    assert np.array_equal(g.cells, m.cells[:, :, 1])
    assert g.source == m.index_of((2.0, 1.5, 0.7))[:2]


def test_slice_clipped_at_corner_keeps_source_inside():
    m = OccupancyMap(Box((0, 0, 0), (4, 4, 1)), 0.5)
    g = m.slice((0.3, 3.8), 1.0, 1.0, 0.5)
    # centres within 1 m: x in {0.25, 0.75, 1.25}, y in {3.25, 3.75}
    assert g.offset == (0, 6)
    assert g.shape == (3, 2)
    assert g.source == (0, 1)


def test_slice_half_width_five_at_r02_spans_fifty_cells():
    m = OccupancyMap(Box((0, 0, 0), (20, 20, 1)), 0.2)
    c = (10.1, 10.1)
    g = m.slice(c, 5.0, 5.0, 0.5)
    # voxel-centre enumeration: centres within 5 m of the source centre along each axis
    centres = (np.arange(100) + 0.5) * 0.2
    inside = np.count_nonzero(np.abs(centres - c[0]) <= 5.0 + 1e-9)
    assert g.shape == (inside, inside) == (51, 51)
    sx, _ = g.source
    assert sx == 25 and g.shape[0] - 1 - sx == 25


def test_slice_height_outside_rejected():
    m = OccupancyMap(Box((0, 0, 0), (2, 2, 2)), 0.5)
    with pytest.raises(MapError):
        m.slice((1, 1), 1, 1, 2.5)


@given(
    cx=st.floats(0.05, 5.95), cy=st.floats(0.05, 3.95),
    hw=st.floats(0.0, 4.0), hl=st.floats(0.0, 4.0), z=st.floats(0.01, 1.99),
)
def test_slice_matches_voxel_centre_enumeration(cx, cy, hw, hl, z):
    m = OccupancyMap(Box((0, 0, 0), (6, 4, 2)), 0.4)
    g = m.slice((cx, cy), hw, hl, z)
    src = m.index_of((cx, cy, z))
    xs = [i for i in range(m.shape[0]) if abs((i + 0.5) * 0.4 - cx) <= hw + 1e-9]
    ys = [j for j in range(m.shape[1]) if abs((j + 0.5) * 0.4 - cy) <= hl + 1e-9]
    xs = sorted(set(xs) | {src[0]})
    ys = sorted(set(ys) | {src[1]})
    assert g.offset == (xs[0], ys[0])
    assert g.shape == (xs[-1] - xs[0] + 1, ys[-1] - ys[0] + 1)
    assert (g.offset[0] + g.source[0], g.offset[1] + g.source[1]) == src[:2]


def test_grid_from_ascii_orientation():
    g = Grid2D.from_ascii(
        """
        #..
        .S?
        """
    )
    assert g.shape == (3, 2)
    assert g.source == (1, 0)
    assert g.cells[0, 1] == OCC and g.cells[2, 0] == UNK


# -- collision -----------------------------------------------------------------------


def test_prism_free_in_free_region():
    assert free_map().prism_free((2, 2, 1), (0.6, 0.6, 0.5))


def test_prism_free_false_on_fresh_map():
    m = OccupancyMap(Box((0, 0, 0), (4, 4, 2)), 0.2)
    assert not m.prism_free((2, 2, 1), (0.6, 0.6, 0.5))


def test_prism_corner_voxel_blocks():
    m = free_map()
    p = np.array([2.1, 2.1, 1.05])
    corner = p + np.array([0.29, 0.29, 0.24])
    m.cells[m.index_of(corner)] = OCC
    assert not m.prism_free(p, (0.6, 0.6, 0.5))
    assert prism_free_oracle(m, p, (0.6, 0.6, 0.5)) is False


def test_face_touching_voxel_does_not_block():
    m = free_map()
    # prism spans exactly [1.7, 2.3] in x; the voxel [2.3, 2.5] only touches it
    m.cells[m.index_of((2.4, 2.0, 1.0))] = OCC
    assert m.prism_free((2.0, 2.0, 1.0), (0.6, 0.6, 0.5))


def test_prism_leaving_map_is_not_free():
    assert not free_map().prism_free((0.2, 2, 1), (0.6, 0.6, 0.5))


def _random_map(rng, occ=0.03, unk=0.02):
    m = OccupancyMap(Box((0, 0, 0), (4, 4, 2)), 0.2)
    m.cells[...] = rng.choice([FREE, OCC, UNK], size=m.shape, p=[1 - occ - unk, occ, unk]).astype(np.uint8)
    return m


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 100_000))
def test_prism_free_matches_voxel_overlap_oracle(seed):
    rng = np.random.default_rng(seed)
    m = _random_map(rng, occ=0.004, unk=0.002)
    dims = tuple(rng.uniform(0.1, 0.9, 3))
    p = rng.uniform(0, [4, 4, 2])
    assert m.prism_free(p, dims) == prism_free_oracle(m, p, dims)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 100_000))
def test_segment_free_matches_half_voxel_sampling(seed):
    rng = np.random.default_rng(seed)
    m = _random_map(rng, occ=0.002, unk=0.001)
    dims = (0.6, 0.6, 0.5)
    a = rng.uniform([0.4, 0.4, 0.3], [3.6, 3.6, 1.7])
    b = a + rng.uniform(-1.5, 1.5, 3)
    n = max(1, math.ceil(np.linalg.norm(b - a) / (m.resolution / 2)))
    want = all(prism_free_oracle(m, a + (b - a) * (k / n), dims) for k in range(n + 1))
    assert m.segment_free(a, b, dims) == want


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 100_000))
def test_zero_length_segment_equals_prism_check(seed):
    rng = np.random.default_rng(seed)
    m = _random_map(rng, occ=0.01, unk=0.005)
    p = rng.uniform(0, [4, 4, 2])
    assert m.segment_free(p, p, (0.6, 0.6, 0.5)) == m.prism_free(p, (0.6, 0.6, 0.5))


def test_segment_through_wall_blocked():
    m = free_map()
    m.fill(OCC, Box((1.9, 0, 0), (2.1, 4, 2)))
    assert not m.segment_free((1, 2, 1), (3, 2, 1), (0.6, 0.6, 0.5))
    assert m.segment_free((1, 1, 1), (1, 3, 1), (0.6, 0.6, 0.5))


def test_corridor_exactly_prism_wide():
    # walls leave a 0.6 m gap in y: y in [1.6, 2.2]
    m = free_map((4.0, 4.0, 1.0))
    m.fill(OCC, Box((0, 0, 0), (4, 1.6, 1)))
    m.fill(OCC, Box((0, 2.2, 0), (4, 4, 1)))
    a, b = np.array([0.5, 1.9, 0.5]), np.array([3.5, 1.9, 0.5])
    dims = (0.6, 0.6, 0.5)
    assert m.segment_free(a, b, dims)
    # exhaustive sampling at r/10 agrees
    n = math.ceil(np.linalg.norm(b - a) / (m.resolution / 10))
    assert all(prism_free_oracle(m, a + (b - a) * k / n, dims) for k in range(n + 1))
    assert not m.segment_free(a + [0, 0.05, 0], b + [0, 0.05, 0], dims)


def test_clear_prism_only_touches_unknown():
    m = OccupancyMap(Box((0, 0, 0), (2, 2, 2)), 0.5)
    m.cells[1, 1, 1] = OCC
    m.clear_prism((1.0, 1.0, 1.0), (1.0, 1.0, 1.0))
    assert m.cells[1, 1, 1] == OCC
    assert m.count_state(FREE) == 7


# -- volumes --------------------------------------------------------------------------


def test_unknown_volume_fresh_and_explored():
    m = OccupancyMap(Box((0, 0, 0), (2, 2, 2)), 0.5)
    assert m.unknown_volume(m.bounds) == 8.0
    m.fill(FREE, Box((0, 0, 0), (1, 2, 2)))
    assert m.unknown_volume(Box((0, 0, 0), (1, 2, 2))) == 0.0


def test_half_cleared_layer_is_half_volume():
    m = OccupancyMap(Box((0, 0, 0), (4, 4, 2)), 0.2)
    m.fill(FREE, Box((0, 0, 0), (2, 4, 0.2)))
    layer = Box((0, 0, 0), (4, 4, 0.2))
    full = 4 * 4 * 0.2
    got = m.unknown_volume(layer)
    assert abs(got - full / 2) <= 4 * 0.2 * 0.2 + 1e-12
    direct = np.count_nonzero(m.cells[:, :, 0] == UNK) * m.voxel_volume
    assert got == direct


# -- snapshot ----------------------------------------------------------------------------


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_snapshot_round_trip(seed):
    rng = np.random.default_rng(seed)
    m = OccupancyMap(Box((0.5, -1.0, 0.0), (2.9, 1.6, 1.2)), 0.2)
    m.cells[...] = rng.integers(0, 3, m.shape)
    text = m.to_snapshot()
    back = OccupancyMap.from_snapshot(text)
    assert back.shape == m.shape and back.bounds == m.bounds and back.resolution == m.resolution
    assert np.array_equal(back.cells, m.cells)
    assert back.to_snapshot() == text


def test_snapshot_format_is_stable():
    m = OccupancyMap(Box((0, 0, 0), (1, 1, 0.5)), 0.5)
    m.cells[1, 1, 0] = OCC
    assert m.to_snapshot() == (
        "shadownbv-map 1\n"
        "bounds 0.0 0.0 0.0 1.0 1.0 0.5\n"
        "resolution 0.5\n"
        "shape 2 2 1\n"
        "3U 1O\n"
    )


def test_snapshot_rejects_wrong_magic_and_length():
    with pytest.raises(MapError):
        OccupancyMap.from_snapshot("other 1\nbounds 0 0 0 1 1 1\nresolution 1\nshape 1 1 1\n1U\n")
    with pytest.raises(MapError):
        OccupancyMap.from_snapshot("shadownbv-map 1\nbounds 0 0 0 1 1 1\nresolution 1\nshape 1 1 1\n2U\n")
