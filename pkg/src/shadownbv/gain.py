"""Information gain of tree edges (shadowcasting over an edge cuboid) and of nodes (raycast baseline)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from shadownbv import kernels
from shadownbv.grid_map import MapError, OccupancyMap, _snap


@dataclass(frozen=True)
class EdgeGainParams:
    I_range: float
    l_max: float
    lam: float
    r: float

    def __post_init__(self):
        if not self.I_range > 0:
            raise ValueError("I_range must be positive")
        if not self.l_max > 0:
            raise ValueError("l_max must be positive")
        if self.lam < 0:
            raise ValueError("lambda must be non-negative")


@dataclass
class EdgeGain:
    edge_id: int
    gain: float
    fov_source_count: int
    reads: int = 0


def fov_sources(n_prev, n_k, l_max: float) -> list[np.ndarray]:
    """Midpoints of the fewest equal sub-segments no longer than ``l_max``."""
    if not l_max > 0:
        raise ValueError("l_max must be positive")
    a = np.asarray(n_prev, dtype=float)
    b = np.asarray(n_k, dtype=float)
    length = float(np.linalg.norm(b - a))
    if length <= l_max:
        return [(a + b) / 2.0]
    m = math.ceil(_snap(length / l_max))
    return [a + (b - a) * ((i + 0.5) / m) for i in range(m)]


@dataclass
class Cuboid:
    """Evaluation box around an edge: ``half_len`` along the edge heading, ``half_w`` across it."""

    center: np.ndarray
    heading: np.ndarray  # unit xy vector along the edge
    half_len: float
    half_w: float
    half_h: float

    def footprint(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        dx = xs[:, None] - self.center[0]
        dy = ys[None, :] - self.center[1]
        ux, uy = self.heading
        along = np.abs(dx * ux + dy * uy)
        across = np.abs(-dx * uy + dy * ux)
        tol = 1e-9
        return (along <= self.half_len + tol) & (across <= self.half_w + tol)


def edge_cuboid(n_prev, n_k, I_range: float) -> Cuboid:
    a = np.asarray(n_prev, dtype=float)
    b = np.asarray(n_k, dtype=float)
    d = b - a
    horiz = math.hypot(d[0], d[1])
    heading = np.array([d[0] / horiz, d[1] / horiz]) if horiz > 0 else np.array([1.0, 0.0])
    return Cuboid((a + b) / 2.0, heading, float(np.linalg.norm(d)) / 2.0, I_range, I_range)


def edge_gain(m: OccupancyMap, n_prev, n_k, params: EdgeGainParams, edge_id: int = 0) -> EdgeGain:
    """Volume of Unknown voxels in the edge cuboid seen by shadowcasting from the edge's FOV sources.

    Each voxel layer whose centre lies in the cuboid's vertical span is a
    separate 2D grid; visible cells are unioned over sources per layer. The
    cuboid and sources are those of :func:`edge_cuboid` and :func:`fov_sources`.
    """
    ax, ay, az = (float(v) for v in n_prev)
    bx, by, bz = (float(v) for v in n_k)
    dx, dy = bx - ax, by - ay
    length = float(np.linalg.norm([dx, dy, bz - az]))
    horiz = math.hypot(dx, dy)
    ux, uy = (dx / horiz, dy / horiz) if horiz > 0 else (1.0, 0.0)
    o = m._o
    count, n_src, reads = kernels.edge_gain_cells(
        m.cells, o[0], o[1], o[2], m.resolution, ax, ay, az, bx, by, bz,
        length, ux, uy, float(params.I_range), float(params.l_max),
    )
    if n_src < 0:
        raise MapError(f"edge endpoint outside map: {[ax, ay, az]} -> {[bx, by, bz]}")
    return EdgeGain(edge_id, count * m.voxel_volume, n_src, int(reads))


def node_gain(I_prev: float, edge: EdgeGain | float, dist: float, lam: float) -> float:
    """Accumulated gain: parent gain plus this edge's gain discounted by ``exp(-lam * dist)``."""
    if dist < 0 or lam < 0:
        raise ValueError("dist and lambda must be non-negative")
    g = edge.gain if isinstance(edge, EdgeGain) else float(edge)
    return I_prev + g * math.exp(-lam * dist)


def raycast_node_gain(m: OccupancyMap, p, d_max: float, n_rays: int | None = None) -> tuple[float, int]:
    """Unknown volume hit by fixed-count rays cast in every layer of the radius-``d_max`` ball around ``p``.

    Returns ``(gain m^3, cell reads)``. ``n_rays`` defaults to one cell of
    spacing at the disc rim; callers may raise it to a sensor's ray count.
    """
    o = m._o
    count, reads = kernels.raycast_gain_cells(
        m.cells, o[0], o[1], o[2], m.resolution, float(p[0]), float(p[1]), float(p[2]),
        float(d_max), int(n_rays or 0),
    )
    if count < 0:
        raise MapError(f"node {list(p)} outside map")
    return count * m.voxel_volume, int(reads)
