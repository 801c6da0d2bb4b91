"""Field-of-view on 2D grids: recursive shadowcasting, fixed-ray casting and an exact LOS oracle."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from shadownbv import kernels
from shadownbv.grid_map import CellState, Grid2D


class FovError(ValueError):
    pass


@dataclass
class VisibleSet:
    """Boolean visibility over a :class:`Grid2D` plus tallies by cell state."""

    visible: np.ndarray
    grid: Grid2D
    reads: int = 0

    @property
    def n_unknown(self) -> int:
        return int(np.count_nonzero(self.visible & (self.grid.cells == CellState.UNKNOWN)))

    @property
    def n_free(self) -> int:
        return int(np.count_nonzero(self.visible & (self.grid.cells == CellState.FREE)))

    @property
    def n_visible(self) -> int:
        return int(np.count_nonzero(self.visible))

    def render(self) -> str:
        """ASCII dump, top row = largest y: ``S`` source, ``.`` visible, ``#`` hidden, ``X`` occupied."""
        cells = self.grid.cells
        w, h = cells.shape
        sx, sy = self.grid.source
        rows = []
        for y in range(h - 1, -1, -1):
            row = []
            for x in range(w):
                if (x, y) == (sx, sy):
                    row.append("S")
                elif cells[x, y] == CellState.OCCUPIED:
                    row.append("X")
                else:
                    row.append("." if self.visible[x, y] else "#")
            rows.append("".join(row))
        return "\n".join(rows) + "\n"


def _check_source(grid: Grid2D, allow_occupied: bool = True):
    sx, sy = grid.source
    w, h = grid.cells.shape
    if not (0 <= sx < w and 0 <= sy < h):
        raise FovError(f"source {grid.source} outside {w}x{h} grid")
    if not allow_occupied and grid.cells[sx, sy] == CellState.OCCUPIED:
        raise FovError(f"source {grid.source} is occupied")


def rsc_visible(grid: Grid2D, mask: np.ndarray | None = None) -> VisibleSet:
    """Recursive shadowcasting over the eight octants around the source.

    Only Occupied cells block; a cell touched by any boundary ray counts as
    visible. With ``mask``, cells outside it are skipped and do not block.
    """
    _check_source(grid, allow_occupied=False)
    cells = np.ascontiguousarray(grid.cells, dtype=np.uint8)
    vis = np.zeros(cells.shape, dtype=np.uint8)
    if mask is not None:
        mask = np.ascontiguousarray(mask, dtype=np.uint8)
    sx, sy = grid.source
    reads = kernels.rsc_fill(cells, sx, sy, vis, mask)
    return VisibleSet(vis.astype(bool), grid, int(reads))


def default_ray_count(grid: Grid2D, max_range: float | None = None) -> int:
    """Rays needed so neighbours are at most one cell apart where they stop.

    The stopping radius is the farthest grid corner from the source centre,
    capped by ``max_range``.
    """
    w, h = grid.cells.shape
    sx, sy = grid.source
    far = max(
        math.hypot(cx - (sx + 0.5), cy - (sy + 0.5)) for cx in (0, w) for cy in (0, h)
    )
    if max_range is not None:
        far = min(far, max_range)
    return max(8, int(math.ceil(2 * math.pi * far)))


def raycast_visible(grid: Grid2D, n_rays: int | None = None, max_range: float | None = None) -> VisibleSet:
    """March ``n_rays`` evenly spaced rays from the source centre until Occupied or ``max_range`` cells."""
    _check_source(grid)
    cells = np.ascontiguousarray(grid.cells, dtype=np.uint8)
    if n_rays is None:
        n_rays = default_ray_count(grid, max_range)
    if max_range is None:
        max_range = math.inf
    vis = np.zeros(cells.shape, dtype=np.uint8)
    sx, sy = grid.source
    reads = kernels.raycast_fill(cells, sx, sy, int(n_rays), float(max_range), vis)
    return VisibleSet(vis.astype(bool), grid, int(reads))


def los_oracle(grid: Grid2D) -> VisibleSet:
    """Exact centre-to-centre line of sight; a target is visible unless the open segment enters an Occupied interior."""
    _check_source(grid)
    cells = np.ascontiguousarray(grid.cells, dtype=np.uint8)
    vis = np.zeros(cells.shape, dtype=np.uint8)
    sx, sy = grid.source
    kernels.los_fill(cells, sx, sy, vis)
    return VisibleSet(vis.astype(bool), grid, 0)
