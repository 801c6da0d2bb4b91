from __future__ import annotations

import numpy as np
import pytest

from shadownbv import kernels
from shadownbv.grid_map import Box, CellState, OccupancyMap
from shadownbv.world import ground_truth_blocked


def _available_backends():
    out = ["python"]
    try:
        kernels.backend("cython")
    except ImportError:
        pass
    else:
        out.append("cython")
    return out


BACKENDS = _available_backends()


@pytest.fixture(params=BACKENDS)
def kern(request):
    """Each kernel backend in turn."""
    return kernels.backend(request.param)


def known_map(world, r: float) -> OccupancyMap:
    """Fully explored map of ``world``: blocked voxels Occupied, the rest Free."""
    m, blocked = ground_truth_blocked(world, r)
    m.cells[...] = np.where(blocked, CellState.OCCUPIED, CellState.FREE).astype(np.uint8)
    return m


def free_map(size=(4.0, 4.0, 2.0), r: float = 0.2) -> OccupancyMap:
    m = OccupancyMap(Box((0, 0, 0), size), r)
    m.fill(CellState.FREE)
    return m
