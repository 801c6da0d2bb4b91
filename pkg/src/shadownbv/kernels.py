"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the pure-Python
twin is loaded. Set ``SHADOWNBV_KERNELS=python`` to force the fallback.
"""

from __future__ import annotations

import os

from shadownbv import _pykernels

FREE = _pykernels.FREE
OCCUPIED = _pykernels.OCCUPIED
UNKNOWN = _pykernels.UNKNOWN


def _load():
    if os.environ.get("SHADOWNBV_KERNELS", "").lower() == "python":
        return _pykernels, "python"
    try:
        from shadownbv import _ckernels
    except ImportError:
        return _pykernels, "python"
    return _ckernels, "cython"


_impl, BACKEND = _load()

rsc_fill = _impl.rsc_fill
raycast_fill = _impl.raycast_fill
los_fill = _impl.los_fill
integrate_rays = _impl.integrate_rays
cuboid_footprint = _impl.cuboid_footprint
cuboid_gain = _impl.cuboid_gain
raycast_gain = _impl.raycast_gain
segment_clear = _impl.segment_clear
ray_boxes_nearest = _impl.ray_boxes_nearest
nearest = _impl.nearest
extend = _impl.extend
sweep_steps = _impl.sweep_steps
edge_gain_cells = _impl.edge_gain_cells
raycast_gain_cells = _impl.raycast_gain_cells


def backend(name: str):
    """Return the kernel module named ``"python"`` or ``"cython"``."""
    if name == "python":
        return _pykernels
    if name == "cython":
        from shadownbv import _ckernels

        return _ckernels
    raise ValueError(f"unknown kernel backend {name!r}")
