"""Uniform 3D occupancy grid with ray integration, slicing and prism collision checks."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum
from typing import Iterable, Sequence

import numpy as np

from shadownbv import kernels

# Hit points are pushed this far (metres) along the ray before voxel lookup so a
# hit lying exactly on a voxel face resolves to the voxel behind the surface.
HIT_NUDGE = 1e-7
_SNAP = 1e-9

SNAPSHOT_MAGIC = "shadownbv-map"
SNAPSHOT_VERSION = 1


class CellState(IntEnum):
    FREE = kernels.FREE
    OCCUPIED = kernels.OCCUPIED
    UNKNOWN = kernels.UNKNOWN


_STATE_CODE = {CellState.FREE: "F", CellState.OCCUPIED: "O", CellState.UNKNOWN: "U"}
_CODE_STATE = {v: k for k, v in _STATE_CODE.items()}


class MapError(ValueError):
    pass


@dataclass(frozen=True)
class Box:
    """Axis-aligned box given by its min and max corners (metres)."""

    lo: tuple[float, float, float]
    hi: tuple[float, float, float]

    def __post_init__(self):
        object.__setattr__(self, "lo", tuple(float(v) for v in self.lo))
        object.__setattr__(self, "hi", tuple(float(v) for v in self.hi))

    @classmethod
    def from_center_size(cls, center: Sequence[float], size: Sequence[float]) -> Box:
        c = np.asarray(center, dtype=float)
        half = np.asarray(size, dtype=float) / 2.0
        return cls(tuple(c - half), tuple(c + half))

    @property
    def size(self) -> np.ndarray:
        return np.subtract(self.hi, self.lo)

    @property
    def center(self) -> np.ndarray:
        return (np.asarray(self.lo) + np.asarray(self.hi)) / 2.0

    @property
    def volume(self) -> float:
        return float(np.prod(self.size))

    def contains(self, p: Sequence[float], strict: bool = False) -> bool:
        p = np.asarray(p, dtype=float)
        if strict:
            return bool(np.all(p > self.lo) and np.all(p < self.hi))
        return bool(np.all(p >= self.lo) and np.all(p <= self.hi))


def _snap(x: float) -> float:
    r = round(x)
    return float(r) if abs(x - r) < _SNAP else x


@dataclass
class Grid2D:
    """A horizontal layer cut out of an :class:`OccupancyMap`.

    ``cells`` is indexed ``[x, y]`` relative to ``offset`` in the parent map;
    ``source`` is the FOV source cell inside this grid.
    """

    cells: np.ndarray
    source: tuple[int, int]
    offset: tuple[int, int] = (0, 0)
    layer: int = 0

    def __post_init__(self):
        sx, sy = self.source
        w, h = self.cells.shape
        if not (0 <= sx < w and 0 <= sy < h):
            raise MapError(f"source {self.source} outside {w}x{h} grid")

    @property
    def shape(self) -> tuple[int, int]:
        return self.cells.shape

    @classmethod
    def from_ascii(cls, text: str) -> Grid2D:
        """Build a grid from rows of ``.`` (free), ``#`` (occupied), ``?`` (unknown), ``S`` (source).

        The first text row is the top (largest y).
        """
        rows = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
        h, w = len(rows), len(rows[0])
        cells = np.full((w, h), CellState.FREE, dtype=np.uint8)
        source = None
        for r, row in enumerate(rows):
            y = h - 1 - r
            for x, ch in enumerate(row):
                if ch == "#":
                    cells[x, y] = CellState.OCCUPIED
                elif ch == "?":
                    cells[x, y] = CellState.UNKNOWN
                elif ch == "S":
                    source = (x, y)
        if source is None:
            raise MapError("ascii grid has no source 'S'")
        return cls(cells, source)


class OccupancyMap:
    """Dense voxel grid over ``bounds`` with per-cell :class:`CellState`.

    Cell count per axis is ``ceil(extent / resolution)``; the grid may overhang
    the upper bound by less than one voxel. Arrays are indexed ``[x, y, z]``.
    """

    def __init__(self, bounds: Box, resolution: float):
        if not resolution > 0:
            raise MapError(f"resolution must be positive, got {resolution}")
        extent = bounds.size
        if np.any(extent < resolution - _SNAP):
            raise MapError(f"bounds {extent.tolist()} smaller than one voxel of {resolution}")
        self.bounds = bounds
        self.resolution = float(resolution)
        self.origin = np.asarray(bounds.lo, dtype=float)
        self._o = tuple(float(v) for v in self.origin)
        shape = tuple(int(math.ceil(_snap(e / resolution))) for e in extent)
        self.cells = np.full(shape, CellState.UNKNOWN, dtype=np.uint8)

    # -- geometry ---------------------------------------------------------

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.cells.shape

    @property
    def voxel_volume(self) -> float:
        return self.resolution**3

    @property
    def grid_box(self) -> Box:
        """Box covered by the voxels, including any overhang past ``bounds``."""
        hi = self.origin + np.asarray(self.shape) * self.resolution
        return Box(tuple(self.origin), tuple(hi))

    def index_of(self, p: Sequence[float]) -> tuple[int, int, int] | None:
        """Index of the voxel containing ``p``, or ``None`` outside the grid."""
        r = self.resolution
        o = self._o
        shape = self.cells.shape
        idx = tuple(int(math.floor(_snap((float(p[a]) - o[a]) / r))) for a in range(3))
        if all(0 <= idx[a] < shape[a] for a in range(3)):
            return idx
        return None

    def voxel_center(self, idx: Sequence[int]) -> np.ndarray:
        return self.origin + (np.asarray(idx, dtype=float) + 0.5) * self.resolution

    # -- updates -----------------------------------------------------------

    def integrate_scan(
        self,
        origin: Sequence[float],
        hits: Iterable[Sequence[float]],
        miss_dirs: Iterable[Sequence[float]],
        max_range: float,
    ) -> None:
        """Carve Free along every ray and mark hit voxels Occupied.

        Within one scan Occupied wins over Free; across scans the newer
        observation wins, but a known voxel never becomes Unknown again.
        """
        origin = np.asarray(origin, dtype=float)
        if self.index_of(origin) is None:
            raise MapError(f"scan origin {origin.tolist()} outside map")
        hits = np.asarray(list(hits) if not isinstance(hits, np.ndarray) else hits, dtype=float)
        misses = np.asarray(
            list(miss_dirs) if not isinstance(miss_dirs, np.ndarray) else miss_dirs, dtype=float
        )
        hits = hits.reshape(-1, 3)
        misses = misses.reshape(-1, 3)
        if len(hits):
            d = hits - origin
            n = np.linalg.norm(d, axis=1, keepdims=True)
            n[n == 0] = 1.0
            hit_ends = hits + d / n * HIT_NUDGE
        else:
            hit_ends = hits
        if len(misses):
            u = misses / np.linalg.norm(misses, axis=1, keepdims=True)
            miss_ends = origin + u * float(max_range)
        else:
            miss_ends = misses
        ends = np.vstack([hit_ends, miss_ends])
        flags = np.zeros(len(ends), dtype=np.uint8)
        flags[: len(hit_ends)] = 1
        rel_o = (origin - self.origin) / self.resolution
        rel_e = np.ascontiguousarray((ends - self.origin) / self.resolution)
        kernels.integrate_rays(self.cells, rel_o, rel_e, flags)

    def fill(self, state: CellState, region: Box | None = None) -> None:
        """Set every voxel whose centre lies in ``region`` to ``state``."""
        if region is None:
            self.cells[...] = state
        else:
            self.cells[self._region_index_range(region)] = state

    def clear_prism(self, p: Sequence[float], dims: Sequence[float]) -> None:
        """Mark Unknown voxels overlapping the body prism at ``p`` as Free."""
        sl = self._prism_slices(p, dims, clip=True)
        if sl is None:
            return
        block = self.cells[sl]
        block[block == CellState.UNKNOWN] = CellState.FREE

    # -- queries -----------------------------------------------------------

    def state_at(self, p: Sequence[float]) -> CellState | None:
        """State of the voxel containing ``p``; ``None`` marks out of bounds."""
        idx = self.index_of(p)
        if idx is None:
            return None
        return CellState(int(self.cells[idx]))

    def slice(self, center: Sequence[float], half_w: float, half_l: float, z: float) -> Grid2D:
        """Layer at height ``z`` restricted to voxel centres within the rectangle.

        ``half_w`` extends along x and ``half_l`` along y; the rectangle is
        clipped to the map.
        """
        r = self.resolution
        kz = math.floor(_snap((z - self.origin[2]) / r))
        if not 0 <= kz < self.shape[2]:
            raise MapError(f"slice height {z} outside map")
        src = self.index_of((center[0], center[1], self.voxel_center((0, 0, kz))[2]))
        if src is None:
            raise MapError(f"slice centre {list(center)} outside map")
        lo_i = []
        hi_i = []
        for ax, half in ((0, half_w), (1, half_l)):
            c = center[ax] - self.origin[ax]
            lo = math.ceil(_snap((c - half) / r - 0.5))
            hi = math.floor(_snap((c + half) / r - 0.5))
            lo = max(0, min(lo, src[ax]))
            hi = min(self.shape[ax] - 1, max(hi, src[ax]))
            lo_i.append(lo)
            hi_i.append(hi)
        cells = self.cells[lo_i[0] : hi_i[0] + 1, lo_i[1] : hi_i[1] + 1, kz]
        return Grid2D(
            cells=cells,
            source=(src[0] - lo_i[0], src[1] - lo_i[1]),
            offset=(lo_i[0], lo_i[1]),
            layer=kz,
        )

    def _prism_range(self, p, dims):
        r = self.resolution
        rng = []
        for ax in range(3):
            half = dims[ax] / 2.0
            c = p[ax] - self.origin[ax]
            lo = math.floor(_snap((c - half) / r))
            hi = math.ceil(_snap((c + half) / r)) - 1
            rng.append((lo, hi))
        return rng

    def _prism_slices(self, p, dims, clip=False):
        rng = self._prism_range(p, dims)
        out = []
        for (lo, hi), n in zip(rng, self.shape):
            if clip:
                lo, hi = max(lo, 0), min(hi, n - 1)
                if lo > hi:
                    return None
            elif lo < 0 or hi >= n:
                return None
            out.append(slice(lo, hi + 1))
        return tuple(out)

    def _blocked_counts(self, pts: np.ndarray, dims: Sequence[float]) -> np.ndarray:
        """Non-free voxel count inside each prism; -1 where the prism leaves the grid."""
        r = self.resolution
        half = np.asarray(dims, dtype=float) / 2.0
        rel_lo = (pts - half - self.origin) / r
        rel_hi = (pts + half - self.origin) / r
        rnd_lo = np.round(rel_lo)
        rnd_hi = np.round(rel_hi)
        rel_lo = np.where(np.abs(rel_lo - rnd_lo) < _SNAP, rnd_lo, rel_lo)
        rel_hi = np.where(np.abs(rel_hi - rnd_hi) < _SNAP, rnd_hi, rel_hi)
        lo = np.floor(rel_lo).astype(np.int64)
        hi = np.ceil(rel_hi).astype(np.int64)  # exclusive
        shape = np.asarray(self.shape)
        out = np.empty(len(pts), dtype=np.int64)
        for i, (l, h) in enumerate(zip(lo, hi)):
            if np.any(l < 0) or np.any(h > shape):
                out[i] = -1
            else:
                box = self.cells[l[0] : h[0], l[1] : h[1], l[2] : h[2]]
                out[i] = np.count_nonzero(box != CellState.FREE)
        return out

    def prism_free(self, p: Sequence[float], dims: Sequence[float]) -> bool:
        """True iff every voxel overlapping the ``l x w x h`` prism centred at ``p`` is Free."""
        pts = np.asarray(p, dtype=float).reshape(1, 3)
        return bool(self._blocked_counts(pts, dims)[0] == 0)

    def segment_free(self, a: Sequence[float], b: Sequence[float], dims: Sequence[float]) -> bool:
        """Sweep approximation: ``prism_free`` at samples spaced at most ``r/2`` along ``[a, b]``."""
        r = self.resolution
        o = self._o
        ra = [(float(a[i]) - o[i]) / r for i in range(3)]
        rb = [(float(b[i]) - o[i]) / r for i in range(3)]
        n = kernels.sweep_steps(*ra, *rb)
        half = [float(d) / 2.0 / r for d in dims]
        return bool(kernels.segment_clear(self.cells, ra, rb, half, n))

    def _region_index_range(self, region: Box):
        r = self.resolution
        out = []
        for ax in range(3):
            lo = math.ceil(_snap((region.lo[ax] - self.origin[ax]) / r - 0.5))
            hi = math.floor(_snap((region.hi[ax] - self.origin[ax]) / r - 0.5))
            lo, hi = max(lo, 0), min(hi, self.shape[ax] - 1)
            out.append(slice(lo, hi + 1) if lo <= hi else slice(0, 0))
        return tuple(out)

    def count_state(self, state: CellState, region: Box | None = None) -> int:
        cells = self.cells if region is None else self.cells[self._region_index_range(region)]
        return int(np.count_nonzero(cells == state))

    def unknown_volume(self, region: Box | None = None) -> float:
        """Volume of Unknown voxels whose centres lie in ``region`` (whole map by default)."""
        return self.count_state(CellState.UNKNOWN, region) * self.voxel_volume

    def known_volume(self) -> float:
        return (self.cells.size - self.count_state(CellState.UNKNOWN)) * self.voxel_volume

    # -- snapshot ----------------------------------------------------------

    def to_snapshot(self) -> str:
        """Text export: header lines then run-length encoded cells in C order (z fastest)."""
        lines = [
            f"{SNAPSHOT_MAGIC} {SNAPSHOT_VERSION}",
            "bounds " + " ".join(repr(v) for v in self.bounds.lo + self.bounds.hi),
            f"resolution {self.resolution!r}",
            "shape " + " ".join(str(n) for n in self.shape),
        ]
        flat = self.cells.ravel()
        change = np.flatnonzero(np.diff(flat)) + 1
        starts = np.concatenate([[0], change])
        ends = np.concatenate([change, [flat.size]])
        tokens = [f"{e - s}{_STATE_CODE[CellState(int(flat[s]))]}" for s, e in zip(starts, ends)]
        for i in range(0, len(tokens), 16):
            lines.append(" ".join(tokens[i : i + 16]))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_snapshot(cls, text: str) -> OccupancyMap:
        lines = [ln for ln in text.splitlines() if ln.strip()]
        magic, version = lines[0].split()
        if magic != SNAPSHOT_MAGIC or int(version) != SNAPSHOT_VERSION:
            raise MapError(f"not a v{SNAPSHOT_VERSION} map snapshot: {lines[0]!r}")
        vals = [float(v) for v in lines[1].split()[1:]]
        res = float(lines[2].split()[1])
        shape = tuple(int(v) for v in lines[3].split()[1:])
        m = cls(Box(vals[:3], vals[3:]), res)
        if m.shape != shape:
            raise MapError(f"snapshot shape {shape} disagrees with bounds ({m.shape})")
        runs = []
        for ln in lines[4:]:
            for tok in ln.split():
                runs.append(np.full(int(tok[:-1]), _CODE_STATE[tok[-1]], dtype=np.uint8))
        flat = np.concatenate(runs) if runs else np.zeros(0, np.uint8)
        if flat.size != m.cells.size:
            raise MapError(f"snapshot has {flat.size} cells, expected {m.cells.size}")
        m.cells[...] = flat.reshape(shape)
        return m
