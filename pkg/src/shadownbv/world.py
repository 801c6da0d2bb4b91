"""Ground-truth box worlds, scenario files and a synthetic spinning LiDAR.

Scenario grammar (one record per line, ``#`` starts a comment)::

    shadownbv-scenario 1
    name <word>
    bounds x0 y0 z0 x1 y1 z1
    start x y z yaw
    box cx cy cz sx sy sz        # repeated, centre and size in metres
    param <key> <value>          # optional per-scenario defaults, repeated

The header line must come first; ``bounds`` and ``start`` are mandatory.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
from scipy import ndimage

from shadownbv import kernels
from shadownbv.grid_map import Box, MapError, OccupancyMap, _snap
from shadownbv.state import State

SCENARIO_MAGIC = "shadownbv-scenario"
SCENARIO_VERSION = 1
_EPS = 1e-9


class ScenarioError(ValueError):
    """Malformed scenario file or invalid world."""

    def __init__(self, msg: str, line: int | None = None, path: str | None = None):
        where = ""
        if path is not None:
            where = f"{path}:"
        if line is not None:
            where += f"{line}: "
        elif where:
            where += " "
        super().__init__(where + msg)
        self.line = line


@dataclass(frozen=True)
class SensorModel:
    """Spinning LiDAR ray pattern. Angles in degrees, pitch in radians."""

    R_max: float = 20.0
    alpha_h: float = 360.0
    alpha_v: float = 30.0
    n_h: int = 360
    n_v: int = 16
    mount_pitch: float = 0.0

    def __post_init__(self):
        if not 0 < self.alpha_h <= 360 or not 0 < self.alpha_v <= 360:
            raise ValueError("FOV angles must lie in (0, 360]")
        if self.n_h < 1 or self.n_v < 1:
            raise ValueError("ray counts must be >= 1")
        if not self.R_max > 0:
            raise ValueError("R_max must be positive")

    def body_directions(self) -> np.ndarray:
        """Unit ray directions in the sensor frame, shape ``(n_h * n_v, 3)``."""
        az = _spread(math.radians(self.alpha_h), self.n_h)
        el = _spread(math.radians(self.alpha_v), self.n_v)
        a, e = np.meshgrid(az, el, indexing="ij")
        a, e = a.ravel(), e.ravel()
        d = np.stack([np.cos(e) * np.cos(a), np.cos(e) * np.sin(a), np.sin(e)], axis=1)
        if self.mount_pitch:
            c, s = math.cos(self.mount_pitch), math.sin(self.mount_pitch)
            # positive pitch tilts the forward axis down
            rot = np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])
            d = d @ rot.T
        return d


def _spread(span: float, n: int) -> np.ndarray:
    if n == 1:
        return np.zeros(1)
    if span >= 2 * math.pi - 1e-12:
        return 2 * math.pi * np.arange(n) / n
    return np.linspace(-span / 2, span / 2, n)


@dataclass
class Scan:
    origin: np.ndarray
    hits: np.ndarray
    miss_dirs: np.ndarray

    @property
    def n_rays(self) -> int:
        return len(self.hits) + len(self.miss_dirs)


@dataclass
class World:
    bounds: Box
    obstacles: list[Box]
    start_pose: State
    name: str = "world"
    params: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        lo, hi = np.asarray(self.bounds.lo), np.asarray(self.bounds.hi)
        if np.any(hi <= lo):
            raise ScenarioError("degenerate bounds")
        for b in self.obstacles:
            if np.any(np.asarray(b.hi) <= np.asarray(b.lo)):
                raise ScenarioError(f"degenerate obstacle {b}")
            if np.any(np.asarray(b.lo) < lo - _EPS) or np.any(np.asarray(b.hi) > hi + _EPS):
                raise ScenarioError(f"obstacle {b} leaves world bounds")
        if not self.bounds.contains(self.start_pose.p):
            raise ScenarioError("start pose outside world bounds")
        if self.inside_obstacle(self.start_pose.p):
            raise ScenarioError(f"start pose {self.start_pose.p.tolist()} inside an obstacle")
        self._lo = np.array([b.lo for b in self.obstacles], dtype=float).reshape(-1, 3)
        self._hi = np.array([b.hi for b in self.obstacles], dtype=float).reshape(-1, 3)

    def inside_obstacle(self, p) -> bool:
        """True if ``p`` lies in the closed extent of any obstacle."""
        return any(b.contains(p) for b in self.obstacles)

    def prism_clear(self, p, dims) -> bool:
        """Ground-truth body check: prism inside bounds and disjoint from every obstacle interior."""
        p = np.asarray(p, dtype=float)
        half = np.asarray(dims, dtype=float) / 2
        lo, hi = p - half, p + half
        if np.any(lo < np.asarray(self.bounds.lo) - _EPS) or np.any(hi > np.asarray(self.bounds.hi) + _EPS):
            return False
        if not len(self._lo):
            return True
        overlap = np.all((lo < self._hi - _EPS) & (hi > self._lo + _EPS), axis=1)
        return not bool(overlap.any())


def parse_world(text: str, path: str | None = None) -> World:
    name = "world"
    bounds = None
    start = None
    boxes: list[Box] = []
    params: dict[str, float] = {}
    seen_header = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        if not seen_header:
            if tok[0] != SCENARIO_MAGIC or len(tok) != 2:
                raise ScenarioError(f"expected header '{SCENARIO_MAGIC} {SCENARIO_VERSION}'", lineno, path)
            if tok[1] != str(SCENARIO_VERSION):
                raise ScenarioError(f"unsupported scenario version {tok[1]}", lineno, path)
            seen_header = True
            continue
        key, args = tok[0], tok[1:]
        try:
            if key == "name":
                if len(args) != 1:
                    raise ValueError("name takes one word")
                name = args[0]
            elif key == "bounds":
                v = _floats(args, 6)
                bounds = Box(v[:3], v[3:])
            elif key == "start":
                v = _floats(args, 4)
                start = State(v[:3], v[3])
            elif key == "box":
                v = _floats(args, 6)
                if min(v[3:]) <= 0:
                    raise ValueError("box sizes must be positive")
                boxes.append(Box.from_center_size(v[:3], v[3:]))
            elif key == "param":
                if len(args) != 2:
                    raise ValueError("param takes a key and a value")
                params[args[0]] = float(args[1])
            else:
                raise ValueError(f"unknown record '{key}'")
        except ValueError as exc:
            raise ScenarioError(str(exc), lineno, path) from None
    if not seen_header:
        raise ScenarioError("empty scenario", None, path)
    if bounds is None or start is None:
        raise ScenarioError("scenario needs 'bounds' and 'start'", None, path)
    try:
        return World(bounds, boxes, start, name, params)
    except ScenarioError as exc:
        raise ScenarioError(str(exc), None, path) from None


def _floats(args, n):
    if len(args) != n:
        raise ValueError(f"expected {n} numbers, got {len(args)}")
    return [float(a) for a in args]


def bundled_scenarios() -> list[str]:
    root = resources.files("shadownbv") / "scenarios"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".scn"))


def load_world(path: str | Path) -> World:
    """Load a scenario file; a bare name like ``maze`` resolves to the bundled copy."""
    p = Path(path)
    if not p.exists() and p.suffix == "" and str(path) in bundled_scenarios():
        text = (resources.files("shadownbv") / "scenarios" / f"{path}.scn").read_text()
        return parse_world(text, str(path))
    try:
        text = p.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario: {exc.strerror}", None, str(path)) from None
    return parse_world(text, str(path))


def dump_world(world: World) -> str:
    lines = [f"{SCENARIO_MAGIC} {SCENARIO_VERSION}", f"name {world.name}"]
    lines.append("bounds " + " ".join(_fmt(v) for v in world.bounds.lo + world.bounds.hi))
    s = world.start_pose
    lines.append("start " + " ".join(_fmt(v) for v in (*s.p, s.psi)))
    for k, v in world.params.items():
        lines.append(f"param {k} {_fmt(v)}")
    for b in world.obstacles:
        lines.append("box " + " ".join(_fmt(v) for v in (*b.center, *b.size)))
    return "\n".join(lines) + "\n"


def _fmt(v: float) -> str:
    return f"{float(v):.6g}"


# -- sensor ------------------------------------------------------------------


def world_directions(state: State, sensor: SensorModel) -> np.ndarray:
    c, s = math.cos(state.psi), math.sin(state.psi)
    yaw = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    return sensor.body_directions() @ yaw.T


def simulate_lidar(world: World, state: State, sensor: SensorModel) -> Scan:
    p = np.asarray(state.p, dtype=float)
    if not world.bounds.contains(p):
        raise ScenarioError(f"sensor pose {p.tolist()} outside world bounds")
    if world.inside_obstacle(p):
        raise ScenarioError(f"sensor pose {p.tolist()} inside an obstacle")
    dirs = world_directions(state, sensor)
    t_min = kernels.ray_boxes_nearest(p, np.ascontiguousarray(dirs), world._lo, world._hi)
    hit = t_min <= sensor.R_max
    hits = p + dirs[hit] * t_min[hit, None]
    return Scan(origin=p.copy(), hits=hits, miss_dirs=dirs[~hit])


# -- ground truth reachability -------------------------------------------------


def _overlap_span(rel_lo: float, rel_hi: float, n: int) -> tuple[int, int]:
    """Voxel index range ``[a, b)`` whose open interiors overlap the open interval."""
    a = math.floor(_snap(rel_lo))
    b = math.ceil(_snap(rel_hi))
    return max(a, 0), min(b, n)


def ground_truth_blocked(world: World, r: float) -> tuple[OccupancyMap, np.ndarray]:
    """Voxels of the ``r`` map that overlap an obstacle or stick out of the world bounds."""
    m = OccupancyMap(world.bounds, r)
    blocked = np.zeros(m.shape, dtype=bool)
    for b in world.obstacles:
        rel_lo = (np.asarray(b.lo) - m.origin) / r
        rel_hi = (np.asarray(b.hi) - m.origin) / r
        sl = tuple(slice(*_overlap_span(rel_lo[a], rel_hi[a], m.shape[a])) for a in range(3))
        blocked[sl] = True
    extent = np.asarray(world.bounds.hi) - m.origin
    for ax in range(3):
        full = int(math.floor(_snap(extent[ax] / r)))
        idx = [slice(None)] * 3
        idx[ax] = slice(full, None)
        blocked[tuple(idx)] = True
    return m, blocked


def _prism_margin(dims, r) -> list[int]:
    # number of neighbouring voxels a centred prism reaches into along each axis
    out = []
    for d in dims:
        half = d / 2.0
        k = 0
        while (k + 1) * r - r / 2 < half - _EPS:
            k += 1
        out.append(k)
    return out


def reachable_mask(world: World, r: float, prism_dims) -> tuple[OccupancyMap, np.ndarray]:
    """Voxels whose centre is a collision-free body pose connected to the start.

    Connectivity is 6-neighbour over voxel centres where the ``prism_dims`` body
    fits between obstacles and inside the bounds.
    """
    m, blocked = ground_truth_blocked(world, r)
    margin = _prism_margin(prism_dims, r)
    size = tuple(2 * k + 1 for k in margin)
    fits = ndimage.minimum_filter((~blocked).astype(np.uint8), size=size, mode="constant", cval=0) > 0
    labels, _ = ndimage.label(fits, structure=ndimage.generate_binary_structure(3, 1))
    start = m.index_of(world.start_pose.p)
    lab = 0
    if start is not None:
        lab = labels[start]
        if lab == 0:
            # start pose off the voxel lattice; take the nearest feasible centre
            idx = np.argwhere(fits)
            if len(idx):
                cen = m.origin + (idx + 0.5) * r
                near = idx[np.argmin(np.linalg.norm(cen - world.start_pose.p, axis=1))]
                lab = labels[tuple(near)]
    if lab == 0:
        return m, np.zeros(m.shape, dtype=bool)
    return m, labels == lab


def reachable_free_volume(world: World, r: float, prism_dims) -> float:
    _, mask = reachable_mask(world, r, prism_dims)
    return float(mask.sum()) * r**3


# -- procedural mazes ------------------------------------------------------------


def corridor_world(
    nx: int,
    ny: int,
    openings: set[tuple[tuple[int, int], tuple[int, int]]],
    cell: float = 2.0,
    wall: float = 0.2,
    height: float = 2.5,
    start_cell: tuple[int, int] = (0, 0),
    start_z: float = 1.2,
    name: str = "maze",
    slab: float = 0.0,
) -> World:
    """Grid of ``cell``-sized rooms separated by ``wall``-thick walls.

    ``openings`` lists pairs of 4-adjacent cells whose shared wall is removed.
    Walls sit on ``[k*cell, k*cell + wall]`` so every face lands on a multiple
    of ``wall`` when ``cell`` is. ``slab > 0`` adds a floor and a ceiling of
    that thickness.
    """
    opened = {frozenset(p) for p in openings}
    W, H = nx * cell + wall, ny * cell + wall
    boxes = []

    def add(x0, y0, x1, y1):
        boxes.append(Box((x0, y0, 0.0), (x1, y1, height)))

    # walls normal to x (between (i-1, j) and (i, j)); merge vertical runs
    for i in range(nx + 1):
        j = 0
        while j < ny:
            if 0 < i < nx and frozenset({(i - 1, j), (i, j)}) in opened:
                j += 1
                continue
            j0 = j
            while j < ny and not (0 < i < nx and frozenset({(i - 1, j), (i, j)}) in opened):
                j += 1
            add(i * cell, j0 * cell, i * cell + wall, j * cell + wall)
    for j in range(ny + 1):
        i = 0
        while i < nx:
            if 0 < j < ny and frozenset({(i, j - 1), (i, j)}) in opened:
                i += 1
                continue
            i0 = i
            while i < nx and not (0 < j < ny and frozenset({(i, j - 1), (i, j)}) in opened):
                i += 1
            # runs include their end posts; overlap with x-normal walls is harmless
            add(i0 * cell, j * cell, i * cell + wall, j * cell + wall)
    if slab > 0:
        boxes.append(Box((0.0, 0.0, 0.0), (W, H, slab)))
        boxes.append(Box((0.0, 0.0, height - slab), (W, H, height)))
    sx = start_cell[0] * cell + (cell + wall) / 2
    sy = start_cell[1] * cell + (cell + wall) / 2
    start = State((sx, sy, start_z), 0.0)
    return World(Box((0.0, 0.0, 0.0), (W, H, height)), boxes, start, name)


def generate_maze(
    nx: int,
    ny: int,
    seed: int,
    loop_fraction: float = 0.0,
    **kwargs,
) -> World:
    """Seeded depth-first-search maze; ``loop_fraction`` of the remaining walls are knocked out."""
    rng = np.random.default_rng(seed)
    seen = np.zeros((nx, ny), dtype=bool)
    openings = set()
    stack = [(0, 0)]
    seen[0, 0] = True
    while stack:
        i, j = stack[-1]
        nbrs = [
            (i + di, j + dj)
            for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1))
            if 0 <= i + di < nx and 0 <= j + dj < ny and not seen[i + di, j + dj]
        ]
        if not nbrs:
            stack.pop()
            continue
        nxt = nbrs[rng.integers(len(nbrs))]
        openings.add(((i, j), nxt))
        seen[nxt] = True
        stack.append(nxt)
    if loop_fraction > 0:
        closed = []
        for i in range(nx):
            for j in range(ny):
                for nb in ((i + 1, j), (i, j + 1)):
                    if nb[0] < nx and nb[1] < ny:
                        pair = ((i, j), nb)
                        if pair not in openings and (nb, (i, j)) not in openings:
                            closed.append(pair)
        k = int(round(loop_fraction * len(closed)))
        for idx in rng.choice(len(closed), size=k, replace=False):
            openings.add(closed[idx])
    return corridor_world(nx, ny, openings, **kwargs)


def dead_end_world(
    n_cols: int = 6,
    ny: int = 5,
    start_cell: tuple[int, int] | None = None,
    start: str = "middle",
    **kwargs,
) -> World:
    """A 3-cell-wide ring of corridors with a serpentine cul-de-sac hanging off its east side.

    The cul-de-sac enters at the middle row and sweeps ``n_cols`` columns
    boustrophedon-style, so no straight line of sight runs along it.
    ``start`` picks the middle of the cul-de-sac or the ring cell at its
    ``mouth``; ``start_cell`` overrides both.
    """
    if ny < 3 or n_cols < 1:
        raise ValueError("need ny >= 3 and n_cols >= 1")
    openings = set()
    # ring around the middle column of the first three
    ring = [(0, j) for j in range(ny)] + [(2, j) for j in range(ny)] + [(1, 0), (1, ny - 1)]
    ring_set = set(ring)
    for i, j in ring:
        for nb in ((i + 1, j), (i, j + 1)):
            if nb in ring_set:
                openings.add(((i, j), nb))
    mid = ny // 2
    openings.add(((2, mid), (3, mid)))
    # serpentine: column 3 from the middle row up, then full sweeps
    cells = [(3, j) for j in range(mid, ny)]
    for c in range(1, n_cols):
        col = 3 + c
        rows = range(ny - 1, -1, -1) if c % 2 else range(ny)
        cells += [(col, j) for j in rows]
    for a, b in zip(cells, cells[1:]):
        openings.add((a, b))
    if start_cell is None:
        if start not in ("middle", "mouth"):
            raise ValueError(f"start must be 'middle' or 'mouth', got {start!r}")
        start_cell = cells[len(cells) // 2] if start == "middle" else (2, mid)
    w = corridor_world(3 + n_cols, ny, openings, start_cell=start_cell, **kwargs)
    # unused cells become solid so no sealed free pocket stays Unknown forever
    cell = kwargs.get("cell", 2.0)
    wall = kwargs.get("wall", 0.2)
    used = ring_set | set(cells)
    solid = [
        Box((i * cell, j * cell, 0.0), ((i + 1) * cell + wall, (j + 1) * cell + wall, w.bounds.hi[2]))
        for i in range(3 + n_cols)
        for j in range(ny)
        if (i, j) not in used
    ]
    return World(w.bounds, w.obstacles + solid, w.start_pose, w.name)


def check_map_consistent(world: World, m: OccupancyMap) -> None:
    """Raise if the map marks a voxel Free that lies entirely inside an obstacle."""
    for b in world.obstacles:
        rel_lo = (np.asarray(b.lo) - m.origin) / m.resolution
        rel_hi = (np.asarray(b.hi) - m.origin) / m.resolution
        sl = []
        for a in range(3):
            lo = max(math.ceil(_snap(rel_lo[a])), 0)
            hi = min(math.floor(_snap(rel_hi[a])), m.shape[a])
            if hi <= lo:
                break
            sl.append(slice(lo, hi))
        else:
            if np.any(m.cells[tuple(sl)] == 0):
                raise MapError(f"free voxel inside obstacle {b}")
