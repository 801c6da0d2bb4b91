"""RRT growth with per-edge or per-node gains, best-path selection and yaw alignment."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from shadownbv import kernels
from shadownbv.gain import EdgeGainParams, edge_gain, node_gain, raycast_node_gain
from shadownbv.grid_map import Box, OccupancyMap
from shadownbv.state import State, wrap_angle

MODES = ("rsc-cuboid", "raycast-baseline")


class PlannerError(RuntimeError):
    pass


class SamplingExhausted(PlannerError):
    """No node could be added before the sampling budget ran out."""

    def __init__(self, tree: Tree):
        super().__init__(f"sampling budget exhausted after {tree.attempts} attempts")
        self.tree = tree


@dataclass
class TreeNode:
    id: int
    pos: np.ndarray
    parent: int | None
    gain: float = 0.0
    edge_gain: float = 0.0
    # distance fed to the exponential weight: edge length in cuboid mode,
    # path length from the root in baseline mode
    weight_dist: float = 0.0
    path_len: float = 0.0


@dataclass
class Tree:
    nodes: list[TreeNode]
    attempts: int = 0
    rejected: int = 0
    reads: int = 0
    exhausted: bool = False

    @property
    def root(self) -> TreeNode:
        return self.nodes[0]

    def chain(self, node_id: int) -> list[TreeNode]:
        out = []
        cur: int | None = node_id
        while cur is not None:
            out.append(self.nodes[cur])
            cur = self.nodes[cur].parent
        return out[::-1]

    def best_gain(self) -> float:
        return max(n.gain for n in self.nodes)


@dataclass
class Path:
    nodes: list[TreeNode]

    @property
    def gain(self) -> float:
        return self.nodes[-1].gain

    @property
    def positions(self) -> list[np.ndarray]:
        return [n.pos for n in self.nodes]

    @property
    def length(self) -> float:
        return path_length(self.positions)


def path_length(points) -> float:
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    if len(pts) < 2:
        return 0.0
    return float(np.linalg.norm(np.diff(pts, axis=0), axis=1).sum())


@dataclass
class PlannerParams:
    bounds: Box
    max_nodes: int = 20
    max_edge_len: float = 1.5
    z_min: float | None = None
    z_max: float | None = None
    g_zero: float = 0.1
    lam: float = 0.3
    I_range: float = 5.0
    l_max: float = 2.0
    prism: tuple[float, float, float] = (0.6, 0.6, 0.5)
    seed: int = 0
    mode: str = "rsc-cuboid"
    d_max: float = 1.5
    baseline_rays: int | None = None
    attempt_factor: int = 100

    def __post_init__(self):
        if self.max_nodes < 1:
            raise ValueError("max_nodes must be >= 1")
        if not self.max_edge_len > 0:
            raise ValueError("max_edge_len must be positive")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")


def _sample_bounds(params: PlannerParams) -> tuple[np.ndarray, np.ndarray]:
    lo, hi = params.bounds.lo, params.bounds.hi
    z0 = lo[2] if params.z_min is None else max(lo[2], params.z_min)
    z1 = hi[2] if params.z_max is None else min(hi[2], params.z_max)
    return np.array([lo[0], lo[1], z0], dtype=float), np.array([hi[0], hi[1], z1], dtype=float)


def _sample(rng: np.random.Generator, params: PlannerParams) -> np.ndarray:
    lo, hi = _sample_bounds(params)
    return rng.uniform(lo, hi)


def grow_tree(
    m: OccupancyMap,
    root: State,
    params: PlannerParams,
    rng: np.random.Generator | None = None,
) -> Tree:
    """Grow up to ``max_nodes`` nodes (root included) within ``attempt_factor * max_nodes`` samples.

    Raises :class:`SamplingExhausted` if the budget runs out before any node
    beyond the root is accepted.
    """
    if rng is None:
        rng = np.random.default_rng(params.seed)
    if not m.prism_free(root.p, params.prism):
        raise PlannerError(f"root {root.p.tolist()} is not collision free")
    tree = Tree([TreeNode(0, root.p.copy(), None)])
    gp = EdgeGainParams(params.I_range, params.l_max, params.lam, m.resolution)
    budget = params.attempt_factor * params.max_nodes
    pos = np.empty((params.max_nodes, 3))
    pos[0] = root.p
    lo, hi = _sample_bounds(params)
    sc = hi - lo
    o = np.array(m._o)
    half = np.array([float(d) / 2.0 / m.resolution for d in params.prism])
    while len(tree.nodes) < params.max_nodes:
        if tree.attempts >= budget:
            tree.exhausted = True
            break
        tree.attempts += 1
        # lo + sc * u reproduces rng.uniform(lo, hi) draw for draw
        u = rng.random(3)
        n = len(tree.nodes)
        near, _, qx, qy, qz, ok = kernels.extend(
            m.cells, pos, n, u, lo, sc, params.max_edge_len, o, m.resolution, half
        )
        if not ok:
            tree.rejected += 1
            continue
        base = pos[near]
        q = np.array([qx, qy, qz])
        parent = tree.nodes[near]
        length = float(np.linalg.norm(q - base))
        if params.mode == "rsc-cuboid":
            eg = edge_gain(m, base, q, gp, edge_id=n)
            g, reads, wd = eg.gain, eg.reads, length
        else:
            g, reads = raycast_node_gain(m, q, params.d_max, params.baseline_rays)
            wd = parent.path_len + length
        tree.reads += reads
        node = TreeNode(
            id=n,
            pos=q,
            parent=near,
            gain=node_gain(parent.gain, g, wd, params.lam),
            edge_gain=g,
            weight_dist=wd,
            path_len=parent.path_len + length,
        )
        tree.nodes.append(node)
        pos[n] = q
    if len(tree.nodes) == 1 and tree.exhausted:
        raise SamplingExhausted(tree)
    return tree


def best_path(tree: Tree) -> Path:
    """Root-to-node path with the highest accumulated gain; ties prefer shorter paths, then lower ids."""
    best = min(tree.nodes, key=lambda n: (-n.gain, n.path_len, n.id))
    return Path(tree.chain(best.id))


def assign_yaw(points, current_psi: float) -> list[State]:
    """Waypoints with yaw facing along each incoming step; the first keeps ``current_psi``.

    A step with no horizontal motion keeps the previous yaw.
    """
    pts = [np.asarray(p, dtype=float) for p in points]
    if not pts:
        raise ValueError("empty path")
    out = [State(pts[0], current_psi)]
    for prev, cur in zip(pts, pts[1:]):
        dx, dy = cur[0] - prev[0], cur[1] - prev[1]
        psi = math.atan2(dy, dx) if (dx != 0 or dy != 0) else out[-1].psi
        out.append(State(cur, wrap_angle(psi)))
    return out


def check_tree_gains(tree: Tree, lam: float) -> float:
    """Largest relative mismatch between stored node gains and the parent-chain recursion."""
    worst = 0.0
    for n in tree.nodes[1:]:
        p = tree.nodes[n.parent]
        want = p.gain + n.edge_gain * math.exp(-lam * n.weight_dist)
        err = abs(want - n.gain) / max(abs(want), 1e-300)
        worst = max(worst, err if want != 0 else abs(n.gain))
    return worst
