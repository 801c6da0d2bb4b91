"""Closed exploration loop: sense, integrate, plan, recover or execute, log."""

from __future__ import annotations

import dataclasses
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path as FsPath

import numpy as np

from shadownbv.deadend import (
    History,
    IterationStats,
    UnreachableHistory,
    detect_dead_end,
    execute_recovery,
    record_visit,
    recovery_path,
    unknown_in,
)
from shadownbv.grid_map import OccupancyMap
from shadownbv.planner import (
    MODES,
    PlannerError,
    PlannerParams,
    SamplingExhausted,
    Tree,
    assign_yaw,
    best_path,
    grow_tree,
    path_length,
)
from shadownbv.state import State, wrap_angle
from shadownbv.world import SensorModel, World, load_world, reachable_mask, simulate_lidar

RUNLOG_MAGIC = "# shadownbv-runlog v1"
RUNLOG_HEADER = "iter,t_c_ms,explored_m3,x,y,z,yaw,dead_end,mode,seed"
TRACE_HEADER = "iter,nodes,attempts,rejected,best_gain_m3,t_c_ms,reads"
SUMMARY_FORMAT = "shadownbv-summary"
SUMMARY_VERSION = 1

# scenario ``param`` keys that map onto RunConfig fields
_SCENARIO_KEYS = {
    "resolution": "r",
    "v_max": "v_max",
    "psi_rate": "psi_rate",
    "I_range": "I_range",
    "lambda": "lam",
    "l_max": "l_max",
    "max_time": "max_time",
    "z_min": "z_min",
    "z_max": "z_max",
    "g_zero": "g_zero",
}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    scenario: str
    r: float = 0.2
    sensor: SensorModel = field(default_factory=SensorModel)
    v_max: float = 1.0
    psi_rate: float = 0.8
    lam: float = 0.3
    I_range: float = 5.0
    l_max: float = 2.0
    N_max: int = 20
    max_edge_len: float = 1.5
    g_zero: float = 0.1
    completion: float = 0.02
    K: int = 3
    mode: str = "rsc-cuboid"
    seed: int = 0
    # cap on simulated motion time, seconds; measured planning time is excluded so truncation is reproducible
    max_time: float = 600.0
    recovery: bool = True
    z_min: float | None = None
    z_max: float | None = None
    prism: tuple[float, float, float] = (0.6, 0.6, 0.5)
    d_max: float = 1.5
    baseline_lam: float = 0.25
    baseline_rays: int | None = None  # None: rays one cell apart at each layer's disc rim
    stall_iters: int = 40
    max_iterations: int = 5000
    hop: float = 0.5
    keep_trees: bool = False

    def validate(self):
        pos = ["r", "v_max", "psi_rate", "I_range", "l_max", "max_edge_len", "max_time", "d_max", "hop"]
        for name in pos:
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and v > 0):
                raise ConfigError(f"{name} must be positive, got {v!r}")
        if self.lam < 0 or self.baseline_lam < 0 or self.g_zero < 0:
            raise ConfigError("lambda and g_zero must be non-negative")
        if not 0 <= self.completion < 1:
            raise ConfigError("completion threshold must lie in [0, 1)")
        if self.N_max < 1 or self.K < 1 or self.stall_iters < 1:
            raise ConfigError("N_max, K and stall_iters must be >= 1")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {', '.join(MODES)}; got {self.mode!r}")
        if any(d <= 0 for d in self.prism):
            raise ConfigError("prism dimensions must be positive")
        return self

    @classmethod
    def from_scenario(cls, scenario: str, world: World | None = None, **overrides) -> RunConfig:
        """Defaults from the scenario's ``param`` records, then ``overrides`` on top."""
        if world is None:
            world = load_world(scenario)
        kw = {}
        for key, val in world.params.items():
            if key in _SCENARIO_KEYS:
                kw[_SCENARIO_KEYS[key]] = val
        names = {f.name for f in dataclasses.fields(cls)}
        for k, v in overrides.items():
            if k not in names:
                raise ConfigError(f"unknown config key {k!r}")
            if v is not None:
                kw[k] = v
        if isinstance(kw.get("sensor"), dict):
            kw["sensor"] = SensorModel(**kw["sensor"])
        if "prism" in kw:
            kw["prism"] = tuple(float(v) for v in kw["prism"])
        return cls(scenario=scenario, **kw).validate()

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["prism"] = list(self.prism)
        return d


@dataclass
class IterRecord:
    iter: int
    t_c_ms: float
    explored_m3: float
    state: State
    dead_end: bool
    motion_s: float
    t_s: float
    unknown_reachable_m3: float
    best_gain: float = 0.0
    nodes: int = 0
    attempts: int = 0
    rejected: int = 0
    reads: int = 0
    waypoints: list = field(default_factory=list)


@dataclass
class DeadEndEvent:
    iter: int
    n0: list[float]
    n_bn: list[float]
    legs: int
    distance_m: float


@dataclass
class ExplorationLog:
    config: RunConfig
    records: list[IterRecord] = field(default_factory=list)
    dead_end_events: list[DeadEndEvent] = field(default_factory=list)
    reachable_m3: float = 0.0
    status: str = "running"
    error: str | None = None
    truncated: bool = False
    trees: list[Tree] = field(default_factory=list)

    @property
    def t_exp(self) -> float:
        return self.motion_s + self.compute_s

    @property
    def motion_s(self) -> float:
        return math.fsum(r.motion_s for r in self.records)

    @property
    def compute_s(self) -> float:
        return math.fsum(r.t_c_ms for r in self.records) / 1000.0

    @property
    def iterations(self) -> int:
        return sum(1 for r in self.records if r.iter > 0)

    @property
    def dead_end_count(self) -> int:
        return len(self.dead_end_events)

    @property
    def explored_m3(self) -> float:
        return self.records[-1].explored_m3 if self.records else 0.0

    @property
    def completion(self) -> float:
        if not self.records or self.reachable_m3 <= 0:
            return 0.0
        return 1.0 - self.records[-1].unknown_reachable_m3 / self.reachable_m3

    @property
    def planning_tc_ms(self) -> list[float]:
        return [r.t_c_ms for r in self.records if r.iter > 0]

    def time_to_completion(self, frac: float) -> float | None:
        """Simulated time at which reachable coverage first reached ``frac``."""
        for r in self.records:
            if self.reachable_m3 > 0 and 1.0 - r.unknown_reachable_m3 / self.reachable_m3 >= frac:
                return r.t_s
        return None

    # -- serialisation ----------------------------------------------------

    def csv_rows(self) -> list[str]:
        c = self.config
        rows = [RUNLOG_MAGIC, RUNLOG_HEADER]
        for r in self.records:
            p = r.state.p
            rows.append(
                f"{r.iter},{r.t_c_ms:.3f},{r.explored_m3:.6f},{p[0]:.6f},{p[1]:.6f},{p[2]:.6f},"
                f"{r.state.psi:.6f},{int(r.dead_end)},{c.mode},{c.seed}"
            )
        return rows

    def to_csv(self) -> str:
        return "\n".join(self.csv_rows()) + "\n"

    def trace_csv(self) -> str:
        rows = ["# shadownbv-trace v1", TRACE_HEADER]
        for r in self.records:
            if r.iter == 0:
                continue
            rows.append(
                f"{r.iter},{r.nodes},{r.attempts},{r.rejected},{r.best_gain:.6f},{r.t_c_ms:.3f},{r.reads}"
            )
        return "\n".join(rows) + "\n"

    def summary(self) -> dict:
        c = self.config
        tc = self.planning_tc_ms
        return {
            "format": SUMMARY_FORMAT,
            "version": SUMMARY_VERSION,
            "scenario": c.scenario,
            "mode": c.mode,
            "seed": c.seed,
            "r": c.r,
            "recovery": c.recovery,
            "status": self.status,
            "error": self.error,
            "truncated": self.truncated,
            "t_exp_s": self.t_exp,
            "motion_s": self.motion_s,
            "compute_s": self.compute_s,
            "tc_mean_ms": float(np.mean(tc)) if tc else 0.0,
            "iterations": self.iterations,
            "dead_ends": self.dead_end_count,
            "explored_m3": self.explored_m3,
            "reachable_m3": self.reachable_m3,
            "completion_pct": 100.0 * self.completion,
            "g_zero": c.g_zero,
            "completion_threshold": c.completion,
            "max_time_s": c.max_time,
            "dead_end_events": [dataclasses.asdict(e) for e in self.dead_end_events],
        }

    def write(self, out_dir, prefix: str | None = None) -> dict[str, FsPath]:
        out = FsPath(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        c = self.config
        if prefix is None:
            prefix = f"{FsPath(c.scenario).stem}_r{c.r:g}_{c.mode}_s{c.seed}"
        paths = {
            "log": out / f"{prefix}.csv",
            "trace": out / f"{prefix}_trace.csv",
            "summary": out / f"{prefix}_summary.json",
        }
        paths["log"].write_text(self.to_csv())
        paths["trace"].write_text(self.trace_csv())
        paths["summary"].write_text(json.dumps(self.summary(), indent=2) + "\n")
        return paths


# -- motion model -------------------------------------------------------------


def leg_time(a: State, b: State, v_max: float, psi_rate: float) -> float:
    dist = float(np.linalg.norm(b.p - a.p))
    turn = abs(wrap_angle(b.psi - a.psi))
    return max(dist / v_max, turn / psi_rate)


def execute_path(state: State, yawed_path: list[State], v_max: float, psi_rate: float) -> tuple[State, float]:
    """Kinematic time to fly ``state`` through every waypoint; the robot stops at the last one."""
    cur = state
    elapsed = 0.0
    for wp in yawed_path:
        elapsed += leg_time(cur, wp, v_max, psi_rate)
        cur = wp
    return cur.copy(), elapsed


def check_termination(
    unknown_reachable: float,
    reachable: float,
    low_gain_streak: int,
    t_motion: float,
    config: RunConfig,
) -> bool:
    """Done when nothing reachable is unknown, when coverage is within threshold after
    ``K`` low-gain iterations, or when the motion-time cap is hit."""
    if t_motion >= config.max_time:
        return True
    if unknown_reachable <= 0:
        return True
    return unknown_reachable < config.completion * reachable and low_gain_streak >= config.K


# -- the loop ---------------------------------------------------------------------


class Explorer:
    """Mutable state of one exploration run."""

    def __init__(self, config: RunConfig, world: World | None = None):
        self.config = config.validate()
        self.world = world if world is not None else load_world(config.scenario)
        self.map = OccupancyMap(self.world.bounds, config.r)
        _, self.reachable = reachable_mask(self.world, config.r, config.prism)
        self.reachable_m3 = float(np.count_nonzero(self.reachable)) * self.map.voxel_volume
        self.state = self.world.start_pose.copy()
        self.history = History()
        self.recovering = False
        self.rng = np.random.default_rng(config.seed)
        self.t_exp = 0.0
        self.t_motion = 0.0
        self.log = ExplorationLog(config, reachable_m3=self.reachable_m3)
        baseline = config.mode == "raycast-baseline"
        self.params = PlannerParams(
            bounds=self.world.bounds,
            max_nodes=config.N_max,
            max_edge_len=config.max_edge_len,
            z_min=config.z_min,
            z_max=config.z_max,
            g_zero=config.g_zero,
            lam=config.baseline_lam if baseline else config.lam,
            I_range=config.I_range,
            l_max=config.l_max,
            prism=config.prism,
            seed=config.seed,
            mode=config.mode,
            d_max=config.d_max,
            baseline_rays=config.baseline_rays,
        )

    # sensing and motion

    def sense(self):
        scan = simulate_lidar(self.world, self.state, self.config.sensor)
        self.map.integrate_scan(scan.origin, scan.hits, scan.miss_dirs, self.config.sensor.R_max)
        # the body occupies its own prism, which the beams never see from inside
        self.map.clear_prism(self.state.p, self.config.prism)

    def follow(self, points, gains=None) -> tuple[bool, float, float]:
        """Fly through ``points`` (the first is the current pose), scanning at each waypoint.

        A leg that is no longer collision-free after a new scan aborts the rest.
        Returns ``(completed, elapsed_s, travelled_m)``.
        """
        c = self.config
        yawed = assign_yaw(points, self.state.psi)
        elapsed = 0.0
        travelled = 0.0
        for k in range(1, len(yawed)):
            wp = yawed[k]
            if self.t_motion + elapsed >= c.max_time:
                return False, elapsed, travelled
            if not self.map.segment_free(self.state.p, wp.p, c.prism):
                return False, elapsed, travelled
            elapsed += leg_time(self.state, wp, c.v_max, c.psi_rate)
            travelled += float(np.linalg.norm(wp.p - self.state.p))
            self.state = wp.copy()
            self.sense()
            record_visit(self.history, wp.p, gains[k] if gains is not None else 0.0)
        return True, elapsed, travelled

    def _gt_segment_clear(self, a, b) -> bool:
        n = max(1, math.ceil(float(np.linalg.norm(b - a)) / (self.config.r / 2)))
        return all(self.world.prism_clear(a + (b - a) * t, self.config.prism) for t in np.linspace(0, 1, n + 1))

    def warm_up(self) -> float:
        """In-place full turn then a small square hop, scanning along the way."""
        c = self.config
        elapsed = 0.0
        psi0 = self.state.psi
        for q in range(1, 5):
            self.state = State(self.state.p, psi0 + q * math.pi / 2)
            self.sense()
        elapsed += 2 * math.pi / c.psi_rate
        p = self.state.p.copy()
        for sx, sy in ((1, 1), (-1, 1), (1, -1), (-1, -1)):
            corners = [
                p,
                p + [sx * c.hop, 0, 0],
                p + [sx * c.hop, sy * c.hop, 0],
                p + [0, sy * c.hop, 0],
                p,
            ]
            if all(self._gt_segment_clear(a, b) for a, b in zip(corners, corners[1:])):
                for wp in assign_yaw(corners, self.state.psi)[1:]:
                    elapsed += leg_time(self.state, wp, c.v_max, c.psi_rate)
                    self.state = wp.copy()
                    self.sense()
                    record_visit(self.history, wp.p, 0.0)
                break
        return elapsed

    def _record(self, it, t_c, motion, dead, tree=None, best_gain=0.0, waypoints=()):
        self.t_exp += t_c + motion
        self.t_motion += motion
        rec = IterRecord(
            iter=it,
            t_c_ms=t_c * 1000.0,
            explored_m3=self.map.known_volume(),
            state=self.state.copy(),
            dead_end=dead,
            motion_s=motion,
            t_s=self.t_exp,
            unknown_reachable_m3=unknown_in(self.map, self.reachable),
            best_gain=best_gain,
            waypoints=[list(map(float, w)) for w in waypoints],
        )
        if tree is not None:
            rec.nodes, rec.attempts, rec.rejected, rec.reads = (
                len(tree.nodes), tree.attempts, tree.rejected, tree.reads,
            )
        self.log.records.append(rec)
        return rec

    def run(self) -> ExplorationLog:
        c = self.config
        log = self.log
        try:
            self.sense()
            record_visit(self.history, self.state.p, 0.0)
            self._record(0, 0.0, self.warm_up(), False)
            self._loop()
        except (UnreachableHistory, PlannerError) as exc:
            log.status = "failed"
            log.error = f"{type(exc).__name__}: {exc}"
        if log.status == "running":
            log.status = "complete"
        log.truncated = log.status == "truncated"
        return log

    def _loop(self):
        c = self.config
        log = self.log
        low_streak = 0
        idle = 0
        baseline = c.mode == "raycast-baseline"
        for it in range(1, c.max_iterations + 1):
            if self.t_motion >= c.max_time:
                log.status = "truncated"
                return
            t0 = time.perf_counter()
            exhausted = False
            try:
                tree = grow_tree(self.map, self.state, self.params, self.rng)
                path = best_path(tree)
                gain = path.gain
            except SamplingExhausted as exc:
                tree, path, gain, exhausted = exc.tree, None, 0.0, True
            unknown = unknown_in(self.map, self.reachable)
            low_streak = low_streak + 1 if gain < c.g_zero else 0
            done = unknown <= 0 or (unknown < c.completion * self.reachable_m3 and low_streak >= c.K)
            rec_path = target = None
            if not done and c.recovery and not baseline and not self.recovering:
                stats = IterationStats(gain, exhausted)
                if detect_dead_end(stats, self.map, self.reachable, c.g_zero, c.completion):
                    target = self.history.best()
                    if target is not None:
                        rec_path = recovery_path(self.history, self.map, c.prism, target)
            t_c = time.perf_counter() - t0
            if c.keep_trees and tree is not None:
                log.trees.append(tree)
            if done:
                self._record(it, t_c, 0.0, False, tree, gain)
                return
            motion = 0.0
            waypoints = []
            dead = False
            if rec_path is not None:
                n0 = self.state.p.copy()
                self.history.consumed.add(target.index)
                _, motion, dist = execute_recovery(self, rec_path)
                dead = True
                waypoints = rec_path
                log.dead_end_events.append(
                    DeadEndEvent(it, n0.tolist(), target.pos.tolist(), len(rec_path) - 1, dist)
                )
            elif path is not None and len(path.nodes) > 1:
                nodes = path.nodes[:2] if baseline else path.nodes
                waypoints = [n.pos for n in nodes]
                _, motion, _ = self.follow(waypoints, [n.gain for n in nodes])
            before = log.records[-1].explored_m3
            rec = self._record(it, t_c, motion, dead, tree, gain, waypoints)
            idle = idle + 1 if rec.explored_m3 <= before else 0
            if idle >= c.stall_iters:
                log.status = "stalled"
                return
        log.status = "truncated"


def run_exploration(config: RunConfig, world: World | None = None) -> ExplorationLog:
    return Explorer(config, world).run()
