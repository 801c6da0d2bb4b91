"""Batch benchmarks: run (scenario, r, mode, seed) grids, write per-run logs and one summary CSV."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

from shadownbv.planner import MODES
from shadownbv.runner import ConfigError, Explorer, ExplorationLog, RunConfig
from shadownbv.world import ScenarioError, load_world

SUMMARY_HEADER = "scenario,r,mode,runs,tc_mean_ms,tc_std_ms,texp_mean_s,texp_std_s,completion_pct,deadends"
CURVE_MAGIC = "# shadownbv-volume v1"
CURVE_HEADER = "t_s,explored_m3"

EXIT_OK = 0
EXIT_PARTIAL = 1
EXIT_CONFIG = 2


@dataclass(frozen=True)
class RunGroup:
    scenario: str
    r: float
    mode: str
    seeds: tuple[int, ...]


@dataclass
class BenchmarkSpec:
    """Groups of runs; repetition ``k`` shifts every seed by ``k * seed_stride`` so seeds never repeat."""

    groups: list[RunGroup]
    out: Path
    repetitions: int = 1
    overrides: dict = field(default_factory=dict)
    keep_runs: bool = True

    def __post_init__(self):
        self.out = Path(self.out)
        if not self.groups or self.repetitions < 1:
            raise ConfigError("a benchmark needs at least one run")
        for g in self.groups:
            if not g.seeds:
                raise ConfigError(f"no seeds for {g.scenario} r={g.r:g} {g.mode}")
            if len(set(g.seeds)) != len(g.seeds):
                raise ConfigError(f"duplicate seeds for {g.scenario} r={g.r:g} {g.mode}")
            if g.mode not in MODES:
                raise ConfigError(f"mode must be one of {', '.join(MODES)}; got {g.mode!r}")

    @property
    def seed_stride(self) -> int:
        return max(max(g.seeds) - min(g.seeds) + 1 for g in self.groups)

    def seeds(self, group: RunGroup) -> list[int]:
        return [s + k * self.seed_stride for k in range(self.repetitions) for s in group.seeds]


@dataclass
class RunResult:
    scenario: str
    r: float
    mode: str
    seed: int
    status: str
    error: str | None = None
    paths: dict = field(default_factory=dict)
    log: ExplorationLog | None = None

    @property
    def failed(self) -> bool:
        return self.status == "failed"


@dataclass
class SummaryRow:
    scenario: str
    r: float
    mode: str
    runs: int
    tc_mean_ms: float
    tc_std_ms: float
    texp_mean_s: float
    texp_std_s: float
    completion_pct: float
    deadends: int
    failed: int = 0
    flags: list[str] = field(default_factory=list)

    def csv_fields(self) -> list[str]:
        return [
            self.scenario, f"{self.r!r}", self.mode, str(self.runs),
            f"{self.tc_mean_ms!r}", f"{self.tc_std_ms!r}", f"{self.texp_mean_s!r}", f"{self.texp_std_s!r}",
            f"{self.completion_pct!r}", str(self.deadends),
        ]


def mean_std(values) -> tuple[float, float]:
    """Mean and population standard deviation; ``nan`` for no values."""
    v = [float(x) for x in values]
    if not v:
        return math.nan, math.nan
    m = math.fsum(v) / len(v)
    return m, math.sqrt(math.fsum((x - m) ** 2 for x in v) / len(v))


def emit_volume_curve(log: ExplorationLog) -> str:
    """Two-column ``t_s,explored_m3`` CSV of the run; a truncated run's times are clipped to the cap."""
    if not log.records:
        raise ValueError("empty log")
    c = log.config
    lines = [CURVE_MAGIC, f"# scenario={c.scenario} r={c.r:g} mode={c.mode} seed={c.seed} status={log.status}"]
    cap = None
    if log.truncated:
        cap = c.max_time
        lines.append(f"# truncated at cap {cap:g} s")
    lines.append(CURVE_HEADER)
    for rec in log.records:
        t = rec.t_s if cap is None else min(rec.t_s, cap)
        lines.append(f"{t!r},{rec.explored_m3!r}")
    return "\n".join(lines) + "\n"


def read_volume_curve(text: str) -> list[tuple[float, float]]:
    rows = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    if not rows or rows[0] != CURVE_HEADER:
        raise ValueError("not a volume curve")
    return [tuple(float(v) for v in ln.split(",")) for ln in rows[1:]]


def _run_one(group: RunGroup, seed: int, spec: BenchmarkSpec, world) -> RunResult:
    cfg = RunConfig.from_scenario(group.scenario, world=world, r=group.r, mode=group.mode, seed=seed, **spec.overrides)
    explorer = Explorer(cfg, world)
    log = explorer.run()
    res = RunResult(group.scenario, group.r, group.mode, seed, log.status, log.error, log=log)
    if spec.keep_runs:
        runs = spec.out / "runs"
        res.paths = log.write(runs)
        prefix = res.paths["log"].stem
        res.paths["curve"] = runs / f"{prefix}_volume.csv"
        res.paths["curve"].write_text(emit_volume_curve(log))
    return res


def check_configs(spec: BenchmarkSpec) -> dict[str, object]:
    """Load every scenario and validate one config per group; raises :class:`ConfigError` on bad parameters.

    Returns the loaded worlds; scenarios that fail to load map to the error message.
    """
    worlds: dict[str, object] = {}
    for g in spec.groups:
        if g.scenario not in worlds:
            try:
                worlds[g.scenario] = load_world(g.scenario)
            except ScenarioError as exc:
                worlds[g.scenario] = str(exc)
        w = worlds[g.scenario]
        if not isinstance(w, str):
            RunConfig.from_scenario(g.scenario, world=w, r=g.r, mode=g.mode, seed=g.seeds[0], **spec.overrides)
    return worlds


def run_benchmark(spec: BenchmarkSpec, progress=None) -> tuple[list[SummaryRow], list[RunResult]]:
    """Execute every run in order, write per-run files and ``summary.csv`` under ``spec.out``.

    Runs are sequential so measured planning times do not interfere.
    ``progress`` is called with each :class:`RunResult` as it finishes.
    """
    worlds = check_configs(spec)
    spec.out.mkdir(parents=True, exist_ok=True)
    results: list[RunResult] = []
    rows: list[SummaryRow] = []
    for g in spec.groups:
        group_results = []
        for seed in spec.seeds(g):
            w = worlds[g.scenario]
            if isinstance(w, str):
                res = RunResult(g.scenario, g.r, g.mode, seed, "failed", w)
            else:
                res = _run_one(g, seed, spec, w)
            group_results.append(res)
            if progress is not None:
                progress(res)
        results.extend(group_results)
        rows.append(summarize(g, group_results))
    write_summary(spec.out / "summary.csv", rows)
    return rows, results


def summarize(group: RunGroup, results: list[RunResult]) -> SummaryRow:
    """Aggregate completed runs: t_c pooled over all planning iterations, t_exp and completion per run."""
    ok = [r for r in results if not r.failed and r.log is not None]
    tc = [t for r in ok for t in _tc_values(r)]
    tc_m, tc_s = mean_std(tc)
    te_m, te_s = mean_std(r.log.t_exp for r in ok)
    comp, _ = mean_std(100.0 * r.log.completion for r in ok)
    row = SummaryRow(
        group.scenario, group.r, group.mode, len(ok), tc_m, tc_s, te_m, te_s, comp,
        sum(r.log.dead_end_count for r in ok), failed=len(results) - len(ok),
    )
    for r in results:
        if r.failed:
            row.flags.append(f"seed {r.seed} failed: {r.error}")
        elif r.status != "complete":
            row.flags.append(f"seed {r.seed} {r.status}")
    return row


def _tc_values(res: RunResult) -> list[float]:
    # read back the written log when there is one so the summary matches the files exactly
    if "log" in res.paths:
        return [t for it, t in _read_runlog_tc(res.paths["log"]) if it > 0]
    return res.log.planning_tc_ms


def _read_runlog_tc(path: Path) -> list[tuple[int, float]]:
    with open(path, newline="") as fh:
        rows = csv.DictReader(ln for ln in fh if not ln.startswith("#"))
        return [(int(row["iter"]), float(row["t_c_ms"])) for row in rows]


def write_summary(path: Path, rows: list[SummaryRow]):
    lines = ["# shadownbv-benchmark v1", "# t_c pooled over planning iterations; stddevs are population (ddof=0)"]
    for row in rows:
        for flag in row.flags:
            lines.append(f"# flag {row.scenario} r={row.r:g} {row.mode}: {flag}")
    lines.append(SUMMARY_HEADER)
    lines.extend(",".join(row.csv_fields()) for row in rows)
    Path(path).write_text("\n".join(lines) + "\n")


def read_summary(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(ln for ln in fh if not ln.startswith("#")))


def exit_code(rows: list[SummaryRow]) -> int:
    return EXIT_PARTIAL if any(r.failed for r in rows) else EXIT_OK


def format_table(rows: list[SummaryRow]) -> str:
    out = [f"{'scenario':<12} {'r':>5} {'mode':<17} {'runs':>4} {'t_c ms':>16} {'t_exp s':>18} {'compl %':>8} {'dead':>5}"]
    for r in rows:
        out.append(
            f"{Path(r.scenario).stem:<12} {r.r:>5g} {r.mode:<17} {r.runs:>4} "
            f"{r.tc_mean_ms:>8.2f} ±{r.tc_std_ms:<6.2f} {r.texp_mean_s:>9.1f} ±{r.texp_std_s:<7.1f} "
            f"{r.completion_pct:>8.2f} {r.deadends:>5}"
        )
    return "\n".join(out)

