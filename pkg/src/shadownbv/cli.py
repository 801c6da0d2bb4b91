"""Command line entry point: ``shadownbv --scenario maze --mode both --runs 5``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from shadownbv import kernels
from shadownbv.harness import (
    EXIT_CONFIG,
    BenchmarkSpec,
    RunGroup,
    exit_code,
    format_table,
    run_benchmark,
)
from shadownbv.planner import MODES
from shadownbv.runner import ConfigError, RunConfig
from shadownbv.world import bundled_scenarios

# config-file keys that mirror command line flags; everything else overrides RunConfig fields
_FLAG_KEYS = {"scenario", "resolution", "mode", "seed", "runs", "out", "max_wall_time", "no_recovery", "repetitions"}
_ALIASES = {"lambda": "lam", "max-wall-time": "max_wall_time", "no-recovery": "no_recovery"}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="shadownbv",
        description="Run exploration benchmarks and write per-run logs plus a summary CSV.",
    )
    p.add_argument("--scenario", action="append", help=f"scenario file or bundled name ({', '.join(bundled_scenarios())}); repeatable")
    p.add_argument("--resolution", type=float, action="append", help="map resolution in metres; repeatable (default: scenario value)")
    p.add_argument("--mode", choices=[*MODES, "both"], help="planner mode (default rsc-cuboid)")
    p.add_argument("--seed", type=int, help="first seed (default 0)")
    p.add_argument("--runs", type=int, help="seeds per configuration (default 1)")
    p.add_argument("--repetitions", type=int, help="repeat the seed block with fresh seeds (default 1)")
    p.add_argument("--out", type=Path, help="output directory (default results)")
    p.add_argument("--max-wall-time", type=float, dest="max_wall_time", help="cap on simulated motion time, seconds")
    p.add_argument("--no-recovery", action="store_true", default=None, help="disable dead-end recovery")
    p.add_argument("--config", type=Path, help="JSON file with flag values and parameter overrides")
    p.add_argument("--list-scenarios", action="store_true", help="print bundled scenarios and exit")
    p.add_argument("--quiet", action="store_true", help="only print the summary table")
    return p


def load_config_file(path: Path) -> tuple[dict, dict]:
    """Split a JSON config into flag values and RunConfig overrides."""
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    fields = {f.name for f in dataclasses.fields(RunConfig)} - {"scenario", "r", "mode", "seed", "max_time", "recovery"}
    flags, overrides = {}, {}
    for key, val in data.items():
        k = _ALIASES.get(key, key.replace("-", "_") if key.replace("-", "_") in _FLAG_KEYS else key)
        if k in _FLAG_KEYS:
            flags[k] = val
        elif k in fields:
            overrides[k] = tuple(val) if k == "prism" else val
        else:
            raise ConfigError(f"unknown config key {key!r}")
    return flags, overrides


def _as_list(v):
    return list(v) if isinstance(v, (list, tuple)) else [v]


def build_spec(args: argparse.Namespace) -> BenchmarkSpec:
    flags, overrides = load_config_file(args.config) if args.config else ({}, {})

    def pick(name, default):
        v = getattr(args, name)
        return v if v is not None else flags.get(name, default)

    scenarios = _as_list(pick("scenario", None) or [])
    if not scenarios:
        raise ConfigError("no --scenario given")
    resolutions = _as_list(pick("resolution", [None]))
    mode = pick("mode", MODES[0])
    modes = list(MODES) if mode == "both" else _as_list(mode)
    seed, runs = int(pick("seed", 0)), int(pick("runs", 1))
    if runs < 1:
        raise ConfigError("--runs must be >= 1")
    max_time = pick("max_wall_time", None)
    if max_time is not None:
        overrides["max_time"] = float(max_time)
    if pick("no_recovery", False):
        overrides["recovery"] = False
    groups = []
    for scn in scenarios:
        for r in resolutions:
            for m in modes:
                groups.append(RunGroup(str(scn), _resolution(scn, r), m, tuple(range(seed, seed + runs))))
    return BenchmarkSpec(groups, pick("out", Path("results")), int(pick("repetitions", 1)), overrides)


def _resolution(scenario: str, r) -> float:
    if r is not None:
        return float(r)
    # scenario default, or the RunConfig default when the scenario cannot be read yet
    try:
        return RunConfig.from_scenario(scenario).r
    except ConfigError:
        raise
    except Exception:
        return RunConfig.__dataclass_fields__["r"].default


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.list_scenarios:
        print("\n".join(bundled_scenarios()))
        return 0
    try:
        spec = build_spec(args)

        def progress(res):
            if not args.quiet:
                log = res.log
                extra = "" if log is None else f" t_exp={log.t_exp:.1f}s completion={100 * log.completion:.1f}%"
                err = f" ({res.error})" if res.error else ""
                print(f"{Path(res.scenario).stem} r={res.r:g} {res.mode} seed={res.seed}: {res.status}{extra}{err}", flush=True)

        if not args.quiet:
            print(f"kernels: {kernels.BACKEND}", flush=True)
        rows, _ = run_benchmark(spec, progress)
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(format_table(rows))
    print(f"summary: {spec.out / 'summary.csv'}")
    return exit_code(rows)


if __name__ == "__main__":
    sys.exit(main())
