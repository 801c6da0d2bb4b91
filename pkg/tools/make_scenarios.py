"""Regenerate the procedurally built bundled scenarios."""

from pathlib import Path

from shadownbv.world import dead_end_world, dump_world, generate_maze

OUT = Path(__file__).resolve().parents[1] / "src" / "shadownbv" / "scenarios"

MAZES = [
    # name, nx, ny, seed, loop_fraction, height, description, params
    (
        "maze", 8, 8, 11, 0.1, 2.6,
        "Desk-scale maze, 8 x 8 cells of 2 m, 0.2 m walls, floor and ceiling slabs",
        {"resolution": 0.2, "v_max": 1.5, "I_range": 8.0, "lambda": 0.6, "max_time": 1800, "z_min": 0.8, "z_max": 1.8},
    ),
    (
        "large_maze", 15, 15, 5, 0.08, 2.4,
        "Large maze, 15 x 15 cells of 2 m, 0.2 m walls, floor and ceiling slabs",
        {"resolution": 0.2, "v_max": 1.5, "I_range": 8.0, "lambda": 0.6, "max_time": 3600, "z_min": 0.8, "z_max": 1.6},
    ),
]

DEAD_END_PARAMS = {
    "resolution": 0.4, "v_max": 1.0, "I_range": 5.0, "lambda": 0.3, "g_zero": 0.5,
    "max_time": 1800, "z_min": 0.8, "z_max": 1.6,
}


def main():
    for name, nx, ny, seed, loops, height, desc, params in MAZES:
        w = generate_maze(nx, ny, seed=seed, loop_fraction=loops, height=height, start_z=1.2, slab=0.2, name=name)
        w.params.update(params)
        head, rest = dump_world(w).split("\n", 1)
        call = f"generate_maze({nx}, {ny}, seed={seed}, loop_fraction={loops}, height={height}, slab=0.2)"
        (OUT / f"{name}.scn").write_text(f"{head}\n# {desc}.\n# Built by tools/make_scenarios.py: {call}.\n{rest}")
        print("wrote", name)
    w = dead_end_world(10, 4, start="middle", cell=2.0, wall=0.4, height=2.4, slab=0.4, name="dead_end")
    w.params.update(DEAD_END_PARAMS)
    head, rest = dump_world(w).split("\n", 1)
    call = 'dead_end_world(10, 4, start="middle", cell=2.0, wall=0.4, height=2.4, slab=0.4)'
    desc = "Ring of corridors with a 38-cell serpentine cul-de-sac; the start is halfway along it"
    (OUT / "dead_end.scn").write_text(f"{head}\n# {desc}.\n# Built by tools/make_scenarios.py: {call}.\n{rest}")
    print("wrote dead_end")


if __name__ == "__main__":
    main()
