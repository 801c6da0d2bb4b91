"""Visit history, dead-end detection and shortcut return to the best visited node."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from shadownbv.grid_map import CellState, OccupancyMap


class UnreachableHistory(RuntimeError):
    pass


class RecoveryError(RuntimeError):
    pass


@dataclass
class HistoryEntry:
    pos: np.ndarray
    gain: float
    index: int


@dataclass
class History:
    """Executed waypoints in visit order; ``ordered()`` lists them newest first."""

    entries: list[HistoryEntry] = field(default_factory=list)
    consumed: set[int] = field(default_factory=set)

    def __len__(self):
        return len(self.entries)

    def ordered(self) -> list[HistoryEntry]:
        return self.entries[::-1]

    @property
    def current(self) -> HistoryEntry:
        return self.entries[-1]

    def best(self, skip_consumed: bool = True) -> HistoryEntry | None:
        """Entry with the highest recorded gain; ties go to the most recent visit."""
        best = None
        for e in self.entries:
            if skip_consumed and e.index in self.consumed:
                continue
            if best is None or e.gain >= best.gain:
                best = e
        return best


def record_visit(history: History, pos, gain: float) -> HistoryEntry:
    e = HistoryEntry(np.asarray(pos, dtype=float).copy(), max(float(gain), 0.0), len(history.entries))
    history.entries.append(e)
    return e


@dataclass
class IterationStats:
    best_gain: float
    exhausted: bool = False


def unknown_in(m: OccupancyMap, region_mask: np.ndarray) -> float:
    return float(np.count_nonzero(m.cells[region_mask] == CellState.UNKNOWN)) * m.voxel_volume


def detect_dead_end(
    stats: IterationStats,
    m: OccupancyMap,
    reachable: np.ndarray,
    g_zero: float,
    completion: float = 0.02,
) -> bool:
    """Low best gain (or no samples at all) while reachable Unknown volume is above the completion threshold."""
    stuck = stats.best_gain < g_zero or stats.exhausted
    if not stuck:
        return False
    total = float(np.count_nonzero(reachable)) * m.voxel_volume
    return unknown_in(m, reachable) > completion * total


def _get_path(seq, first: int, last: int, free) -> list[int]:
    # scan back from the target towards the anchor for the first node the anchor sees
    r = last
    while r != first:
        if free(seq[first], seq[r]):
            break
        r -= 1
    if r == first:
        raise UnreachableHistory("no collision-free shortcut from anchor")
    if r != last:
        return [r] + _get_path(seq, r, last, free)
    return [last]


def recovery_path(history: History, m: OccupancyMap, prism_dims, target: HistoryEntry | None = None) -> list[np.ndarray]:
    """Waypoints from the current node to the best node, shortcutting over history.

    Candidates are history entries between the current node and the target
    (newest first). From each anchor the candidate closest to the target that
    has a free straight segment becomes the next anchor. Falls back to
    retracing every visit in reverse; raises :class:`UnreachableHistory` if
    that also collides.
    """
    if not len(history):
        raise UnreachableHistory("empty history")
    if target is None:
        target = history.best()
    if target is None:
        raise UnreachableHistory("no recovery target left")
    seq = [e.pos for e in history.entries[target.index :]][::-1]
    last = len(seq) - 1
    if last == 0:
        return [seq[0]]

    def free(a, b):
        return m.segment_free(a, b, prism_dims)

    try:
        idx = _get_path(seq, 0, last, free)
        return [seq[0]] + [seq[i] for i in idx]
    except UnreachableHistory:
        pass
    if all(free(a, b) for a, b in zip(seq, seq[1:])):
        return list(seq)
    raise UnreachableHistory("reverse history path is blocked")


def execute_recovery(runner, path: list[np.ndarray]):
    """Fly the recovery path on ``runner``; nested recoveries are refused.

    ``runner`` must expose ``recovering`` and ``follow(points)`` returning
    ``(completed, elapsed_s, travelled_m)``, which is passed through.
    """
    if runner.recovering:
        raise RecoveryError("recovery already in progress")
    runner.recovering = True
    try:
        return runner.follow(path)
    finally:
        runner.recovering = False
