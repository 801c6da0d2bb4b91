from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


def wrap_angle(a: float) -> float:
    """Map an angle to ``[-pi, pi)``; angles already in range come back unchanged."""
    if -math.pi <= a < math.pi:
        return a
    w = math.fmod(a + math.pi, 2.0 * math.pi)
    if w < 0:
        w += 2.0 * math.pi
    w -= math.pi
    # fmod can round up to exactly pi for inputs a hair below an odd multiple of pi
    return -math.pi if w >= math.pi else w


@dataclass
class State:
    """Robot pose: position ``p`` (metres) and yaw ``psi`` in ``[-pi, pi)``."""

    p: np.ndarray = field(default_factory=lambda: np.zeros(3))
    psi: float = 0.0

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=float).reshape(3)
        self.psi = wrap_angle(float(self.psi))

    def copy(self) -> State:
        return State(self.p.copy(), self.psi)
