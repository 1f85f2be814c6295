"""Counter-based random streams built on the splitmix64 finalizer.

A draw is a pure function of (seed, path, stream, counter), so any subset of
paths can be simulated in any order, on any number of workers, with
identical results. The compiled kernels implement the same arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

MASK = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
TWO_PI = 2.0 * math.pi
INV_2_53 = 1.0 / 9007199254740992.0

STREAM_EVENTS = 0
STREAM_GRID = 1
STREAM_BRIDGE = 2
STREAM_MONITOR = 3


def mix64(z: int) -> int:
    z &= MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
    return z ^ (z >> 31)


def stream_key(seed: int, path: int, stream: int) -> int:
    inner = mix64((seed + GOLDEN * (stream + 1)) & MASK)
    return mix64((inner + GOLDEN * (path + 1)) & MASK)


def uniform(key: int, n: int) -> float:
    """n-th uniform on [0, 1) of the stream identified by ``key``."""
    return (mix64((key + GOLDEN * (n + 1)) & MASK) >> 11) * INV_2_53


def normal(key: int, n: int) -> float:
    """n-th standard normal of a stream (consumes counters 2n and 2n+1)."""
    u1 = 1.0 - uniform(key, 2 * n)
    u2 = uniform(key, 2 * n + 1)
    return math.sqrt(-2.0 * math.log(u1)) * math.cos(TWO_PI * u2)


def exponential(u: float, rate: float) -> float:
    return -math.log1p(-u) / rate


@dataclass
class PathRng:
    """Sequential view of the event stream of one path, plus indexed normals."""

    seed: int
    path: int

    def __post_init__(self):
        self.k_events = stream_key(self.seed, self.path, STREAM_EVENTS)
        self.k_grid = stream_key(self.seed, self.path, STREAM_GRID)
        self.k_bridge = stream_key(self.seed, self.path, STREAM_BRIDGE)
        self.counter = 0

    def next_uniform(self) -> float:
        u = uniform(self.k_events, self.counter)
        self.counter += 1
        return u

    def next_exponential(self, rate: float) -> float:
        return exponential(self.next_uniform(), rate)

    def grid_normal(self, k: int) -> float:
        return normal(self.k_grid, k)

    def bridge_normal(self, j: int) -> float:
        return normal(self.k_bridge, j)
