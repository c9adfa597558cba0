"""Counter-based random streams.

Every random word is a pure function of ``(seed, sample index, counter)``, so
an ensemble can be cut into blocks and handed to any number of workers
without changing a single draw.  The mixing function is the SplitMix64
finalizer; rows and counters are walked with two distinct odd increments.

Slot layout per mode ``m`` (0-based): counters ``4*m + j`` for ``j`` in 0..3.
Slot 0 drives the radius, slot 1 the angle, slot 2 the second radius factor
of laws that need one.  Slot 3 is reserved.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
GAMMA2 = 0xD1B54A32D192ED03
MIX1 = 0xBF58476D1CE4E5B9
MIX2 = 0x94D049BB133111EB
SLOTS_PER_MODE = 4
TWO_POW_M52 = 2.0 ** -52


def mix64(z: int) -> int:
    """SplitMix64 finalizer on a Python integer."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * MIX1) & MASK64
    z = ((z ^ (z >> 27)) * MIX2) & MASK64
    return z ^ (z >> 31)


def mix64_array(z: np.ndarray) -> np.ndarray:
    z = z.astype(np.uint64, copy=True)
    z ^= z >> np.uint64(30)
    z *= np.uint64(MIX1)
    z ^= z >> np.uint64(27)
    z *= np.uint64(MIX2)
    z ^= z >> np.uint64(31)
    return z


def stream_key(seed: int) -> int:
    return mix64((seed & MASK64) + GOLDEN)


def row_keys(key: int, start: int, count: int) -> np.ndarray:
    idx = np.arange(start + 1, start + count + 1, dtype=np.uint64)
    return mix64_array(np.uint64(key) + idx * np.uint64(GOLDEN))


def words(rows: np.ndarray, counters: np.ndarray) -> np.ndarray:
    """Random words for every (row key, counter) pair, shape (rows, counters)."""
    c = (counters.astype(np.uint64) + np.uint64(1)) * np.uint64(GAMMA2)
    return mix64_array(rows[:, None] + c[None, :])


def to_unit(w: np.ndarray) -> np.ndarray:
    """Map 64-bit words to doubles in the open interval (0, 1)."""
    # 52 bits plus half a step: every value is exact and strictly inside (0, 1)
    return ((w >> np.uint64(12)).astype(np.float64) + 0.5) * TWO_POW_M52


@dataclass(frozen=True)
class CounterRNG:
    """A reproducible random stream identified by a single integer seed."""

    seed: int

    @property
    def key(self) -> int:
        return stream_key(self.seed)

    def spawn(self, tag: int) -> "CounterRNG":
        """Independent child stream; children with distinct tags never overlap."""
        return CounterRNG(mix64(self.key ^ mix64((tag & MASK64) + GAMMA2)))

    def uniforms(self, start: int, count: int, slots: int) -> np.ndarray:
        """Uniforms on (0, 1) for sample rows ``start..start+count`` and counters ``0..slots``."""
        rows = row_keys(self.key, start, count)
        return to_unit(words(rows, np.arange(slots, dtype=np.uint64)))

    def numpy_generator(self) -> np.random.Generator:
        """A numpy Philox generator keyed off this stream (for permutations)."""
        return np.random.Generator(np.random.Philox(key=self.key))
