"""Deterministic, order-independent random streams.

Every randomized operation in the pipeline derives a fresh splitmix64
stream from (seed, record ordinal) or (seed, block index), so output is
byte-identical regardless of worker count or platform.  The stdlib
Mersenne Twister is avoided on hot paths because its per-record
re-seeding cost dominates at corpus scale.
"""

from __future__ import annotations

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _mix64(z: int) -> int:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 & _MASK
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & _MASK
    return z ^ (z >> 31)


def derive(seed: int, *salts: int) -> int:
    """Fold salts into seed; equal inputs give equal streams."""
    h = seed & _MASK
    for s in salts:
        h = _mix64((h + _GOLDEN) & _MASK) ^ (s & _MASK)
    return h & _MASK


class SplitMix64:
    """Tiny deterministic generator (splitmix64)."""

    __slots__ = ("_state",)

    def __init__(self, seed: int):
        self._state = seed & _MASK

    def next_u64(self) -> int:
        self._state = (self._state + _GOLDEN) & _MASK
        return _mix64(self._state)

    def coin(self) -> int:
        """Fair bit: 0 or 1."""
        return self.next_u64() >> 63

    def below(self, n: int) -> int:
        """Uniform integer in [0, n).  Bias is < n / 2**64, negligible for
        the small n used here."""
        if n <= 0:
            raise ValueError("n must be positive")
        return self.next_u64() % n

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates."""
        for i in range(len(items) - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]
