"""Deterministic corpus interleaving and epoch arithmetic.

Mixing is block-exact: within every consecutive block of `block` output
records each source contributes exactly block x weight records, so the
target ratio (e.g. knowledge:natural at 50:50) holds at every block
boundary instead of only in expectation.  Slot order inside a block is a
permutation seeded by (seed, block index); records of one source keep
their own order.  Output stops at the first exhausted source.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import islice
from typing import Iterable, Iterator, Sequence

from kgprep._rand import SplitMix64, derive


@dataclass(frozen=True)
class MixSpec:
    """Named sources with rational weights; block is the granularity at
    which ratios are exact."""

    sources: tuple[tuple[str, Fraction], ...]
    seed: int = 0
    block: int = 2

    def __post_init__(self):
        if not self.sources:
            raise ValueError("at least one source is required")
        names = [name for name, _ in self.sources]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate source names: {names}")
        if self.block < 1:
            raise ValueError("block must be >= 1")
        total = Fraction(0)
        for name, weight in self.sources:
            if not name:
                raise ValueError("source names must be non-empty")
            if weight < 0:
                raise ValueError(f"negative weight for source {name!r}")
            share = weight * self.block
            if share.denominator != 1:
                raise ValueError(
                    f"block {self.block} x weight {weight} of source {name!r} "
                    "is not a whole number of records"
                )
            total += weight
        if total != 1:
            raise ValueError(f"weights sum to {total}, expected 1")

    @property
    def shares(self) -> tuple[int, ...]:
        return tuple(int(w * self.block) for _, w in self.sources)


@dataclass
class MixReport:
    """Final counts; populated once the mix iterator is fully consumed."""

    emitted: int = 0
    leftover_per_source: dict = field(default_factory=dict)


def mix(streams: Sequence[Iterable], spec: MixSpec, report: MixReport | None = None) -> Iterator:
    """Interleave streams per spec; one stream per spec source, same order.

    Ends before the first incomplete block: records already buffered for
    that block count as leftovers along with everything still unread.
    """
    if len(streams) != len(spec.sources):
        raise ValueError(
            f"{len(streams)} streams for {len(spec.sources)} configured sources"
        )
    if report is None:
        report = MixReport()
    iters = [iter(s) for s in streams]
    shares = spec.shares
    slot_template = [k for k, share in enumerate(shares) for _ in range(share)]

    block_idx = 0
    while True:
        buffers = []
        short = False
        for k, it in enumerate(iters):
            buf = list(islice(it, shares[k]))
            buffers.append(buf)
            if len(buf) < shares[k]:
                short = True
        if short:
            for (name, _), buf, it in zip(spec.sources, buffers, iters):
                report.leftover_per_source[name] = len(buf) + sum(1 for _ in it)
            return
        slots = list(slot_template)
        SplitMix64(derive(spec.seed, block_idx)).shuffle(slots)
        cursors = [0] * len(buffers)
        for k in slots:
            yield buffers[k][cursors[k]]
            cursors[k] += 1
            report.emitted += 1
        block_idx += 1


@dataclass(frozen=True, slots=True)
class TrainConfig:
    steps: int
    batch_size: int
    mix_fraction: float
    corpus_size: int

    def __post_init__(self):
        if self.steps < 0 or self.batch_size < 0 or self.corpus_size < 0:
            raise ValueError("steps, batch_size and corpus_size must be >= 0")
        if not 0 <= self.mix_fraction <= 1:
            raise ValueError("mix_fraction must be in [0, 1]")


def epochs(cfg: TrainConfig) -> float:
    """Passes over a corpus implied by a training run: steps x batch_size
    x mix_fraction / corpus_size."""
    if cfg.corpus_size == 0:
        raise ValueError("corpus_size must be positive to compute epochs")
    return cfg.steps * cfg.batch_size * cfg.mix_fraction / cfg.corpus_size
