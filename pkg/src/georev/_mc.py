"""Chunked, seeded Monte Carlo plumbing.

Every sampling budget is cut into fixed-size chunks.  Chunk ``i`` of a stream
gets its own generator derived from ``(seed, stream, i)``, and per-chunk
summaries are reduced in chunk order, so results are bit-identical no matter
how many workers evaluate the chunks.
"""

from __future__ import annotations

import math
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, List, Sequence, TypeVar

import numpy as np

CHUNK_SIZE = 1 << 16

T = TypeVar("T")


def stream_id(label: str) -> int:
    return zlib.crc32(label.encode("utf-8"))


def chunk_rng(seed: int, label: str, index: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed) & ((1 << 64) - 1), spawn_key=(stream_id(label), index))
    return np.random.Generator(np.random.PCG64(ss))


def chunk_sizes(total: int, chunk: int = CHUNK_SIZE) -> List[int]:
    if total < 0:
        raise ValueError("sample budget must be nonnegative")
    full, rest = divmod(int(total), chunk)
    return [chunk] * full + ([rest] if rest else [])


def map_chunks(
    fn: Callable[[np.random.Generator, int], T],
    total: int,
    seed: int,
    label: str,
    workers: int = 1,
) -> List[T]:
    """Evaluate ``fn(rng, size)`` on every chunk; output order is chunk order."""
    sizes = chunk_sizes(total)

    def job(i: int) -> T:
        return fn(chunk_rng(seed, label, i), sizes[i])

    if workers <= 1 or len(sizes) <= 1:
        return [job(i) for i in range(len(sizes))]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(job, range(len(sizes))))


def open_uniform(rng: np.random.Generator, size) -> np.ndarray:
    """Uniforms strictly inside (0, 1)."""
    k = rng.integers(0, 1 << 53, size=size, dtype=np.int64)
    return (k + 0.5) / float(1 << 53)


@dataclass(frozen=True)
class Summary:
    count: int
    mean: float
    m2: float

    @classmethod
    def of(cls, values: np.ndarray) -> "Summary":
        values = np.asarray(values, dtype=float)
        if values.size == 0:
            return cls(0, 0.0, 0.0)
        mean = float(values.mean())
        return cls(int(values.size), mean, float(np.sum((values - mean) ** 2)))

    def merge(self, other: "Summary") -> "Summary":
        if self.count == 0:
            return other
        if other.count == 0:
            return self
        n = self.count + other.count
        delta = other.mean - self.mean
        mean = self.mean + delta * other.count / n
        m2 = self.m2 + other.m2 + delta * delta * self.count * other.count / n
        return Summary(n, mean, m2)

    @property
    def variance(self) -> float:
        return self.m2 / (self.count - 1) if self.count > 1 else 0.0

    @property
    def std_err(self) -> float:
        return math.sqrt(self.variance / self.count) if self.count else math.inf


def reduce_summaries(parts: Sequence[Summary]) -> Summary:
    out = Summary(0, 0.0, 0.0)
    for part in parts:
        out = out.merge(part)
    return out
