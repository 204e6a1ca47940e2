"""Exact sampling of input pairs from a private seed, with bit accounting.

Input pairs are decoded from the seed by the interval algorithm: the seed bits
read so far pin a uniform point inside a dyadic interval, and a pair is emitted
as soon as that interval fits inside one pair's sub-interval. Probabilities are
rendered as integer frequencies over 2^precision_bits, so sampling is exact for
that dyadic rendering of the distribution.

Pairs are decoded in blocks; the expected cost is at most H + 3 bits per block,
so block length 1 is the per-trial sampler and long blocks approach H per pair.
"""

import math
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np

from src.config import settings
from src.data.schemas import INPUT_PAIRS, SettingsDistribution
from src.extraction.toeplitz import read_bits
from src.utils.errors import DomainError, SeedExhaustedError
from src.utils.logger import logger


class SeedStream:
    """Sequential reader over a private seed, most significant bit first."""

    def __init__(self, source: Union[bytes, bytearray, np.ndarray, List[int]]):
        if isinstance(source, (bytes, bytearray)):
            bits = np.unpackbits(np.frombuffer(bytes(source), dtype=np.uint8), bitorder="big")
        else:
            bits = np.asarray(source, dtype=np.int64).reshape(-1)
            if bits.size and (bits.min() < 0 or bits.max() > 1):
                raise ValueError("seed bits may only contain 0 and 1")
        self._bits = bits.astype(np.uint8)
        self._position = 0

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "SeedStream":
        return cls(read_bits(path))

    @classmethod
    def from_rng(cls, seed: int, n_bits: int) -> "SeedStream":
        """Pseudo-random seed for demonstrations only."""
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
        return cls(rng.integers(0, 2, size=n_bits, dtype=np.uint8))

    @property
    def bits_consumed(self) -> int:
        return self._position

    @property
    def bits_remaining(self) -> int:
        return int(self._bits.size) - self._position

    def __len__(self) -> int:
        return int(self._bits.size)

    def read_bit(self) -> int:
        if self._position >= self._bits.size:
            raise SeedExhaustedError(f"seed exhausted after {self._position} bits")
        bit = int(self._bits[self._position])
        self._position += 1
        return bit

    def read_bits(self, count: int) -> np.ndarray:
        if count > self.bits_remaining:
            raise SeedExhaustedError(
                f"{count} seed bits requested, only {self.bits_remaining} left"
            )
        chunk = self._bits[self._position : self._position + count].copy()
        self._position += count
        return chunk


def quantize(dist: SettingsDistribution, precision_bits: int) -> List[int]:
    """Integer frequencies summing to 2^precision_bits; zero only where P(xy) = 0."""
    total = 1 << precision_bits
    probs = dist.as_array()
    scaled = [p * total for p in probs]
    freqs = [max(1, math.floor(s)) if p > 0 else 0 for p, s in zip(probs, scaled)]

    diff = total - sum(freqs)
    if diff > 0:
        order = sorted(
            (i for i in range(4) if probs[i] > 0), key=lambda i: scaled[i] - freqs[i], reverse=True
        )
        for k in range(diff):
            freqs[order[k % len(order)]] += 1
    while diff < 0:
        largest = max(range(4), key=lambda i: freqs[i])
        take = min(-diff, freqs[largest] - 1)
        freqs[largest] -= take
        diff += take
    return freqs


def _decode_block(
    count: int, freqs: List[int], precision_bits: int, stream: SeedStream
) -> List[int]:
    cumulative = [0]
    for f in freqs:
        cumulative.append(cumulative[-1] + f)

    # Target interval [low, low + width) / 2^exp; seed point in [v, v + 1) / 2^b.
    low, width, exp = 0, 1, 0
    v, b = 0, 0
    symbols = []
    for _ in range(count):
        exp_next = exp + precision_bits
        base = low << precision_bits
        while True:
            e = max(exp_next, b)
            point_lo = v << (e - b)
            point_hi = (v + 1) << (e - b)
            shift = e - exp_next
            chosen = None
            for s in range(4):
                if freqs[s] == 0:
                    continue
                lower = (base + width * cumulative[s]) << shift
                upper = (base + width * cumulative[s + 1]) << shift
                if lower <= point_lo < upper:
                    if point_hi <= upper:
                        chosen = s
                    break
            if chosen is not None:
                break
            v = (v << 1) | stream.read_bit()
            b += 1
        low = base + width * cumulative[chosen]
        width *= freqs[chosen]
        exp = exp_next
        symbols.append(chosen)
    return symbols


def sample_settings_accounted(
    n: int,
    dist: SettingsDistribution,
    seed_stream: SeedStream,
    block_size: Optional[int] = None,
    precision_bits: Optional[int] = None,
) -> Tuple[np.ndarray, int]:
    """Draw n input pairs from ``dist`` using seed bits; returns (pairs, bits consumed)."""
    if n < 1:
        raise DomainError(f"n must be positive, got {n}")
    block_size = block_size or settings.sampler_block_size
    precision_bits = precision_bits or settings.sampler_precision_bits
    freqs = quantize(dist, precision_bits)

    start = seed_stream.bits_consumed
    symbols: List[int] = []
    for offset in range(0, n, block_size):
        symbols.extend(_decode_block(min(block_size, n - offset), freqs, precision_bits, seed_stream))

    pairs = np.array([INPUT_PAIRS[s] for s in symbols], dtype=np.uint8)
    consumed = seed_stream.bits_consumed - start
    logger.info(
        f"Sampled {n} input pairs from {consumed} seed bits "
        f"({consumed / n:.4f} bits/trial, H = {dist.entropy_bits:.4f})"
    )
    return pairs, consumed
