"""Local hidden-variable devices, with and without memory of past rounds."""

from itertools import product
from typing import Callable, Dict, List, Sequence, Tuple

import numpy as np

from src.analysis.nosignalling import BehaviorTable, deterministic_box
from src.devices.base_device import BaseDevice
from src.utils.logger import logger

OutputTable = Tuple[int, int]

DIGEST_MODULUS = (1 << 61) - 1


def _chsh_of_tables(a_table: OutputTable, b_table: OutputTable) -> int:
    return sum(
        (-1) ** (x * y) * (-1) ** (a_table[x] ^ b_table[y]) for x, y in product((0, 1), repeat=2)
    )


# The eight deterministic strategies that reach the local bound I = +2.
OPTIMAL_TABLES: List[Tuple[OutputTable, OutputTable]] = [
    ((a0, a1), (b0, b1))
    for a0, a1, b0, b1 in product((0, 1), repeat=4)
    if _chsh_of_tables((a0, a1), (b0, b1)) == 2
]


class LocalDeterministicDevice(BaseDevice):
    kind = "deterministic"

    def __init__(self, a_table: Sequence[int] = (0, 0), b_table: Sequence[int] = (0, 0)):
        super().__init__()
        if any(v not in (0, 1) for v in list(a_table) + list(b_table)) or len(a_table) != 2 or len(b_table) != 2:
            raise ValueError(f"output tables must be pairs of bits, got {a_table}, {b_table}")
        self.a_table = np.array(a_table, dtype=np.uint8)
        self.b_table = np.array(b_table, dtype=np.uint8)

    def behavior(self) -> BehaviorTable:
        return deterministic_box(tuple(self.a_table), tuple(self.b_table))

    def respond(self, x, y, rng_a, rng_b):
        return self.a_table[np.asarray(x)], self.b_table[np.asarray(y)]


class Transcript:
    """Completed rounds as both sides see them after each round closes."""

    def __init__(self):
        self.rounds = 0
        self.digest = 0
        # [input][output] tallies of each side's own past outputs
        self.a_tally = [[0, 0], [0, 0]]
        self.b_tally = [[0, 0], [0, 0]]

    def append(self, x: int, y: int, a: int, b: int) -> None:
        self.rounds += 1
        code = 8 * x + 4 * y + 2 * a + b + 1
        self.digest = (self.digest * 17 + code) % DIGEST_MODULUS
        self.a_tally[x][a] += 1
        self.b_tally[y][b] += 1


Rule = Callable[[Transcript, int], int]


class MemoryLHVDevice(BaseDevice):
    """Local strategy whose outputs depend on the own input and the past transcript.

    Within a round neither rule sees the other side's input.
    """

    kind = "memory_lhv"

    def __init__(self, rule_a: Rule, rule_b: Rule, name: str = "memory_lhv"):
        super().__init__(name=name)
        self.rule_a = rule_a
        self.rule_b = rule_b

    def respond(self, x, y, rng_a, rng_b):
        n = len(x)
        a = np.empty(n, dtype=np.uint8)
        b = np.empty(n, dtype=np.uint8)
        history = Transcript()
        for i in range(n):
            xi, yi = int(x[i]), int(y[i])
            a[i] = self.rule_a(history, xi)
            b[i] = self.rule_b(history, yi)
            history.append(xi, yi, int(a[i]), int(b[i]))
        return a, b


# --- Named strategies --- #


def _switching_table(history: Transcript) -> Tuple[OutputTable, OutputTable]:
    return OPTIMAL_TABLES[history.digest % len(OPTIMAL_TABLES)]


def transcript_switching() -> MemoryLHVDevice:
    """Picks one of the optimal deterministic tables from a digest of the transcript."""
    return MemoryLHVDevice(
        rule_a=lambda h, x: _switching_table(h)[0][x],
        rule_b=lambda h, y: _switching_table(h)[1][y],
        name="transcript_switching",
    )


def _majority(tally: List[int], fallback: int) -> int:
    zeros, ones = tally
    if ones == zeros:
        return fallback
    return int(ones > zeros)


def majority_echo() -> MemoryLHVDevice:
    """Each side repeats the majority of its own past outputs for the current input.

    Ties fall back to an optimal deterministic table chosen by the round number.
    """

    def rule_a(h: Transcript, x: int) -> int:
        return _majority(h.a_tally[x], OPTIMAL_TABLES[h.rounds % len(OPTIMAL_TABLES)][0][x])

    def rule_b(h: Transcript, y: int) -> int:
        return _majority(h.b_tally[y], OPTIMAL_TABLES[h.rounds % len(OPTIMAL_TABLES)][1][y])

    return MemoryLHVDevice(rule_a=rule_a, rule_b=rule_b, name="majority_echo")


LHV_STRATEGIES: Dict[str, Callable[[], MemoryLHVDevice]] = {
    "transcript_switching": transcript_switching,
    "majority_echo": majority_echo,
}


def get_strategy(name: str) -> MemoryLHVDevice:
    try:
        device = LHV_STRATEGIES[name]()
    except KeyError:
        raise ValueError(
            f"Unknown memory LHV strategy '{name}'. Supported: {sorted(LHV_STRATEGIES)}"
        ) from None
    logger.debug(f"Built memory LHV strategy {name}")
    return device
