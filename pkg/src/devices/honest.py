"""Honest quantum devices sharing the state |01> - e^{i chi}|10>.

The correlator is E(x, y) = -v * cos(phi_A(x) + phi_B(y) + chi), with the
visibility v as the single noise parameter.
"""

import math
from typing import Sequence, Tuple

import numpy as np

from src.analysis.nosignalling import BehaviorTable
from src.data.schemas import CELLS
from src.devices.base_device import BaseDevice
from src.utils.errors import DomainError
from src.utils.logger import logger

DEFAULT_CHI_DEG = 90.0
DEFAULT_PHI_A_DEG = (0.0, 90.0)
DEFAULT_PHI_B_DEG = (45.0, 135.0)

# v at which the ideal angles give the observed violation 2.414.
REFERENCE_VISIBILITY = 0.8536


def _check_visibility(v: float) -> None:
    if not 0.0 <= v <= 1.0:
        raise DomainError(f"visibility must lie in [0, 1], got {v}")


def correlator_matrix(
    v: float, chi: float, phi_a: Sequence[float], phi_b: Sequence[float]
) -> np.ndarray:
    """E indexed [x, y]; angles in radians."""
    _check_visibility(v)
    e = np.empty((2, 2))
    for x in (0, 1):
        for y in (0, 1):
            e[x, y] = -v * math.cos(phi_a[x] + phi_b[y] + chi)
    return e


def honest_behavior(
    v: float,
    chi: float = math.radians(DEFAULT_CHI_DEG),
    phi_a: Sequence[float] = tuple(math.radians(d) for d in DEFAULT_PHI_A_DEG),
    phi_b: Sequence[float] = tuple(math.radians(d) for d in DEFAULT_PHI_B_DEG),
) -> BehaviorTable:
    e = correlator_matrix(v, chi, phi_a, phi_b)
    p = np.zeros((2, 2, 2, 2))
    for a, b, x, y in CELLS:
        sign = 1.0 if a == b else -1.0
        p[a, b, x, y] = 0.25 * (1.0 + sign * e[x, y])
    return BehaviorTable(p=p)


class HonestQuantumDevice(BaseDevice):
    kind = "honest"

    def __init__(
        self,
        visibility: float,
        chi: float = math.radians(DEFAULT_CHI_DEG),
        phi_a: Tuple[float, float] = tuple(math.radians(d) for d in DEFAULT_PHI_A_DEG),
        phi_b: Tuple[float, float] = tuple(math.radians(d) for d in DEFAULT_PHI_B_DEG),
    ):
        super().__init__()
        _check_visibility(visibility)
        self.visibility = visibility
        self.chi = chi
        self.phi_a = tuple(phi_a)
        self.phi_b = tuple(phi_b)
        self._correlators = correlator_matrix(visibility, chi, self.phi_a, self.phi_b)
        logger.debug(f"Honest device with v={visibility}, E={self._correlators.tolist()}")

    def behavior(self) -> BehaviorTable:
        return honest_behavior(self.visibility, self.chi, self.phi_a, self.phi_b)

    def respond(self, x, y, rng_a, rng_b):
        n = len(x)
        # Uniform marginal for A, then B agrees with probability (1 + E) / 2.
        a = (rng_a.random(n) < 0.5).astype(np.uint8)
        p_same = 0.5 * (1.0 + self._correlators[x, y])
        flip = (rng_b.random(n) >= p_same).astype(np.uint8)
        return a, a ^ flip
