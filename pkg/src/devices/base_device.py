from abc import ABC, abstractmethod
from typing import Optional, Tuple

import numpy as np

from src.analysis.nosignalling import BehaviorTable


class BaseDevice(ABC):
    """Abstract base class for a pair of black-box devices.

    Local devices compute a from x alone and b from y alone, each side drawing
    from its own generator. The honest and PR-box devices sample the pair
    (a, b) jointly from their behavior table, which is no-signalling but not
    local.
    """

    def __init__(self, name: Optional[str] = None):
        self.name = name or self.__class__.__name__

    @abstractmethod
    def respond(
        self,
        x: np.ndarray,
        y: np.ndarray,
        rng_a: np.random.Generator,
        rng_b: np.random.Generator,
    ) -> Tuple[np.ndarray, np.ndarray]:
        """Outputs (a, b) for the whole input sequence, in round order."""
        pass

    def behavior(self) -> Optional[BehaviorTable]:
        """Single-trial behavior of a memoryless device, None if the device has memory."""
        return None

    def get_kind_name(self) -> str:
        """Returns the short device kind, e.g. 'honest' or 'pr_box'."""
        return getattr(self, "kind", self.__class__.__name__.lower())
