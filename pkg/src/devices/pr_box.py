import numpy as np

from src.analysis.nosignalling import BehaviorTable, pr_box
from src.devices.base_device import BaseDevice


class PRBoxDevice(BaseDevice):
    """The Popescu-Rohrlich box: a uniform, a XOR b = x AND y."""

    kind = "pr_box"

    def behavior(self) -> BehaviorTable:
        return pr_box()

    def respond(self, x, y, rng_a, rng_b):
        a = (rng_a.random(len(x)) < 0.5).astype(np.uint8)
        return a, a ^ (np.asarray(x, dtype=np.uint8) & np.asarray(y, dtype=np.uint8))
