"""Trial-log generation from device models.

Randomness comes from numpy's counter-based Philox generator. A seed is
expanded with ``SeedSequence.spawn`` into three independent streams: stream 0
draws the settings, streams 1 and 2 feed sides A and B.
"""

from pathlib import Path
from typing import Mapping, Optional, Tuple, Union

import numpy as np
from dotenv import dotenv_values

from src.data.schemas import (
    DeviceKind,
    DeviceModel,
    RunConfig,
    SettingsDistribution,
    TrialLog,
)
from src.devices.base_device import BaseDevice
from src.devices.device_factory import DeviceFactory
from src.utils.errors import DomainError
from src.utils.logger import logger

SETTINGS_STREAM, SIDE_A_STREAM, SIDE_B_STREAM = 0, 1, 2

INPUT_DISTRIBUTIONS = ("uniform", "biased", "catalysis", "product_biased")

RUN_CONFIG_KEYS = (
    "device",
    "n",
    "visibility",
    "chi_deg",
    "phi_a0_deg",
    "phi_a1_deg",
    "phi_b0_deg",
    "phi_b1_deg",
    "input_dist",
    "q",
    "alpha",
    "rng_seed",
    "a_table",
    "b_table",
    "strategy",
)


def rng_streams(seed: int) -> Tuple[np.random.Generator, ...]:
    children = np.random.SeedSequence(seed).spawn(3)
    return tuple(np.random.Generator(np.random.Philox(child)) for child in children)


def gen_settings(n: int, dist: SettingsDistribution, rng_seed: int) -> np.ndarray:
    """i.i.d. input pairs as an (n, 2) array of (x, y)."""
    if n < 1:
        raise DomainError(f"n must be positive, got {n}")
    rng = rng_streams(rng_seed)[SETTINGS_STREAM]
    index = rng.choice(4, size=n, p=dist.as_array())
    return np.stack([index >> 1, index & 1], axis=1).astype(np.uint8)


def run_with_settings(device: BaseDevice, settings_xy: np.ndarray, device_seed: int) -> TrialLog:
    """Feed an externally chosen settings sequence to ``device``."""
    settings_xy = np.asarray(settings_xy, dtype=np.uint8)
    _, rng_a, rng_b = rng_streams(device_seed)
    x, y = settings_xy[:, 0], settings_xy[:, 1]
    a, b = device.respond(x, y, rng_a, rng_b)
    return TrialLog(x=x, y=y, a=a, b=b)


def run(config: RunConfig) -> TrialLog:
    device = DeviceFactory.get_device(config.device)
    settings_xy = gen_settings(config.n, config.dist, config.rng_seed)
    log = run_with_settings(device, settings_xy, config.rng_seed)
    logger.info(
        f"Simulated {config.n} trials on a {device.get_kind_name()} device (seed {config.rng_seed})"
    )
    return log


def distribution_from_name(
    name: str, n: int, q: Optional[float] = None, alpha: Optional[float] = None
) -> SettingsDistribution:
    if name == "uniform":
        return SettingsDistribution.uniform()
    if name == "catalysis":
        return SettingsDistribution.catalysis(n, 11.0 if alpha is None else alpha)
    if name in ("biased", "product_biased"):
        if q is None:
            raise ValueError(f"input distribution '{name}' needs q")
        if name == "biased":
            return SettingsDistribution.biased(q)
        return SettingsDistribution.product_biased(q)
    raise ValueError(f"Unknown input distribution '{name}'. Supported: {INPUT_DISTRIBUTIONS}")


def _bit_pair(text: str) -> Tuple[int, int]:
    bits = tuple(int(part) for part in str(text).replace(",", " ").split())
    if len(bits) != 2:
        raise ValueError(f"expected two bits, got '{text}'")
    return bits  # type: ignore[return-value]


def run_config_from_mapping(values: Mapping[str, Union[str, None]]) -> RunConfig:
    """Build a RunConfig from string key=value pairs."""
    unknown = set(values) - set(RUN_CONFIG_KEYS)
    if unknown:
        raise ValueError(f"Unknown run config keys {sorted(unknown)}. Supported: {RUN_CONFIG_KEYS}")
    if not values.get("n"):
        raise ValueError("run config needs n")

    def _float(key: str, default: float) -> float:
        raw = values.get(key)
        return float(raw) if raw not in (None, "") else default

    n = int(values["n"])
    defaults = DeviceModel()
    device_fields = {
        "kind": DeviceKind(values.get("device") or DeviceKind.HONEST.value),
        "visibility": _float("visibility", defaults.visibility),
        "chi_deg": _float("chi_deg", defaults.chi_deg),
        "phi_a_deg": (
            _float("phi_a0_deg", defaults.phi_a_deg[0]),
            _float("phi_a1_deg", defaults.phi_a_deg[1]),
        ),
        "phi_b_deg": (
            _float("phi_b0_deg", defaults.phi_b_deg[0]),
            _float("phi_b1_deg", defaults.phi_b_deg[1]),
        ),
        "strategy": values.get("strategy") or defaults.strategy,
    }
    if values.get("a_table"):
        device_fields["a_table"] = _bit_pair(values["a_table"])
    if values.get("b_table"):
        device_fields["b_table"] = _bit_pair(values["b_table"])

    q = values.get("q")
    alpha = values.get("alpha")
    dist = distribution_from_name(
        values.get("input_dist") or "uniform",
        n,
        float(q) if q else None,
        float(alpha) if alpha else None,
    )
    return RunConfig(
        n=n,
        dist=dist,
        rng_seed=int(values.get("rng_seed") or 0),
        device=DeviceModel(**device_fields),
    )


def load_run_config(path: Union[str, Path], n: Optional[int] = None) -> RunConfig:
    """Read a key=value run configuration file.

    An explicit ``n`` replaces the file's value before the input distribution
    is built, so n-dependent distributions such as catalysis follow it.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"run config {path} does not exist")
    values = dict(dotenv_values(path))
    if n is not None:
        values["n"] = str(n)
    config = run_config_from_mapping(values)
    logger.info(f"Loaded run config {path}: device={config.device.kind.value}, n={config.n}")
    return config


if __name__ == "__main__":
    from src.analysis.estimator import chsh_from_log

    demo = RunConfig(n=3016, rng_seed=7, device=DeviceModel(visibility=0.8536))
    estimate = chsh_from_log(run(demo), demo.dist)
    logger.info(f"I_hat = {estimate.i_hat:.4f} +- {estimate.std_error:.4f}")
