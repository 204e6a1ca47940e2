import math

from src.data.schemas import DeviceKind, DeviceModel
from src.devices.base_device import BaseDevice
from src.devices.honest import HonestQuantumDevice
from src.devices.local import LocalDeterministicDevice, get_strategy
from src.devices.pr_box import PRBoxDevice
from src.utils.logger import logger


class DeviceFactory:
    @staticmethod
    def get_device(model: DeviceModel = None) -> BaseDevice:
        """Factory method to build a device from its model description."""
        model = model or DeviceModel()
        kind = DeviceKind(model.kind)

        logger.info(f"Creating device of kind: {kind.value}")

        if kind == DeviceKind.HONEST:
            return HonestQuantumDevice(
                visibility=model.visibility,
                chi=math.radians(model.chi_deg),
                phi_a=tuple(math.radians(d) for d in model.phi_a_deg),
                phi_b=tuple(math.radians(d) for d in model.phi_b_deg),
            )
        elif kind == DeviceKind.DETERMINISTIC:
            return LocalDeterministicDevice(a_table=model.a_table, b_table=model.b_table)
        elif kind == DeviceKind.MEMORY_LHV:
            return get_strategy(model.strategy)
        elif kind == DeviceKind.PR_BOX:
            return PRBoxDevice()

        else:
            logger.error(f"Unsupported device kind: {kind}")
            raise ValueError(
                f"Unsupported device kind: {kind}. Supported: {[k.value for k in DeviceKind]}."
            )


if __name__ == "__main__":
    from src.analysis.nosignalling import chsh_value

    for device_kind in (DeviceKind.HONEST, DeviceKind.DETERMINISTIC, DeviceKind.PR_BOX):
        device = DeviceFactory.get_device(DeviceModel(kind=device_kind))
        logger.info(f"{device.get_kind_name()}: CHSH {chsh_value(device.behavior()):.4f}")
