"""
Shared model-level types: operating mode and parameter counting
"""
from dataclasses import dataclass
from typing import TYPE_CHECKING, Union

from errors import ConfigurationError
from nn.tensor import ConvLayer

if TYPE_CHECKING:
    from models.pon import PoNParams
    from models.prn import PrNParams

MODE_CR = "CR"
MODE_FR = "FR"
MODES = (MODE_CR, MODE_FR)

STRIDE_LAST = "last"
STRIDE_FIRST = "first"
STRIDE_POSITIONS = (STRIDE_LAST, STRIDE_FIRST)


def check_mode(mode: str) -> str:
    if mode not in MODES:
        raise ConfigurationError(f"mode must be one of {MODES}, got {mode!r}")
    return mode


@dataclass(frozen=True)
class ModeConfig:
    """CR halves the latent resolution, FR keeps it; fixed per model pair"""

    mode: str = MODE_FR

    def __post_init__(self):
        check_mode(self.mode)

    @property
    def compact(self) -> bool:
        return self.mode == MODE_CR


def count_params(*networks: Union["PrNParams", "PoNParams", ConvLayer]) -> int:
    """Number of scalar learnables across whole networks or single layers"""
    # runtime import: prn and pon import this module
    from models.pon import PoNParams
    from models.prn import PrNParams

    total = 0
    for net in networks:
        if isinstance(net, ConvLayer):
            total += net.num_params()
        elif isinstance(net, (PrNParams, PoNParams)):
            total += sum(layer.num_params() for layer in net.layers())
        else:
            raise ConfigurationError(f"cannot count parameters of {type(net).__name__}")
    return total
