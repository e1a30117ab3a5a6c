"""
Binary edge weight maps and the ingestion path for externally
precomputed (HED) soft maps stored as 8-bit PGM
"""
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

from errors import ConfigurationError, IngestionError
from processors.image_io import read_image, write_pgm

PROVENANCES = ("canny", "external")
BINARIZE_THRESHOLD = 0.5


@dataclass(frozen=True, eq=False)
class EdgeMap:
    """1 marks an edge pixel, 0 no edge"""

    mask: np.ndarray
    provenance: str = "canny"

    def __post_init__(self):
        mask = np.asarray(self.mask)
        if mask.ndim != 2:
            raise ConfigurationError(f"edge map must be 2-D, got shape {mask.shape}")
        if not np.isin(mask, (0, 1)).all():
            raise ConfigurationError("edge map values must be 0 or 1")
        if self.provenance not in PROVENANCES:
            raise ConfigurationError(f"unknown edge provenance {self.provenance!r}")
        object.__setattr__(self, "mask", mask.astype(np.uint8))

    @property
    def dims(self) -> tuple[int, int]:
        return self.mask.shape

    def as_weights(self) -> np.ndarray:
        return self.mask.astype(np.float64)


def load_edge_map(path: Union[str, Path], expected_dims: tuple[int, int]) -> EdgeMap:
    """Read a soft edge map and binarize it at 0.5 (8-bit: values > 127)"""
    soft = read_image(path)
    if soft.shape != tuple(expected_dims):
        raise IngestionError(path, f"edge map is {soft.shape[0]}x{soft.shape[1]}, "
                                   f"expected {expected_dims[0]}x{expected_dims[1]}")
    return EdgeMap((soft > BINARIZE_THRESHOLD).astype(np.uint8), provenance="external")


def save_edge_map(edge_map: EdgeMap, path: Union[str, Path]):
    write_pgm(path, edge_map.as_weights())


def edge_density(edge_map: EdgeMap) -> float:
    """Fraction of edge pixels"""
    return float(edge_map.mask.mean()) if edge_map.mask.size else 0.0
