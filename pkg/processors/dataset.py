"""
Dataset ingestion and the padding rules that make arbitrary image sizes
fit the networks and the 8x8 codec grid.
"""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from edges.canny import CannyConfig, canny
from edges.edge_map import EdgeMap, load_edge_map
from errors import ConfigurationError, IngestionError, PreconditionError
from models.common import check_mode
from processors.image_io import read_image

IMAGE_SUFFIXES = (".pgm", ".ppm")
EDGE_DIR = "edges"
PAD_MULTIPLE = 16
SPLITS = ("train", "test")
EDGE_SOURCES = ("canny", "external")


@dataclass(frozen=True)
class ImageEntry:
    path: Path
    dims: tuple[int, int]
    edge_path: Optional[Path] = None


@dataclass
class DatasetManifest:
    root: Path
    split: str
    entries: list[ImageEntry] = field(default_factory=list)
    rejected: list[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.entries)

    def load(self, entry: ImageEntry) -> np.ndarray:
        return read_image(entry.path)

    def edge_map(self, entry: ImageEntry, img: np.ndarray, source: str = "canny",
                 canny_cfg: CannyConfig = CannyConfig()) -> EdgeMap:
        """Edge map for one image: Canny on the image or the stored external map"""
        if source not in EDGE_SOURCES:
            raise ConfigurationError(f"edge source must be one of {EDGE_SOURCES}, got {source!r}")
        if source == "canny":
            return canny(img, canny_cfg)
        if entry.edge_path is None:
            raise IngestionError(entry.path, f"no external edge map in {EDGE_DIR}/")
        return load_edge_map(entry.edge_path, img.shape)


def ingest(directory: Union[str, Path], split: str = "train") -> DatasetManifest:
    """Validate every PGM/PPM under directory, in lexicographic order"""
    root = Path(directory)
    if split not in SPLITS:
        raise ConfigurationError(f"split must be one of {SPLITS}, got {split!r}")
    if not root.is_dir():
        raise IngestionError(root, "dataset directory does not exist")

    manifest = DatasetManifest(root=root, split=split)
    for path in sorted(p for p in root.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES):
        try:
            img = read_image(path)
        except IngestionError as e:
            logging.warning(f"skipping unreadable image: {e}")
            manifest.rejected.append(str(path))
            continue
        edge_path = root / EDGE_DIR / f"{path.stem}.pgm"
        manifest.entries.append(ImageEntry(path, img.shape, edge_path if edge_path.is_file() else None))

    if not manifest.entries:
        raise IngestionError(root, f"no valid images ({len(manifest.rejected)} unreadable)")
    logging.info(f"ingested {len(manifest)} {split} images from {root}, {len(manifest.rejected)} rejected")
    return manifest


@dataclass(frozen=True)
class CropRecord:
    """Original dims of a padded image"""

    height: int
    width: int

    @property
    def dims(self) -> tuple[int, int]:
        return self.height, self.width


def _reflect_pad(img: np.ndarray, pad_h: int, pad_w: int) -> np.ndarray:
    for axis, amount in ((0, pad_h), (1, pad_w)):
        if amount == 0:
            continue
        widths = [(0, 0), (0, 0)]
        widths[axis] = (0, amount)
        # a single row/column has nothing to mirror
        mode = "edge" if img.shape[axis] == 1 else "reflect"
        img = np.pad(img, widths, mode=mode)
    return img


def prepare(img: np.ndarray, mode: str = "FR", multiple: int = PAD_MULTIPLE) -> tuple[np.ndarray, CropRecord]:
    """Reflect-pad bottom/right to a multiple of 16 (CR halving, then whole 8x8 blocks)"""
    check_mode(mode)
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2 or img.size == 0:
        raise PreconditionError(f"prepare needs a non-empty 2-D image, got shape {img.shape}")
    height, width = img.shape
    padded = _reflect_pad(img, -height % multiple, -width % multiple)
    return padded, CropRecord(height, width)


def unprepare(img: np.ndarray, crop: CropRecord) -> np.ndarray:
    img = np.asarray(img)
    if img.shape[0] < crop.height or img.shape[1] < crop.width:
        raise ConfigurationError(f"image {img.shape} is smaller than the recorded {crop.dims}")
    return img[:crop.height, :crop.width]


def center_crop(img: np.ndarray, size: int) -> np.ndarray:
    """Square training crop; images smaller than size are reflect-padded first"""
    img = np.asarray(img)
    height, width = img.shape
    img = _reflect_pad(img, max(0, size - height), max(0, size - width))
    top = (img.shape[0] - size) // 2
    left = (img.shape[1] - size) // 2
    return img[top:top + size, left:left + size]
