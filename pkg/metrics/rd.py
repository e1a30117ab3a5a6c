"""
Rate-distortion samples and curves, per-image evaluation and the CSV
format curves are exchanged in.
"""
import csv
import io
import math
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Iterable, Optional, Union

import aiofiles
import numpy as np

from codec.jpeg import Bitstream, bits_per_pixel
from edges.canny import CannyConfig, canny
from edges.edge_map import EdgeMap
from errors import ConfigurationError, IngestionError
from metrics.quality import miou, ms_ssim, msssim_db, psnr, psnrb, ssim

CSV_COLUMNS = ("label", "qf", "bpp", "psnr", "ssim", "msssim", "psnrb", "miou")


@dataclass(frozen=True)
class RDPoint:
    qf: int
    bpp: float
    psnr: float
    ssim: float
    msssim: float
    psnrb: float
    miou: float

    def __post_init__(self):
        if not self.bpp > 0:
            raise ConfigurationError(f"bpp must be positive, got {self.bpp}")


@dataclass(frozen=True)
class RDCurve:
    label: str
    points: tuple[RDPoint, ...]

    def __post_init__(self):
        bpps = [p.bpp for p in self.points]
        if any(b2 <= b1 for b1, b2 in zip(bpps, bpps[1:])):
            raise ConfigurationError(f"curve '{self.label}' must have strictly increasing bpp, got {bpps}")

    @classmethod
    def from_points(cls, label: str, points: Iterable[RDPoint]) -> "RDCurve":
        return cls(label, tuple(sorted(points, key=lambda p: p.bpp)))


def evaluate_pair(f: np.ndarray, f_hat: np.ndarray, bs: Bitstream, qf: int,
                  original_dims: Optional[tuple[int, int]] = None,
                  reference_edges: Optional[EdgeMap] = None,
                  canny_cfg: CannyConfig = CannyConfig()) -> RDPoint:
    """
    All metrics of one reconstruction. Edges of f_hat always come from Canny;
    the reference edges are Canny on f unless an external map is supplied.
    """
    f = np.asarray(f, dtype=np.float64)
    f_hat = np.asarray(f_hat, dtype=np.float64)
    if f.shape != f_hat.shape:
        raise ConfigurationError(f"reconstruction {f_hat.shape} does not match original {f.shape}")
    dims = original_dims or f.shape
    truth = reference_edges if reference_edges is not None else canny(f, canny_cfg)
    return RDPoint(
        qf=qf,
        bpp=bits_per_pixel(bs, dims),
        psnr=psnr(f, f_hat),
        ssim=ssim(f, f_hat),
        msssim=ms_ssim(f, f_hat),
        psnrb=psnrb(f, f_hat),
        miou=miou(truth, canny(f_hat, canny_cfg)),
    )


def average_points(points: list[RDPoint]) -> RDPoint:
    """Field-wise mean over a directory; all points must share a qf"""
    if not points:
        raise ConfigurationError("cannot average an empty set of points")
    qfs = {p.qf for p in points}
    if len(qfs) != 1:
        raise ConfigurationError(f"points mix quality factors {sorted(qfs)}")
    names = [f.name for f in fields(RDPoint) if f.name != "qf"]
    # sorted so the aggregate does not depend on evaluation order
    means = {name: math.fsum(sorted(getattr(p, name) for p in points)) / len(points) for name in names}
    return RDPoint(qf=points[0].qf, **means)


def distinct_rates(points: Iterable[RDPoint]) -> tuple[list[RDPoint], list[RDPoint]]:
    """
    Split points, in qf order, into those with a new bpp and those repeating
    the bpp of a lower qf. Only the first group can form a curve.
    """
    kept, repeated = [], []
    seen = set()
    for p in sorted(points, key=lambda p: p.qf):
        (repeated if p.bpp in seen else kept).append(p)
        seen.add(p.bpp)
    return kept, repeated


async def write_curve_csv(path: Union[str, Path], curves: Iterable[RDCurve], with_msssim_db: bool = False):
    columns = list(CSV_COLUMNS) + (["msssim_db"] if with_msssim_db else [])
    buffer = io.StringIO(newline="")
    writer = csv.writer(buffer)
    writer.writerow(columns)
    for curve in curves:
        for p in curve.points:
            row = [curve.label, p.qf, repr(p.bpp), repr(p.psnr), repr(p.ssim), repr(p.msssim),
                   repr(p.psnrb), repr(p.miou)]
            if with_msssim_db:
                row.append(repr(msssim_db(p.msssim)))
            writer.writerow(row)
    async with aiofiles.open(path, "w", newline="", encoding="utf-8") as f:
        await f.write(buffer.getvalue())


def read_curve_csv(path: Union[str, Path]) -> list[RDCurve]:
    """Curves in file order; rows are grouped by label"""
    grouped: dict[str, list[RDPoint]] = {}
    try:
        with open(path, newline="", encoding="utf-8") as f:
            reader = csv.DictReader(f)
            missing = set(CSV_COLUMNS) - set(reader.fieldnames or [])
            if missing:
                raise IngestionError(path, f"curve file lacks columns {sorted(missing)}")
            for row in reader:
                grouped.setdefault(row["label"], []).append(RDPoint(
                    qf=int(row["qf"]),
                    bpp=float(row["bpp"]),
                    psnr=float(row["psnr"]),
                    ssim=float(row["ssim"]),
                    msssim=float(row["msssim"]),
                    psnrb=float(row["psnrb"]),
                    miou=float(row["miou"]),
                ))
    except OSError as e:
        raise IngestionError(path, f"cannot read curve file ({e.strerror})") from e
    except (ValueError, ConfigurationError) as e:
        raise IngestionError(path, f"malformed curve row ({e})") from e
    if not grouped:
        raise IngestionError(path, "curve file has no rows")
    return [RDCurve.from_points(label, points) for label, points in grouped.items()]
