"""
Inference around a trained PrN/PoN pair: prepare -> PrN -> JPEG on the way
in, JPEG decode -> PoN -> unprepare on the way out. The .jpg stays a
standard file; everything the decoder side needs travels in a JSON sidecar.
"""
import json
import logging
import time
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Union

import numpy as np

from codec.jpeg import Bitstream, JpegCodec, bits_per_pixel, decode
from errors import IngestionError, RefusalError
from models.common import MODE_CR
from models.pon import pon_forward
from models.prn import prn_forward
from processors.dataset import CropRecord, prepare, unprepare
from storage.checkpoints import Checkpoint

SIDECAR_SUFFIX = ".json"


@dataclass(frozen=True)
class Sidecar:
    mode: str
    original_dims: tuple[int, int]
    padded_dims: tuple[int, int]
    qf: int
    checkpoint_sha256: str

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2)

    @classmethod
    def from_json(cls, text: str, path: Union[str, Path] = "<sidecar>") -> "Sidecar":
        try:
            raw = json.loads(text)
            return cls(
                mode=str(raw["mode"]),
                original_dims=tuple(int(v) for v in raw["original_dims"]),
                padded_dims=tuple(int(v) for v in raw["padded_dims"]),
                qf=int(raw["qf"]),
                checkpoint_sha256=str(raw["checkpoint_sha256"]),
            )
        except (ValueError, KeyError, TypeError) as e:
            raise IngestionError(path, f"malformed sidecar ({e})") from e


def sidecar_path(jpg_path: Union[str, Path]) -> Path:
    return Path(str(jpg_path) + SIDECAR_SUFFIX)


def read_sidecar(jpg_path: Union[str, Path]) -> Sidecar:
    path = sidecar_path(jpg_path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise IngestionError(path, f"cannot read sidecar ({e.strerror})") from e
    return Sidecar.from_json(text, path)


class CompressionEngine:
    def __init__(self, ckpt: Checkpoint, ckpt_hash: str):
        self.ckpt = ckpt
        self.ckpt_hash = ckpt_hash
        self.codec = JpegCodec(ckpt.qf)

    @property
    def mode(self) -> str:
        return self.ckpt.mode

    def compress(self, img: np.ndarray) -> tuple[Bitstream, Sidecar]:
        started = time.time()
        padded, crop = prepare(img, self.mode)
        latent = prn_forward(padded[None, None], self.ckpt.prn)
        bs = self.codec.encode(latent[0, 0])
        sidecar = Sidecar(
            mode=self.mode,
            original_dims=crop.dims,
            padded_dims=padded.shape,
            qf=self.ckpt.qf,
            checkpoint_sha256=self.ckpt_hash,
        )
        logging.debug(f"compressed {crop.dims} -> {len(bs)} bytes in {time.time() - started:.2f}s")
        return bs, sidecar

    def check_sidecar(self, sidecar: Sidecar):
        """Refuse to decode a stream made by another model pair"""
        if sidecar.checkpoint_sha256 != self.ckpt_hash:
            raise RefusalError(f"stream was produced with checkpoint {sidecar.checkpoint_sha256[:12]}, "
                               f"not {self.ckpt_hash[:12]}")
        if sidecar.mode != self.mode:
            raise RefusalError(f"stream mode {sidecar.mode} does not match checkpoint mode {self.mode}")
        if sidecar.qf != self.ckpt.qf:
            raise RefusalError(f"stream qf {sidecar.qf} does not match checkpoint qf {self.ckpt.qf}")
        oh, ow = sidecar.original_dims
        ph, pw = sidecar.padded_dims
        if ph < oh or pw < ow:
            raise RefusalError(f"padded dims {sidecar.padded_dims} smaller than original {sidecar.original_dims}")

    def decompress(self, bs: Bitstream, sidecar: Sidecar) -> np.ndarray:
        self.check_sidecar(sidecar)
        latent = decode(bs)
        ph, pw = sidecar.padded_dims
        expected = (ph // 2, pw // 2) if self.mode == MODE_CR else (ph, pw)
        if latent.shape != expected:
            raise RefusalError(f"decoded latent is {latent.shape}, sidecar implies {expected}")
        recon = pon_forward(latent[None, None], self.ckpt.pon)[0, 0]
        return unprepare(recon, CropRecord(*sidecar.original_dims))

    def reconstruct(self, img: np.ndarray) -> tuple[np.ndarray, Bitstream, float]:
        """Full round trip of one image with the rate measured against its original dims"""
        bs, sidecar = self.compress(img)
        recon = self.decompress(bs, sidecar)
        return recon, bs, bits_per_pixel(bs, sidecar.original_dims)


def jpeg_roundtrip(img: np.ndarray, qf: int) -> tuple[np.ndarray, Bitstream, float]:
    """Plain JPEG at the same qf, the anchor the trained pair is compared against"""
    codec = JpegCodec(qf)
    img = np.asarray(img, dtype=np.float64)
    bs = codec.encode(img)
    return codec.decode(bs), bs, bits_per_pixel(bs, img.shape)
