"""
Versioned binary checkpoint container.

Layout: magic b"EDGP", u16 format version, u32 metadata length, metadata as
compact sorted-key JSON, then every array as little-endian float64 in the
order the metadata lists their shapes: PrN params, PoN params, PrN Adam
moments (m then v), PoN Adam moments (m then v).
"""
import hashlib
import json
import logging
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from errors import ConfigurationError, IngestionError
from models.common import check_mode
from models.pon import PoNParams
from models.prn import PrNParams
from nn.optim import AdamState
from training.trainer import TrainState

MAGIC = b"EDGP"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sHI")
_ADAM_HYPER = ("lr", "beta1", "beta2", "epsilon")


@dataclass
class Checkpoint:
    prn: PrNParams
    pon: PoNParams
    prn_opt: AdamState
    pon_opt: AdamState
    qf: int
    epoch: int
    seed: int
    # training settings the pair was produced with; empty when unknown
    settings: dict = field(default_factory=dict)

    @property
    def mode(self) -> str:
        return self.prn.mode

    @classmethod
    def from_state(cls, state: TrainState, qf: int, seed: int, settings: Optional[dict] = None) -> "Checkpoint":
        return cls(state.prn, state.pon, state.prn_opt, state.pon_opt, qf=qf, epoch=state.epoch, seed=seed,
                   settings=dict(settings or {}))


def _adam_meta(opt: AdamState) -> dict:
    meta = {name: getattr(opt, name) for name in _ADAM_HYPER}
    meta["step_count"] = opt.step_count
    return meta


def encode_checkpoint(ckpt: Checkpoint) -> bytes:
    if ckpt.pon.mode != ckpt.prn.mode:
        raise ConfigurationError(f"PrN mode {ckpt.prn.mode} and PoN mode {ckpt.pon.mode} differ")
    arrays = (ckpt.prn.params() + ckpt.pon.params()
              + ckpt.prn_opt.first_moment + ckpt.prn_opt.second_moment
              + ckpt.pon_opt.first_moment + ckpt.pon_opt.second_moment)
    meta = {
        "mode": ckpt.mode,
        "qf": ckpt.qf,
        "epoch": ckpt.epoch,
        "seed": ckpt.seed,
        "settings": ckpt.settings,
        "prn": {
            "features": [ckpt.prn.l1.out_channels, ckpt.prn.l2.out_channels],
            "stride_position": ckpt.prn.stride_position,
        },
        "pon": {
            "features": ckpt.pon.features,
            "blocks": len(ckpt.pon.blocks),
            "res_scale": ckpt.pon.res_scale,
        },
        "prn_adam": _adam_meta(ckpt.prn_opt),
        "pon_adam": _adam_meta(ckpt.pon_opt),
        "shapes": [list(a.shape) for a in arrays],
    }
    meta_bytes = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode("utf-8")
    body = b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes() for a in arrays)
    return _HEADER.pack(MAGIC, FORMAT_VERSION, len(meta_bytes)) + meta_bytes + body


def _split_moments(arrays: list[np.ndarray], count: int) -> tuple[list, list, list]:
    return arrays[:count], arrays[count:2 * count], arrays[2 * count:]


def decode_checkpoint(data: bytes, path: Union[str, Path] = "<bytes>") -> Checkpoint:
    try:
        if len(data) < _HEADER.size:
            raise ValueError("file shorter than the header")
        magic, version, meta_len = _HEADER.unpack_from(data)
        if magic != MAGIC:
            raise ValueError(f"bad magic {magic!r}")
        if version != FORMAT_VERSION:
            raise ValueError(f"unsupported format version {version}")
        meta = json.loads(data[_HEADER.size:_HEADER.size + meta_len].decode("utf-8"))
        offset = _HEADER.size + meta_len

        arrays = []
        for shape in meta["shapes"]:
            count = int(np.prod(shape))
            if offset + 8 * count > len(data):
                raise ValueError("truncated array data")
            arrays.append(np.frombuffer(data, dtype="<f8", count=count, offset=offset)
                          .astype(np.float64).reshape(shape))
            offset += 8 * count
        if offset != len(data):
            raise ValueError(f"{len(data) - offset} trailing bytes")

        mode = check_mode(meta["mode"])
        settings = meta.get("settings", {})
        if not isinstance(settings, dict):
            raise ValueError("settings must be a JSON object")
        prn = PrNParams.create(mode, features=tuple(meta["prn"]["features"]),
                               stride_position=meta["prn"]["stride_position"])
        pon = PoNParams.create(mode, features=meta["pon"]["features"], num_blocks=meta["pon"]["blocks"],
                               res_scale=meta["pon"]["res_scale"])
        n_prn, n_pon = len(prn.params()), len(pon.params())
        if len(arrays) != 3 * (n_prn + n_pon):
            raise ValueError("array count does not match the network layout")
        prn_params, rest = arrays[:n_prn], arrays[n_prn:]
        pon_params, rest = rest[:n_pon], rest[n_pon:]
        prn_m, prn_v, rest = _split_moments(rest, n_prn)
        pon_m, pon_v, _ = _split_moments(rest, n_pon)
        for net, params in ((prn, prn_params), (pon, pon_params)):
            for current, loaded in zip(net.params(), params):
                if current.shape != loaded.shape:
                    raise ValueError(f"array shape {loaded.shape} where {current.shape} was expected")
            net.load_params(params)
    except (ValueError, KeyError, TypeError, struct.error, ConfigurationError) as e:
        raise IngestionError(path, f"not a valid checkpoint ({e})") from e

    def adam(meta_opt, m, v) -> AdamState:
        return AdamState(first_moment=m, second_moment=v, step_count=meta_opt["step_count"],
                         **{name: meta_opt[name] for name in _ADAM_HYPER})

    return Checkpoint(
        prn=prn,
        pon=pon,
        prn_opt=adam(meta["prn_adam"], prn_m, prn_v),
        pon_opt=adam(meta["pon_adam"], pon_m, pon_v),
        qf=meta["qf"],
        epoch=meta["epoch"],
        seed=meta["seed"],
        settings=settings,
    )


def checkpoint_hash(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


class CheckpointStore:
    """One checkpoint file per (mode, qf) under a root directory"""

    def __init__(self, root: Union[str, Path]):
        self.root = Path(root)

    def path_for(self, mode: str, qf: int) -> Path:
        return self.root / f"{check_mode(mode).lower()}_q{qf:03d}.ckpt"

    def exists(self, mode: str, qf: int) -> bool:
        return self.path_for(mode, qf).is_file()

    def save(self, ckpt: Checkpoint) -> Path:
        path = self.path_for(ckpt.mode, ckpt.qf)
        save_checkpoint(ckpt, path)
        return path

    def load(self, mode: str, qf: int) -> Checkpoint:
        return load_checkpoint(self.path_for(mode, qf))[0]


def save_checkpoint(ckpt: Checkpoint, path: Union[str, Path]) -> str:
    """Write atomically; returns the sha256 of the written bytes"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = encode_checkpoint(ckpt)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)
    logging.info(f"saved {ckpt.mode} checkpoint for qf={ckpt.qf} at epoch {ckpt.epoch} to {path}")
    return checkpoint_hash(data)


def load_checkpoint(path: Union[str, Path]) -> tuple[Checkpoint, str]:
    """Checkpoint and the sha256 of the file it came from"""
    try:
        data = Path(path).read_bytes()
    except OSError as e:
        raise IngestionError(path, f"cannot read checkpoint ({e.strerror})") from e
    return decode_checkpoint(data, path), checkpoint_hash(data)
