import os
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Union

from dotenv import dotenv_values, load_dotenv

from edges.canny import CannyConfig
from errors import ConfigurationError
from models.common import MODES, STRIDE_LAST
from processors.dataset import EDGE_SOURCES, PAD_MULTIPLE
from training.trainer import TrainConfig

load_dotenv()


class Config:
    LOG_LEVEL = os.getenv("EDGEPRESS_LOG_LEVEL", "INFO")
    DEFAULT_WORKERS = 4

    # Sweep
    QF_SWEEP = (2, 5, 6, 10, 20, 30, 40, 50, 60, 80, 90, 100)

    # Edge detection
    CANNY_SIGMA = 1.4
    CANNY_LOW = 0.1
    CANNY_HIGH = 0.3

    SUPPORTED_IMAGE_FORMATS = {".pgm", ".ppm"}
    SIDECAR_SUFFIX = ".json"

    @staticmethod
    def seed_override() -> Union[int, None]:
        """EDGEPRESS_SEED wins over any configured seed"""
        value = os.getenv("EDGEPRESS_SEED")
        if value is None or value == "":
            return None
        try:
            return int(value)
        except ValueError as e:
            raise ConfigurationError(f"EDGEPRESS_SEED must be an integer, got {value!r}") from e

    @staticmethod
    def workers() -> int:
        """Concurrent images during evaluation, from EDGEPRESS_WORKERS"""
        value = os.getenv("EDGEPRESS_WORKERS")
        if value is None or value == "":
            return Config.DEFAULT_WORKERS
        try:
            workers = int(value)
        except ValueError as e:
            raise ConfigurationError(f"EDGEPRESS_WORKERS must be an integer, got {value!r}") from e
        if workers < 1:
            raise ConfigurationError(f"EDGEPRESS_WORKERS must be >= 1, got {workers}")
        return workers


def _int_list(value: str) -> tuple[int, ...]:
    return tuple(int(v) for v in value.split(",") if v.strip())


def _str_list(value: str) -> tuple[str, ...]:
    return tuple(v.strip() for v in value.split(",") if v.strip())


@dataclass(frozen=True)
class RunConfig:
    mode: str = "FR"
    qf: int = 10
    epochs: int = 50
    iterations_per_module: int = 5
    batch_size: int = 10
    lr: float = 1e-3
    alpha: float = 0.75
    seed: int = 0
    warmup_epochs: int = 5
    prn_features: tuple[int, ...] = (64, 32)
    pon_features: int = 32
    pon_blocks: int = 4
    res_scale: float = 0.1
    stride_position: str = STRIDE_LAST
    canny_sigma: float = Config.CANNY_SIGMA
    canny_low: float = Config.CANNY_LOW
    canny_high: float = Config.CANNY_HIGH
    edge_source: str = "canny"
    train_dir: Path = Path("data/train")
    test_dir: Path = Path("data/test")
    output_dir: Path = Path("runs")
    checkpoint_every: int = 10
    crop_size: int = 64
    qf_sweep: tuple[int, ...] = Config.QF_SWEEP
    modes: tuple[str, ...] = MODES

    def __post_init__(self):
        if len(self.prn_features) != 2:
            raise ConfigurationError(f"prn_features needs two values, got {self.prn_features}")
        if self.edge_source not in EDGE_SOURCES:
            raise ConfigurationError(f"edge_source must be one of {EDGE_SOURCES}, got {self.edge_source!r}")
        if self.checkpoint_every < 1:
            raise ConfigurationError(f"checkpoint_every must be >= 1, got {self.checkpoint_every}")
        if self.crop_size < PAD_MULTIPLE or self.crop_size % PAD_MULTIPLE:
            raise ConfigurationError(f"crop_size must be a positive multiple of {PAD_MULTIPLE}, got {self.crop_size}")
        if not self.qf_sweep or any(not 1 <= q <= 100 for q in self.qf_sweep):
            raise ConfigurationError(f"qf_sweep values must lie in [1, 100], got {self.qf_sweep}")
        if any(b <= a for a, b in zip(self.qf_sweep, self.qf_sweep[1:])):
            raise ConfigurationError(f"qf_sweep must be strictly increasing, got {self.qf_sweep}")
        if not self.modes or any(m not in MODES for m in self.modes):
            raise ConfigurationError(f"modes must be drawn from {MODES}, got {self.modes}")
        # surfaces every training and edge-detector invariant up front
        self.train_config()
        self.canny_config()

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "RunConfig":
        """Flat key=value file; relative paths resolve against the file's directory"""
        path = Path(path)
        if not path.is_file():
            raise ConfigurationError(f"config file {path} does not exist")
        raw = {k.strip().lower(): v for k, v in dotenv_values(path).items()}
        known = {f.name: f for f in fields(cls)}
        unknown = sorted(set(raw) - set(known))
        if unknown:
            raise ConfigurationError(f"unknown config keys in {path}: {', '.join(unknown)}")

        values = {}
        for key, value in raw.items():
            if value is None:
                raise ConfigurationError(f"config key {key!r} in {path} has no value")
            values[key] = cls._convert(key, value.strip(), path.parent)
        seed = Config.seed_override()
        if seed is not None:
            values["seed"] = seed
        return cls(**values)

    @staticmethod
    def _convert(key: str, value: str, base: Path):
        default = getattr(RunConfig, key)
        try:
            if isinstance(default, Path):
                candidate = Path(value)
                return candidate if candidate.is_absolute() else base / candidate
            if key == "modes":
                return tuple(v.upper() for v in _str_list(value))
            if key == "mode":
                return value.upper()
            if isinstance(default, tuple):
                return _int_list(value)
            if isinstance(default, bool):
                return value.lower() in ("1", "true", "yes")
            if isinstance(default, int):
                return int(value)
            if isinstance(default, float):
                return float(value)
        except ValueError as e:
            raise ConfigurationError(f"config key {key!r}: cannot parse {value!r}") from e
        return value

    def train_config(self, mode: Union[str, None] = None, qf: Union[int, None] = None) -> TrainConfig:
        return TrainConfig(
            mode=mode or self.mode,
            qf=qf if qf is not None else self.qf,
            epochs=self.epochs,
            iterations_per_module=self.iterations_per_module,
            batch_size=self.batch_size,
            lr=self.lr,
            alpha=self.alpha,
            seed=self.seed,
            warmup_epochs=self.warmup_epochs,
            prn_features=tuple(self.prn_features),
            pon_features=self.pon_features,
            pon_blocks=self.pon_blocks,
            res_scale=self.res_scale,
            stride_position=self.stride_position,
        )

    def canny_config(self) -> CannyConfig:
        return CannyConfig(self.canny_sigma, self.canny_low, self.canny_high)

    def training_settings(self, mode: str, qf: int) -> dict:
        """Everything a trained (mode, qf) pair depends on, as recorded in its checkpoint"""
        settings = asdict(self.train_config(mode, qf))
        settings["prn_features"] = list(settings["prn_features"])
        settings.update(
            edge_source=self.edge_source,
            canny_sigma=self.canny_sigma,
            canny_low=self.canny_low,
            canny_high=self.canny_high,
            crop_size=self.crop_size,
        )
        return settings
