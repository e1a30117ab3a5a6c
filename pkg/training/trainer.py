"""
Five-step progressive workflow:
  1. warm up PrN and PoN jointly as a plain autoencoder (no codec)
  2-3. run PrN -> JPEG encode -> decode in the forward path only
  4. fit PoN on (decoded, original) pairs with MSE, PrN frozen
  5. fit PrN through the codec-free composition PoN(PrN(f)) with the
     edge-aware loss, PoN frozen
Steps 2-5 repeat every epoch.
"""
import logging
import time
from dataclasses import dataclass, field
from itertools import islice
from typing import Callable, Iterator, Optional

import numpy as np

from codec.jpeg import Bitstream, Codec, JpegCodec
from codec.tables import CodecConfig
from edges.edge_map import EdgeMap
from errors import ConfigurationError, PreconditionError
from losses.edge_aware import LossConfig, edge_aware_loss, mse_loss
from models.common import STRIDE_LAST, STRIDE_POSITIONS, check_mode
from models.pon import PoNParams, pon_backward, pon_forward_raw
from models.prn import PrNParams, prn_backward, prn_forward, prn_forward_raw
from nn.optim import AdamState, adam_step
from nn.tensor import as_tensor, seed_rng


@dataclass(frozen=True)
class TrainConfig:
    mode: str = "FR"
    qf: int = 10
    epochs: int = 50
    iterations_per_module: int = 5
    batch_size: int = 10
    lr: float = 1e-3
    alpha: float = 0.75
    seed: int = 0
    warmup_epochs: int = 5
    prn_features: tuple[int, int] = (64, 32)
    pon_features: int = 32
    pon_blocks: int = 4
    res_scale: float = 0.1
    stride_position: str = STRIDE_LAST

    def __post_init__(self):
        check_mode(self.mode)
        CodecConfig(self.qf)
        LossConfig(self.alpha)
        if self.batch_size < 1:
            raise ConfigurationError(f"batch_size must be >= 1, got {self.batch_size}")
        for name in ("epochs", "iterations_per_module", "warmup_epochs"):
            if getattr(self, name) < 0:
                raise ConfigurationError(f"{name} must be >= 0, got {getattr(self, name)}")
        if self.lr <= 0:
            raise ConfigurationError(f"learning rate must be positive, got {self.lr}")
        if self.stride_position not in STRIDE_POSITIONS:
            raise ConfigurationError(f"stride_position must be one of {STRIDE_POSITIONS}")

    @property
    def loss(self) -> LossConfig:
        return LossConfig(self.alpha)


@dataclass
class TrainingBatch:
    """Images f_k (N, 1, H, W) with their binary edge maps E_k"""

    images: np.ndarray
    edges: np.ndarray

    def __post_init__(self):
        self.images = as_tensor(self.images)
        self.edges = np.asarray(self.edges, dtype=np.float64)
        if self.images.shape[1] != 1 or self.edges.shape != self.images.shape:
            raise ConfigurationError(f"images {self.images.shape} and edges {self.edges.shape} do not pair up")

    @classmethod
    def from_examples(cls, images: list[np.ndarray], edge_maps: list[EdgeMap]) -> "TrainingBatch":
        if not images:
            raise PreconditionError("training needs at least one image")
        if len(images) != len(edge_maps):
            raise ConfigurationError(f"{len(images)} images but {len(edge_maps)} edge maps")
        dims = {np.shape(img) for img in images}
        if len(dims) != 1:
            raise ConfigurationError(f"training images must share dims, got {sorted(dims)}")
        return cls(
            images=np.stack([np.asarray(img, dtype=np.float64) for img in images])[:, None],
            edges=np.stack([e.as_weights() for e in edge_maps])[:, None],
        )

    def __len__(self) -> int:
        return self.images.shape[0]

    def take(self, indices) -> "TrainingBatch":
        return TrainingBatch(self.images[indices], self.edges[indices])


@dataclass
class TrainState:
    prn: PrNParams
    pon: PoNParams
    prn_opt: AdamState
    pon_opt: AdamState
    epoch: int = 0
    history: list[dict] = field(default_factory=list)
    phase_losses: dict = field(default_factory=dict)

    @classmethod
    def initial(cls, cfg: TrainConfig) -> "TrainState":
        rng = seed_rng(cfg.seed)
        prn = PrNParams.create(cfg.mode, rng, features=cfg.prn_features, stride_position=cfg.stride_position)
        pon = PoNParams.create(cfg.mode, rng, features=cfg.pon_features, num_blocks=cfg.pon_blocks,
                               res_scale=cfg.res_scale)
        return cls(
            prn=prn,
            pon=pon,
            prn_opt=AdamState.for_params(prn.params(), lr=cfg.lr),
            pon_opt=AdamState.for_params(pon.params(), lr=cfg.lr),
        )

    def copy(self) -> "TrainState":
        return TrainState(
            prn=self.prn.copy(),
            pon=self.pon.copy(),
            prn_opt=_copy_opt(self.prn_opt),
            pon_opt=_copy_opt(self.pon_opt),
            epoch=self.epoch,
            history=[dict(r) for r in self.history],
            phase_losses=dict(self.phase_losses),
        )


def _copy_opt(opt: AdamState) -> AdamState:
    return AdamState(
        first_moment=[m.copy() for m in opt.first_moment],
        second_moment=[v.copy() for v in opt.second_moment],
        step_count=opt.step_count,
        lr=opt.lr,
        beta1=opt.beta1,
        beta2=opt.beta2,
        epsilon=opt.epsilon,
    )


def pon_loss_and_grads(pon: PoNParams, decoded: np.ndarray, targets: np.ndarray) -> tuple[float, list[np.ndarray]]:
    """Post-net MSE on codec outputs and its gradient w.r.t. phi_2"""
    out, cache = pon_forward_raw(decoded, pon)
    loss, grad = mse_loss(out, targets)
    _, grads = pon_backward(pon, cache, grad)
    return loss, grads


def prn_loss_and_grads(prn: PrNParams, pon: PoNParams, images: np.ndarray, edges: np.ndarray,
                       loss_cfg: LossConfig) -> tuple[float, list[np.ndarray]]:
    """Edge-aware loss of PoN(PrN(f)) with no codec on the path, gradient w.r.t. phi_1"""
    y, prn_cache = prn_forward_raw(images, prn)
    out, pon_cache = pon_forward_raw(y, pon)
    loss, grad = edge_aware_loss(out, images, edges, loss_cfg)
    grad_y, _ = pon_backward(pon, pon_cache, grad, with_params=False)
    _, grads = prn_backward(prn, prn_cache, grad_y)
    return loss, grads


def autoencoder_loss_and_grads(prn: PrNParams, pon: PoNParams,
                               images: np.ndarray) -> tuple[float, list[np.ndarray], list[np.ndarray]]:
    y, prn_cache = prn_forward_raw(images, prn)
    out, pon_cache = pon_forward_raw(y, pon)
    loss, grad = mse_loss(out, images)
    grad_y, pon_grads = pon_backward(pon, pon_cache, grad)
    _, prn_grads = prn_backward(prn, prn_cache, grad_y)
    return loss, prn_grads, pon_grads


def _apply(net, opt: AdamState, grads: list[np.ndarray]) -> AdamState:
    new_params, opt = adam_step(net.params(), grads, opt)
    net.load_params(new_params)
    return opt


def _mean(values: list[float]) -> Optional[float]:
    return float(np.mean(values)) if values else None


class ProgressiveTrainer:
    """Single-writer training loop around a pluggable codec"""

    def __init__(self, cfg: TrainConfig, codec: Optional[Codec] = None):
        self.cfg = cfg
        self.codec = codec if codec is not None else JpegCodec(cfg.qf)
        # batch order has its own stream so it never shifts weight init
        self.rng = np.random.default_rng([cfg.seed, 1])

    def init_state(self) -> TrainState:
        return TrainState.initial(self.cfg)

    def _batches(self, n: int) -> Iterator[np.ndarray]:
        """Endless mini-batches, reshuffled after every pass over the data"""
        while True:
            order = self.rng.permutation(n)
            for start in range(0, n, self.cfg.batch_size):
                yield order[start:start + self.cfg.batch_size]

    def _steps(self, n: int) -> Iterator[np.ndarray]:
        return islice(self._batches(n), self.cfg.iterations_per_module)

    def pretrain_autoencoder(self, data: TrainingBatch, state: Optional[TrainState] = None) -> TrainState:
        """Step 1: joint MSE training of PoN(PrN(f)) with no codec"""
        if len(data) == 0:
            raise PreconditionError("training needs at least one image")
        state = state if state is not None else self.init_state()
        for epoch in range(self.cfg.warmup_epochs):
            losses = []
            for idx in self._steps(len(data)):
                loss, prn_grads, pon_grads = autoencoder_loss_and_grads(state.prn, state.pon, data.images[idx])
                state.prn_opt = _apply(state.prn, state.prn_opt, prn_grads)
                state.pon_opt = _apply(state.pon, state.pon_opt, pon_grads)
                losses.append(loss)
            logging.info(f"warm-up epoch {epoch + 1}/{self.cfg.warmup_epochs}: mse {_mean(losses)}")
        state.phase_losses["warmup"] = _mean(losses) if self.cfg.warmup_epochs else None
        return state

    def forward_codec_pass(self, f: np.ndarray, prn: PrNParams) -> tuple[np.ndarray, np.ndarray, Bitstream]:
        """Steps 2-3: Y = PrN(f), bitstream = C(Y), f_hat_c = C^-1(bitstream)"""
        f = np.asarray(f, dtype=np.float64)
        if f.ndim == 2:
            f = f[None, None]
        y = prn_forward(f, prn)
        bitstream = self.codec.encode(y[0, 0])
        decoded = np.asarray(self.codec.decode(bitstream), dtype=np.float64)[None, None]
        return y, decoded, bitstream

    def codec_outputs(self, data: TrainingBatch, prn: PrNParams) -> np.ndarray:
        """Decoded codec outputs for every image, in dataset order"""
        return np.concatenate([self.forward_codec_pass(data.images[k:k + 1], prn)[1] for k in range(len(data))])

    def train_pon_epoch(self, state: TrainState, data: TrainingBatch, decoded: np.ndarray) -> TrainState:
        """Step 4: Adam steps on the post-net MSE; phi_1 is not touched"""
        losses = []
        for idx in self._steps(len(data)):
            loss, grads = pon_loss_and_grads(state.pon, decoded[idx], data.images[idx])
            state.pon_opt = _apply(state.pon, state.pon_opt, grads)
            losses.append(loss)
            logging.debug(f"PoN step: loss {loss:.6f}")
        state.phase_losses["loss_o"] = _mean(losses)
        return state

    def train_prn_epoch(self, state: TrainState, data: TrainingBatch) -> TrainState:
        """Step 5: Adam steps on the edge-aware loss of PoN(PrN(f)); phi_2 is frozen"""
        losses = []
        for idx in self._steps(len(data)):
            batch = data.take(idx)
            loss, grads = prn_loss_and_grads(state.prn, state.pon, batch.images, batch.edges, self.cfg.loss)
            state.prn_opt = _apply(state.prn, state.prn_opt, grads)
            losses.append(loss)
            logging.debug(f"PrN step: loss {loss:.6f}")
        state.phase_losses["loss_r"] = _mean(losses)
        return state

    def train(self, data: TrainingBatch,
              on_epoch: Optional[Callable[[TrainState, dict], None]] = None) -> TrainState:
        """Warm-up, then per epoch: codec pass -> PoN phase -> PrN phase"""
        if len(data) == 0:
            raise PreconditionError("training needs at least one image")
        cfg = self.cfg
        logging.info(f"training {cfg.mode} pair at qf={cfg.qf} on {len(data)} images, seed {cfg.seed}")
        state = self.pretrain_autoencoder(data, self.init_state())

        for epoch in range(1, cfg.epochs + 1):
            started = time.time()
            decoded = self.codec_outputs(data, state.prn)
            self.train_pon_epoch(state, data, decoded)
            self.train_prn_epoch(state, data)
            state.epoch = epoch
            record = {
                "epoch": epoch,
                "loss_o": state.phase_losses.get("loss_o"),
                "loss_r": state.phase_losses.get("loss_r"),
                "qf": cfg.qf,
                "mode": cfg.mode,
                "seed": cfg.seed,
            }
            state.history.append(record)
            logging.info(f"epoch {epoch}/{cfg.epochs}: loss_o {record['loss_o']} loss_r {record['loss_r']} "
                         f"({time.time() - started:.2f}s)")
            if on_epoch is not None:
                on_epoch(state, record)
        return state
