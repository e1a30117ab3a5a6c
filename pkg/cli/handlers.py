"""
Subcommand handlers. Each returns a process exit status; library errors are
logged and mapped to a non-zero status.
"""
import asyncio
import json
import logging
import time
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from cli.config import Config, RunConfig
from cli.logger import log_epoch, log_error, log_processing_time
from codec.jpeg import Bitstream, read_jpeg, write_jpeg
from edges.canny import CannyConfig
from errors import EdgepressError, PreconditionError
from metrics.bjontegaard import bd_report
from metrics.rd import RDCurve, RDPoint, average_points, distinct_rates, evaluate_pair, read_curve_csv, write_curve_csv
from processors.dataset import DatasetManifest, center_crop, ingest
from processors.image_io import read_image, read_image_async, write_pgm, write_text_async
from processors.pipeline import CompressionEngine, jpeg_roundtrip, read_sidecar, sidecar_path
from storage.checkpoints import Checkpoint, CheckpointStore, load_checkpoint, save_checkpoint
from storage.run_log import RunLog
from training.trainer import ProgressiveTrainer, TrainingBatch, TrainState

EXIT_OK = 0
EXIT_FAILED = 1

# (reconstruction, bitstream, bpp) for one original image
Reconstructor = Callable[[np.ndarray], tuple[np.ndarray, Bitstream, float]]


def _fail(e: Exception, path=None) -> int:
    log_error(type(e).__name__, str(e), path)
    return EXIT_FAILED


def load_training_batch(manifest: DatasetManifest, cfg: RunConfig) -> TrainingBatch:
    """Center crops of every image with edge maps detected on (or loaded for) the full image"""
    images, edges = [], []
    canny_cfg = cfg.canny_config()
    for entry in manifest.entries:
        img = manifest.load(entry)
        edge_map = manifest.edge_map(entry, img, cfg.edge_source, canny_cfg)
        images.append(center_crop(img, cfg.crop_size))
        edges.append(center_crop(edge_map.mask, cfg.crop_size).astype(np.float64))
    return TrainingBatch(np.stack(images)[:, None], np.stack(edges)[:, None])


async def train_pair(cfg: RunConfig, mode: str, qf: int, data: TrainingBatch,
                     store: CheckpointStore) -> tuple[Checkpoint, str]:
    """Train one (mode, qf) pair, checkpointing at the configured cadence and logging each epoch"""
    train_cfg = cfg.train_config(mode, qf)
    settings = cfg.training_settings(mode, qf)
    run_log = RunLog(cfg.output_dir / f"{mode.lower()}_q{qf:03d}.jsonl")
    await run_log.reset()
    loop = asyncio.get_running_loop()

    def on_epoch(state: TrainState, record: dict):
        log_epoch(record["epoch"], record["loss_o"], record["loss_r"], qf, mode)
        # called on the training thread; the log write runs on the event loop
        asyncio.run_coroutine_threadsafe(run_log.append(record), loop).result()
        if record["epoch"] % cfg.checkpoint_every == 0:
            save_checkpoint(Checkpoint.from_state(state, qf, train_cfg.seed, settings), store.path_for(mode, qf))

    started = time.time()
    state = await asyncio.to_thread(ProgressiveTrainer(train_cfg).train, data, on_epoch)
    ckpt = Checkpoint.from_state(state, qf, train_cfg.seed, settings)
    digest = save_checkpoint(ckpt, store.path_for(mode, qf))
    log_processing_time(f"training {mode} qf={qf}", time.time() - started)
    return ckpt, digest


async def cmd_train(config_path: str) -> int:
    try:
        cfg = RunConfig.from_file(config_path)
        manifest = ingest(cfg.train_dir, "train")
        data = load_training_batch(manifest, cfg)
        _, digest = await train_pair(cfg, cfg.mode, cfg.qf, data, CheckpointStore(cfg.output_dir))
    except EdgepressError as e:
        return _fail(e, config_path)
    except OSError as e:
        return _fail(e, config_path)
    logging.info(f"training finished, checkpoint sha256 {digest}")
    return EXIT_OK


def cmd_compress(ckpt_path: str, in_path: str, out_path: str) -> int:
    try:
        ckpt, digest = load_checkpoint(ckpt_path)
        img = read_image(in_path)
        bs, sidecar = CompressionEngine(ckpt, digest).compress(img)
        write_jpeg(out_path, bs)
        sidecar_path(out_path).write_text(sidecar.to_json(), encoding="utf-8")
    except EdgepressError as e:
        return _fail(e, in_path)
    except OSError as e:
        return _fail(e, out_path)
    logging.info(f"compressed {in_path} -> {out_path} ({len(bs)} bytes)")
    return EXIT_OK


def cmd_decompress(ckpt_path: str, in_path: str, out_path: str) -> int:
    try:
        ckpt, digest = load_checkpoint(ckpt_path)
        bs = read_jpeg(in_path)
        sidecar = read_sidecar(in_path)
        recon = CompressionEngine(ckpt, digest).decompress(bs, sidecar)
        write_pgm(out_path, recon)
    except EdgepressError as e:
        return _fail(e, in_path)
    except OSError as e:
        return _fail(e, out_path)
    logging.info(f"decompressed {in_path} -> {out_path}")
    return EXIT_OK


async def evaluate_directory(manifest: DatasetManifest, reconstruct: Reconstructor, qf: int,
                             edge_source: str = "canny", canny_cfg: CannyConfig = CannyConfig(),
                             workers: Optional[int] = None) -> list[RDPoint]:
    """Per-image points in manifest order; images are read and measured concurrently"""
    semaphore = asyncio.Semaphore(max(1, workers) if workers is not None else Config.workers())

    def measure(entry, img: np.ndarray) -> RDPoint:
        reference = manifest.edge_map(entry, img, edge_source, canny_cfg) if edge_source == "external" else None
        recon, bs, _ = reconstruct(img)
        return evaluate_pair(img, recon, bs, qf, img.shape, reference, canny_cfg)

    async def one(entry) -> RDPoint:
        async with semaphore:
            img = await read_image_async(entry.path)
            point = await asyncio.to_thread(measure, entry, img)
            logging.debug(f"{entry.path.name}: {point}")
            return point

    return list(await asyncio.gather(*(one(entry) for entry in manifest.entries)))


async def cmd_evaluate(ckpt_path: str, data_dir: str, out_path: str, edges: str = "canny") -> int:
    try:
        ckpt, digest = load_checkpoint(ckpt_path)
        engine = CompressionEngine(ckpt, digest)
        manifest = ingest(data_dir, "test")
        started = time.time()
        points = await evaluate_directory(manifest, engine.reconstruct, ckpt.qf, edges)
        curve = RDCurve(ckpt.mode, (average_points(points),))
        await write_curve_csv(out_path, [curve])
    except EdgepressError as e:
        return _fail(e, data_dir)
    except OSError as e:
        return _fail(e, out_path)
    log_processing_time(f"evaluation of {len(points)} images", time.time() - started)
    return EXIT_OK


async def _write_report(path: Path, report: dict):
    await write_text_async(path, json.dumps(report, sort_keys=True, indent=2))


async def cmd_bd(curve_a_path: str, curve_b_path: str, out_path: str) -> int:
    """BD-PSNR / BD-Rate of the first curve in B against the first curve in A"""
    try:
        curve_a = read_curve_csv(curve_a_path)[0]
        curve_b = read_curve_csv(curve_b_path)[0]
        report = bd_report(curve_a, curve_b)
        await _write_report(Path(out_path), report)
    except EdgepressError as e:
        return _fail(e, out_path)
    except OSError as e:
        return _fail(e, out_path)
    logging.info(f"{report['pair']}: BD-PSNR {report['bd_psnr_db']:.4f} dB, "
                 f"BD-Rate {report['bd_rate_percent']:.2f}%")
    return EXIT_OK


def _stale_reason(ckpt: Checkpoint, cfg: RunConfig, mode: str, qf: int) -> Optional[str]:
    expected = cfg.training_settings(mode, qf)
    changed = sorted(k for k in expected.keys() | ckpt.settings.keys() if expected.get(k) != ckpt.settings.get(k))
    if changed:
        return f"trained with different settings ({', '.join(changed)})"
    if ckpt.epoch != cfg.epochs:
        return f"stopped at epoch {ckpt.epoch} of {cfg.epochs}"
    return None


async def _load_or_train(cfg: RunConfig, mode: str, qf: int, store: CheckpointStore,
                         data: Optional[TrainingBatch]) -> tuple[Checkpoint, str, TrainingBatch]:
    """Reuse a finished checkpoint from the same settings, otherwise (re)train the pair"""
    path = store.path_for(mode, qf)
    if store.exists(mode, qf):
        ckpt, digest = load_checkpoint(path)
        reason = _stale_reason(ckpt, cfg, mode, qf)
        if reason is None:
            logging.info(f"reusing {path}")
            return ckpt, digest, data
        logging.warning(f"retraining {path}: {reason}")
    if data is None:
        data = load_training_batch(ingest(cfg.train_dir, "train"), cfg)
    ckpt, digest = await train_pair(cfg, mode, qf, data, store)
    return ckpt, digest, data


def _curve(label: str, points: list[RDPoint]) -> RDCurve:
    kept, repeated = distinct_rates(points)
    for p in repeated:
        logging.warning(f"{label}: qf={p.qf} repeats the bpp {p.bpp!r} of a lower qf, left out of the curve")
    return RDCurve.from_points(label, kept)


async def cmd_sweep(config_path: str) -> int:
    """
    Train or load one pair per (mode, qf), evaluate each on the test set and
    write one curve CSV per mode, a plain-JPEG anchor curve and BD reports
    of every mode against the anchor.
    """
    try:
        cfg = RunConfig.from_file(config_path)
        store = CheckpointStore(cfg.output_dir)
        cfg.output_dir.mkdir(parents=True, exist_ok=True)
        manifest = ingest(cfg.test_dir, "test")
        canny_cfg = cfg.canny_config()
        data = None

        anchor_points = []
        for qf in cfg.qf_sweep:
            points = await evaluate_directory(manifest, lambda img, q=qf: jpeg_roundtrip(img, q), qf,
                                              cfg.edge_source, canny_cfg)
            anchor_points.append(average_points(points))
        anchor = _curve("JPEG", anchor_points)
        await write_curve_csv(cfg.output_dir / "rd_jpeg.csv", [anchor], with_msssim_db=True)

        for mode in cfg.modes:
            mode_points = []
            for qf in cfg.qf_sweep:
                ckpt, digest, data = await _load_or_train(cfg, mode, qf, store, data)
                engine = CompressionEngine(ckpt, digest)
                points = await evaluate_directory(manifest, engine.reconstruct, qf, cfg.edge_source, canny_cfg)
                mode_points.append(average_points(points))
            curve = _curve(mode, mode_points)
            await write_curve_csv(cfg.output_dir / f"rd_{mode.lower()}.csv", [curve], with_msssim_db=True)
            try:
                report = bd_report(anchor, curve)
            except PreconditionError as e:
                logging.warning(f"no BD report for {mode}: {e}")
                continue
            await _write_report(cfg.output_dir / f"bd_{mode.lower()}_vs_jpeg.json", report)
    except EdgepressError as e:
        return _fail(e, config_path)
    except OSError as e:
        return _fail(e, config_path)
    return EXIT_OK
