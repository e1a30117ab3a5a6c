import asyncio
import json
import logging

import numpy as np
import pytest

from cli.config import Config, RunConfig
from cli.handlers import EXIT_FAILED, EXIT_OK, cmd_bd, cmd_compress, cmd_decompress, cmd_evaluate, cmd_sweep, cmd_train
from cli.main import build_parser
from errors import ConfigurationError
from metrics.rd import read_curve_csv, write_curve_csv
from processors.image_io import read_image, write_pgm
from storage.checkpoints import load_checkpoint, save_checkpoint
from tests.test_metrics import BPPS, PSNRS, curve
from tests.test_storage import small_checkpoint


def write_config(tmp_path, text):
    path = tmp_path / "run.env"
    path.write_text(text)
    return path


def test_config_file_parsing(tmp_path, monkeypatch):
    monkeypatch.delenv("EDGEPRESS_SEED", raising=False)
    path = write_config(tmp_path, "mode=cr\nqf=20\nalpha=1.0\nqf_sweep=5,10,20\ntrain_dir=data\nprn_features=8,4\n")
    cfg = RunConfig.from_file(path)
    assert cfg.mode == "CR" and cfg.qf == 20 and cfg.alpha == 1.0
    assert cfg.qf_sweep == (5, 10, 20)
    assert cfg.train_dir == tmp_path / "data"
    assert cfg.train_config().prn_features == (8, 4)
    assert cfg.train_config(mode="FR", qf=50).qf == 50


def test_defaults_follow_the_sweep():
    assert RunConfig().qf_sweep == Config.QF_SWEEP == (2, 5, 6, 10, 20, 30, 40, 50, 60, 80, 90, 100)


def test_env_seed_overrides(tmp_path, monkeypatch):
    monkeypatch.setenv("EDGEPRESS_SEED", "99")
    assert RunConfig.from_file(write_config(tmp_path, "seed=1\n")).seed == 99


@pytest.mark.parametrize("text", [
    "colour=red\n",
    "qf_sweep=10,5\n",
    "qf_sweep=0,5\n",
    "epochs=many\n",
    "alpha=1.5\n",
    "stride_position=middle\n",
    "crop_size=20\n",
])
def test_invalid_config(tmp_path, monkeypatch, text):
    monkeypatch.delenv("EDGEPRESS_SEED", raising=False)
    with pytest.raises(ConfigurationError):
        RunConfig.from_file(write_config(tmp_path, text))


def test_parser_verbs():
    args = build_parser().parse_args(["evaluate", "--ckpt", "a", "--data", "d", "--out", "o.csv", "--edges", "external"])
    assert args.command == "evaluate" and args.edges == "external"
    args = build_parser().parse_args(["compress", "--ckpt", "a", "--in", "x.pgm", "--out", "x.jpg"])
    assert args.in_path == "x.pgm"


def test_bd_against_itself(tmp_path):
    path = tmp_path / "a.csv"
    asyncio.run(write_curve_csv(path, [curve("a", BPPS, PSNRS)]))
    out = tmp_path / "bd.json"
    assert asyncio.run(cmd_bd(str(path), str(path), str(out))) == EXIT_OK
    report = json.loads(out.read_text())
    assert report["bd_psnr_db"] == pytest.approx(0.0, abs=1e-9)
    assert report["bd_rate_percent"] == pytest.approx(0.0, abs=1e-9)


def test_bd_with_missing_file(tmp_path):
    assert asyncio.run(cmd_bd(str(tmp_path / "x.csv"), str(tmp_path / "y.csv"), str(tmp_path / "o.json"))) == EXIT_FAILED


def test_compress_then_decompress(tmp_path, textured_image):
    ckpt_path = tmp_path / "m.ckpt"
    save_checkpoint(small_checkpoint("CR"), ckpt_path)
    img = textured_image[:45, :50]
    write_pgm(tmp_path / "in.pgm", img)

    assert cmd_compress(str(ckpt_path), str(tmp_path / "in.pgm"), str(tmp_path / "out.jpg")) == EXIT_OK
    sidecar = json.loads((tmp_path / "out.jpg.json").read_text())
    assert sidecar["mode"] == "CR" and sidecar["original_dims"] == [45, 50]

    assert cmd_decompress(str(ckpt_path), str(tmp_path / "out.jpg"), str(tmp_path / "out.pgm")) == EXIT_OK
    assert read_image(tmp_path / "out.pgm").shape == (45, 50)


def test_decompress_refuses_other_checkpoint(tmp_path, textured_image):
    save_checkpoint(small_checkpoint("FR"), tmp_path / "a.ckpt")
    save_checkpoint(small_checkpoint("FR", res_scale=0.2), tmp_path / "b.ckpt")
    write_pgm(tmp_path / "in.pgm", textured_image)
    assert cmd_compress(str(tmp_path / "a.ckpt"), str(tmp_path / "in.pgm"), str(tmp_path / "x.jpg")) == EXIT_OK
    status = cmd_decompress(str(tmp_path / "b.ckpt"), str(tmp_path / "x.jpg"), str(tmp_path / "x.pgm"))
    assert status == EXIT_FAILED
    assert not (tmp_path / "x.pgm").exists()


def make_dataset(directory, count=3, size=32, seed=0):
    rng = np.random.default_rng(seed)
    directory.mkdir()
    y, x = np.mgrid[0:size, 0:size] / (size - 1)
    for k in range(count):
        img = np.clip(0.3 + 0.4 * (x if k % 2 else y) + 0.05 * rng.standard_normal((size, size)), 0, 1)
        img[8:20, 8:20] += 0.2
        write_pgm(directory / f"img{k}.pgm", np.clip(img, 0, 1))


def test_train_writes_checkpoint_and_log(tmp_path, monkeypatch):
    monkeypatch.delenv("EDGEPRESS_SEED", raising=False)
    make_dataset(tmp_path / "train")
    path = write_config(tmp_path, "\n".join([
        "mode=FR", "qf=20", "epochs=2", "warmup_epochs=1", "iterations_per_module=1", "batch_size=2",
        "prn_features=4,3", "pon_features=4", "pon_blocks=1", "crop_size=16", "checkpoint_every=1",
        "train_dir=train", "output_dir=runs",
    ]) + "\n")
    assert asyncio.run(cmd_train(str(path))) == EXIT_OK
    assert (tmp_path / "runs" / "fr_q020.ckpt").is_file()
    lines = (tmp_path / "runs" / "fr_q020.jsonl").read_text().splitlines()
    assert [json.loads(line)["epoch"] for line in lines] == [1, 2]


def test_train_with_bad_config_fails(tmp_path):
    assert asyncio.run(cmd_train(str(tmp_path / "missing.env"))) == EXIT_FAILED


def test_evaluate_directory(tmp_path):
    make_dataset(tmp_path / "test")
    save_checkpoint(small_checkpoint("FR"), tmp_path / "m.ckpt")
    out = tmp_path / "rd.csv"
    status = asyncio.run(cmd_evaluate(str(tmp_path / "m.ckpt"), str(tmp_path / "test"), str(out)))
    assert status == EXIT_OK
    [rd_curve] = read_curve_csv(out)
    assert rd_curve.label == "FR"
    assert len(rd_curve.points) == 1
    assert rd_curve.points[0].qf == 20


def test_sweep_writes_curves_and_skips_short_bd(tmp_path, monkeypatch):
    monkeypatch.delenv("EDGEPRESS_SEED", raising=False)
    make_dataset(tmp_path / "train")
    make_dataset(tmp_path / "test")
    path = write_config(tmp_path, "\n".join([
        "modes=FR", "qf_sweep=10,50", "epochs=1", "warmup_epochs=0", "iterations_per_module=1", "batch_size=2",
        "prn_features=4,3", "pon_features=4", "pon_blocks=1", "crop_size=16",
        "train_dir=train", "test_dir=test", "output_dir=runs",
    ]) + "\n")
    assert asyncio.run(cmd_sweep(str(path))) == EXIT_OK
    runs = tmp_path / "runs"
    assert (runs / "fr_q010.ckpt").is_file() and (runs / "fr_q050.ckpt").is_file()
    [anchor] = read_curve_csv(runs / "rd_jpeg.csv")
    [trained] = read_curve_csv(runs / "rd_fr.csv")
    assert [p.qf for p in anchor.points] == [10, 50]
    assert sorted(p.qf for p in trained.points) == [10, 50]
    assert not (runs / "bd_fr_vs_jpeg.json").exists()


def test_train_into_unwritable_output_fails(tmp_path, monkeypatch):
    monkeypatch.delenv("EDGEPRESS_SEED", raising=False)
    make_dataset(tmp_path / "train")
    (tmp_path / "runs").write_text("a file, not a directory")
    path = write_config(tmp_path, "\n".join([
        "epochs=1", "warmup_epochs=0", "iterations_per_module=1", "prn_features=4,3", "pon_features=4",
        "pon_blocks=1", "crop_size=16", "train_dir=train", "output_dir=runs",
    ]) + "\n")
    assert asyncio.run(cmd_train(str(path))) == EXIT_FAILED


def test_workers_from_environment(monkeypatch):
    monkeypatch.delenv("EDGEPRESS_WORKERS", raising=False)
    assert Config.workers() == Config.DEFAULT_WORKERS
    monkeypatch.setenv("EDGEPRESS_WORKERS", "2")
    assert Config.workers() == 2
    for value in ("many", "0"):
        monkeypatch.setenv("EDGEPRESS_WORKERS", value)
        with pytest.raises(ConfigurationError):
            Config.workers()


def test_evaluate_with_bad_worker_count_fails(tmp_path, monkeypatch):
    monkeypatch.setenv("EDGEPRESS_WORKERS", "many")
    make_dataset(tmp_path / "test")
    save_checkpoint(small_checkpoint("FR"), tmp_path / "m.ckpt")
    status = asyncio.run(cmd_evaluate(str(tmp_path / "m.ckpt"), str(tmp_path / "test"), str(tmp_path / "rd.csv")))
    assert status == EXIT_FAILED


def sweep_config(tmp_path, *extra):
    return write_config(tmp_path, "\n".join([
        "modes=FR", "epochs=1", "warmup_epochs=0", "iterations_per_module=1", "batch_size=2",
        "prn_features=4,3", "pon_features=4", "pon_blocks=1", "crop_size=16",
        "train_dir=train", "test_dir=test", "output_dir=runs", *extra,
    ]) + "\n")


def test_sweep_retrains_when_settings_change(tmp_path, monkeypatch, caplog):
    monkeypatch.delenv("EDGEPRESS_SEED", raising=False)
    caplog.set_level(logging.INFO)
    make_dataset(tmp_path / "train")
    make_dataset(tmp_path / "test")
    ckpt_path = tmp_path / "runs" / "fr_q010.ckpt"

    assert asyncio.run(cmd_sweep(str(sweep_config(tmp_path, "qf_sweep=10", "alpha=0.75")))) == EXIT_OK
    assert load_checkpoint(ckpt_path)[0].settings["alpha"] == 0.75

    caplog.clear()
    assert asyncio.run(cmd_sweep(str(sweep_config(tmp_path, "qf_sweep=10", "alpha=0.75")))) == EXIT_OK
    assert any("reusing" in r.getMessage() for r in caplog.records)

    caplog.clear()
    assert asyncio.run(cmd_sweep(str(sweep_config(tmp_path, "qf_sweep=10", "alpha=1.0")))) == EXIT_OK
    assert any("retraining" in r.getMessage() and "alpha" in r.getMessage() for r in caplog.records)
    assert load_checkpoint(ckpt_path)[0].settings["alpha"] == 1.0


def test_sweep_survives_tied_rates(tmp_path, monkeypatch):
    monkeypatch.delenv("EDGEPRESS_SEED", raising=False)
    make_dataset(tmp_path / "train")
    (tmp_path / "test").mkdir()
    # mid-grey levels to a zero DC, so every qf codes the same number of bits
    for k in range(2):
        write_pgm(tmp_path / "test" / f"flat{k}.pgm", np.full((32, 32), 128 / 255))
    assert asyncio.run(cmd_sweep(str(sweep_config(tmp_path, "qf_sweep=50,60")))) == EXIT_OK
    [anchor] = read_curve_csv(tmp_path / "runs" / "rd_jpeg.csv")
    assert [p.qf for p in anchor.points] == [50]
    [trained] = read_curve_csv(tmp_path / "runs" / "rd_fr.csv")
    assert 1 <= len(trained.points) <= 2
