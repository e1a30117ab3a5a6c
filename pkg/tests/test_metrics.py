import asyncio
import math

import numpy as np
import pytest

from codec.jpeg import Bitstream
from edges.edge_map import EdgeMap
from errors import ConfigurationError, IngestionError, PreconditionError
from metrics.bjontegaard import bd_psnr, bd_rate, bd_report
from metrics.quality import blocking_effect_factor, miou, ms_ssim, ms_ssim_scales, msssim_db, psnr, psnrb, ssim
from metrics.rd import RDCurve, RDPoint, average_points, distinct_rates, evaluate_pair, read_curve_csv, write_curve_csv


def test_identical_images(textured_image):
    assert psnr(textured_image, textured_image) == math.inf
    assert ssim(textured_image, textured_image) == 1.0
    assert ms_ssim(textured_image, textured_image) == 1.0


def test_uniform_offset_psnr(textured_image):
    a = textured_image * 0.8
    assert psnr(a, a + 16 / 255) == pytest.approx(20 * math.log10(255 / 16), abs=1e-3)
    assert psnr(a, a + 16 / 255) == pytest.approx(24.035, abs=1e-3)


def test_symmetry(rng):
    a, b = rng.uniform(size=(32, 32)), rng.uniform(size=(32, 32))
    assert psnr(a, b) == psnr(b, a)
    assert ssim(a, b) == pytest.approx(ssim(b, a), abs=1e-12)


def test_ms_ssim_is_symmetric(textured_image, rng):
    noisy = np.clip(textured_image + 0.1 * rng.standard_normal(textured_image.shape), 0, 1)
    assert ms_ssim(textured_image, noisy) == pytest.approx(ms_ssim(noisy, textured_image), abs=1e-12)


def test_dims_must_match():
    with pytest.raises(ConfigurationError):
        psnr(np.zeros((4, 4)), np.zeros((4, 5)))


def test_inverted_image_scores_low(textured_image):
    assert ssim(textured_image, 1.0 - textured_image) < 0.5


def test_ssim_needs_a_full_window():
    with pytest.raises(PreconditionError):
        ssim(np.zeros((10, 20)), np.zeros((10, 20)))


def test_scale_count_adapts():
    assert ms_ssim_scales((176, 200)) == 5
    assert ms_ssim_scales((64, 64)) == 3
    assert ms_ssim_scales((16, 16)) == 1


def test_single_scale_ms_ssim_is_ssim(rng):
    a = rng.uniform(size=(16, 16))
    b = np.clip(a + 0.1 * rng.standard_normal(a.shape), 0, 1)
    assert ms_ssim(a, b) == ssim(a, b)


def test_ms_ssim_falls_with_noise(textured_image, rng):
    noise = rng.uniform(-1, 1, size=textured_image.shape)
    values = [ms_ssim(textured_image, textured_image + s * noise) for s in (0.02, 0.05, 0.1, 0.2)]
    assert all(b < a for a, b in zip(values, values[1:]))


def test_msssim_db():
    assert msssim_db(1.0) == 0.0
    assert msssim_db(0.9) == pytest.approx(-10 * math.log10(0.9))


def test_psnrb_never_exceeds_psnr(rng):
    for _ in range(100):
        a, b = rng.uniform(size=(16, 16)), rng.uniform(size=(16, 16))
        assert psnrb(a, b) <= psnr(a, b)


def test_constant_test_image_has_no_blocking(rng):
    ref = rng.uniform(size=(16, 16))
    test = np.full((16, 16), 0.5)
    assert blocking_effect_factor(test) == 0.0
    assert psnrb(ref, test) == psnr(ref, test)


def test_hand_computed_blocking_factor():
    h = 40.0
    test = np.zeros((16, 16))
    test[:, 8:] = h / 255.0
    # 16 boundary pairs of size h^2 among 32 boundary pairs, no inner differences,
    # weighted by log2(8) / log2(16)
    expected = 0.75 * (16 * h ** 2 / 32)
    assert blocking_effect_factor(test) == pytest.approx(expected)
    assert psnrb(test, test) == pytest.approx(10 * math.log10(255 ** 2 / expected))


def test_psnrb_needs_one_block():
    with pytest.raises(PreconditionError):
        psnrb(np.zeros((4, 16)), np.zeros((4, 16)))


def test_miou_counting():
    e1 = np.zeros((8, 8), dtype=np.uint8)
    e1[0, :] = 1
    e2 = e1.copy()
    e2[1, :] = 1
    assert miou(EdgeMap(e1), EdgeMap(e2)) == pytest.approx((0.5 + 48 / 56) / 2)
    assert miou(e1, e2) == miou(e2, e1)


def test_miou_extremes():
    ones = np.ones((4, 4), dtype=np.uint8)
    zeros = np.zeros((4, 4), dtype=np.uint8)
    assert miou(ones, zeros) == 0.0
    assert miou(zeros, zeros) == 1.0
    assert miou(ones, ones) == 1.0
    with pytest.raises(ConfigurationError):
        miou(ones, np.ones((4, 5)))


def point(qf, bpp, value):
    return RDPoint(qf=qf, bpp=bpp, psnr=value, ssim=0.9, msssim=0.95, psnrb=value - 0.5, miou=0.5)


def curve(label, bpps, psnrs):
    return RDCurve(label, tuple(point(10 * (i + 1), b, p) for i, (b, p) in enumerate(zip(bpps, psnrs))))


BPPS = [0.25, 0.5, 1.0, 2.0, 3.0]
PSNRS = [27.0, 30.5, 33.2, 36.1, 37.4]


def test_bd_self_comparison():
    a = curve("a", BPPS, PSNRS)
    assert bd_psnr(a, a) == pytest.approx(0.0, abs=1e-9)
    assert bd_rate(a, a) == pytest.approx(0.0, abs=1e-9)


def test_bd_constant_psnr_shift():
    a = curve("a", BPPS, PSNRS)
    b = curve("b", BPPS, [p + 1.0 for p in PSNRS])
    assert bd_psnr(a, b) == pytest.approx(1.0, abs=1e-3)
    assert bd_psnr(a, b) == pytest.approx(-bd_psnr(b, a), abs=1e-9)
    assert bd_rate(a, b) < 0


def test_bd_rate_doubling():
    a = curve("a", BPPS, PSNRS)
    b = curve("b", [2 * r for r in BPPS], PSNRS)
    assert bd_rate(a, b) == pytest.approx(100.0, abs=0.1)


def test_bd_needs_four_points():
    short = curve("s", BPPS[:3], PSNRS[:3])
    with pytest.raises(PreconditionError):
        bd_psnr(short, curve("a", BPPS, PSNRS))


def test_bd_needs_overlap():
    a = curve("a", BPPS, PSNRS)
    b = curve("b", [r * 100 for r in BPPS], PSNRS)
    with pytest.raises(PreconditionError):
        bd_psnr(a, b)


def test_bd_report_fields():
    a = curve("a", BPPS, PSNRS)
    report = bd_report(a, a)
    assert report["pair"] == "a vs a"
    assert report["bd_psnr_db"] == pytest.approx(0.0, abs=1e-9)
    assert report["bd_rate_percent"] == pytest.approx(0.0, abs=1e-9)
    assert set(report["overlap"]) == {"log10_bpp", "psnr_db"}


def test_curve_requires_increasing_rate():
    with pytest.raises(ConfigurationError):
        RDCurve("x", (point(10, 1.0, 30), point(20, 0.5, 32)))
    sorted_curve = RDCurve.from_points("x", [point(20, 1.0, 32), point(10, 0.5, 30)])
    assert [p.qf for p in sorted_curve.points] == [10, 20]


def test_repeated_rates_are_split_off():
    kept, repeated = distinct_rates([point(60, 1.0, 33), point(20, 0.5, 30), point(50, 1.0, 32)])
    assert [p.qf for p in kept] == [20, 50]
    assert [p.qf for p in repeated] == [60]
    assert [p.qf for p in RDCurve.from_points("x", kept).points] == [20, 50]


def test_evaluate_perfect_reconstruction(textured_image):
    bs = Bitstream(bytes(64 * 64 // 64))
    p = evaluate_pair(textured_image, textured_image, bs, qf=50)
    assert p.bpp == 0.125
    assert p.psnr == math.inf
    assert p.ssim == 1.0 and p.msssim == 1.0 and p.miou == 1.0
    assert p.psnrb <= p.psnr


def test_evaluate_fields_match_individual_metrics(textured_image, rng):
    noisy = np.clip(textured_image + 0.05 * rng.standard_normal(textured_image.shape), 0, 1)
    p = evaluate_pair(textured_image, noisy, Bitstream(bytes(100)), qf=30)
    assert p.psnr == psnr(textured_image, noisy)
    assert p.ssim == ssim(textured_image, noisy)
    assert p.msssim == ms_ssim(textured_image, noisy)
    assert p.psnrb == psnrb(textured_image, noisy)


def test_average_points():
    avg = average_points([point(10, 1.0, 30.0), point(10, 3.0, 34.0)])
    assert avg.bpp == 2.0 and avg.psnr == 32.0 and avg.qf == 10
    # order does not change the aggregate
    assert average_points([point(10, 3.0, 34.0), point(10, 1.0, 30.0)]) == avg
    with pytest.raises(ConfigurationError):
        average_points([point(10, 1.0, 30.0), point(20, 2.0, 31.0)])


def test_curve_csv_round_trip(tmp_path):
    a = curve("CR", BPPS, PSNRS)
    b = RDCurve("FR", (RDPoint(qf=100, bpp=4.0, psnr=math.inf, ssim=1.0, msssim=1.0, psnrb=50.0, miou=1.0),))
    path = tmp_path / "rd.csv"
    asyncio.run(write_curve_csv(path, [a, b], with_msssim_db=True))
    assert path.read_text().splitlines()[0] == "label,qf,bpp,psnr,ssim,msssim,psnrb,miou,msssim_db"
    loaded = read_curve_csv(path)
    assert loaded == [a, b]


def test_curve_csv_errors(tmp_path):
    with pytest.raises(IngestionError):
        read_curve_csv(tmp_path / "missing.csv")
    bad = tmp_path / "bad.csv"
    bad.write_text("label,qf\nx,10\n")
    with pytest.raises(IngestionError, match="lacks columns"):
        read_curve_csv(bad)
