import math

import numpy as np
import pytest

from synth import radial_errors, render_plain_disc, render_target
from ringkit.errors import EmptyForeground, PithOutsideMask, ZeroDimension
from ringkit.evaluation import match_detections
from ringkit.imageproc import (
    DetectorConfig,
    GrayImage,
    detect_rings,
    estimate_pith,
    load_image,
    otsu_threshold,
    remove_background,
    resize_lanczos,
)
from ringkit.model import Pith, Point2, validate
from ringkit.model import AnnotationDocument


def _lanczos3_ref(x):
    if abs(x) >= 3:
        return 0.0
    if x == 0:
        return 1.0
    return (
        math.sin(math.pi * x) / (math.pi * x)
        * math.sin(math.pi * x / 3) / (math.pi * x / 3)
    )


class TestResizeLanczos:
    def test_dc_preservation(self):
        img = GrayImage(np.full((40, 56), 0.5))
        for shape in ((20, 28), (80, 112), (11, 13)):
            out = resize_lanczos(img, shape[1], shape[0])
            assert np.max(np.abs(out.samples - 0.5)) < 1.0 / 255.0

    def test_impulse_taps_match_kernel(self):
        # 1-D impulse upscaled x2: odd outputs sample at half-integer
        # offsets, so taps are the normalized Lanczos-3 kernel at +-0.5,
        # +-1.5, +-2.5. A mid-gray pedestal keeps the negative lobes
        # inside the clamped range.
        n = 32
        ped, amp = 0.5, 0.25
        row = np.full((1, n), ped)
        row[0, n // 2] += amp
        out = resize_lanczos(row, 2 * n, 1)[0]
        raw = [_lanczos3_ref(d) for d in (-2.5, -1.5, -0.5, 0.5, 1.5, 2.5)]
        norm = sum(raw)
        center = 2 * (n // 2)
        assert (out[center] - ped) / amp == pytest.approx(1.0, abs=1e-6)
        assert (out[center + 1] - ped) / amp == pytest.approx(raw[3] / norm, abs=1e-6)
        assert (out[center + 3] - ped) / amp == pytest.approx(raw[4] / norm, abs=1e-6)
        assert (out[center + 5] - ped) / amp == pytest.approx(raw[5] / norm, abs=1e-6)

    def test_unnormalized_tap_value(self):
        # the raw kernel value at 0.5 is the classic 0.6079
        assert _lanczos3_ref(0.5) == pytest.approx(0.6079271, abs=1e-6)

    def test_dimensions(self):
        img = GrayImage(np.random.default_rng(0).uniform(size=(3000, 4000)))
        out = resize_lanczos(img, 2000, 1500)
        assert (out.width, out.height) == (2000, 1500)
        up = resize_lanczos(GrayImage(np.zeros((10, 10))), 20, 20)
        assert (up.width, up.height) == (20, 20)
        quarter = resize_lanczos(img, 1000, 750)
        assert (quarter.width, quarter.height) == (1000, 750)

    def test_zero_dimension(self):
        with pytest.raises(ZeroDimension):
            resize_lanczos(GrayImage(np.zeros((4, 4))), 0, 4)

    def test_output_clamped(self):
        rng = np.random.default_rng(1)
        img = GrayImage(rng.uniform(size=(64, 64)) > 0.5)
        out = resize_lanczos(GrayImage(img.samples.astype(float)), 31, 33)
        assert out.samples.min() >= 0.0
        assert out.samples.max() <= 1.0

    def test_rgb_array_per_channel(self):
        rgb = np.zeros((16, 16, 3))
        rgb[:, :, 0] = 0.25
        rgb[:, :, 1] = 0.5
        rgb[:, :, 2] = 0.75
        out = resize_lanczos(rgb, 8, 8)
        assert out.shape == (8, 8, 3)
        assert np.allclose(out[:, :, 0], 0.25, atol=1e-9)
        assert np.allclose(out[:, :, 2], 0.75, atol=1e-9)


class TestBackgroundAndPith:
    def test_white_disc_mask(self):
        img = render_plain_disc(size=300, radius=100.0)
        mask = remove_background(img)
        ys, xs = np.mgrid[0:300, 0:300]
        r = np.hypot(xs - 150.0, ys - 150.0)
        inner = r <= 98.0
        outer = r >= 102.0
        assert mask.bits[inner].all()
        assert (~mask.bits[outer]).all()

    def test_all_black_empty(self):
        with pytest.raises(EmptyForeground):
            remove_background(GrayImage(np.zeros((64, 64))))

    def test_disc_touching_border_survives(self):
        img = render_plain_disc(size=200, radius=80.0, center=(60.0, 100.0))
        mask = remove_background(img)
        # disc extends past the left border; flood fill must only remove
        # border-connected background
        assert mask.bits[100, 30]
        assert not mask.bits[100, 195]

    def test_dark_sample_on_light_background(self):
        img = render_plain_disc(size=200, radius=70.0, value=0.15, background=0.9)
        mask = remove_background(img)
        assert mask.bits[100, 100]
        assert not mask.bits[5, 5]

    def test_pith_centered_disc(self):
        img = render_plain_disc(size=200, radius=70.0)
        pith = estimate_pith(remove_background(img))
        assert pith.center.x == pytest.approx(99.5, abs=0.5)
        assert pith.center.y == pytest.approx(99.5, abs=0.5)

    def test_pith_off_center_disc(self):
        img = render_plain_disc(size=300, radius=60.0, center=(90.0, 200.0))
        pith = estimate_pith(remove_background(img))
        assert pith.center.x == pytest.approx(90.0, abs=1.0)
        assert pith.center.y == pytest.approx(200.0, abs=1.0)

    def test_pith_semicircle_centroid(self):
        # half disc: centroid offset from flat edge is 4r/(3*pi)
        size, r = 400, 150.0
        ys, xs = np.mgrid[0:size, 0:size].astype(float)
        cx = cy = 200.0
        half = (np.hypot(xs - cx, ys - cy) <= r) & (xs >= cx)
        img = GrayImage(np.where(half, 0.9, 0.05))
        pith = estimate_pith(remove_background(img))
        assert pith.center.x == pytest.approx(cx + 4 * r / (3 * math.pi), abs=1.5)
        assert pith.center.y == pytest.approx(cy, abs=1.0)

    def test_otsu_separates_bimodal(self):
        rng = np.random.default_rng(0)
        a = rng.normal(0.2, 0.03, 5000)
        b = rng.normal(0.8, 0.03, 5000)
        thr = otsu_threshold(np.concatenate([a, b]))
        assert 0.3 < thr < 0.7


class TestLoadImage(object):
    def test_png_gray_8bit(self, tmp_path):
        from PIL import Image

        arr = (np.linspace(0, 255, 64).reshape(8, 8)).astype(np.uint8)
        p = tmp_path / "g.png"
        Image.fromarray(arr, mode="L").save(p)
        img = load_image(p)
        assert img.samples.max() == pytest.approx(arr.max() / 255.0)

    def test_png_gray_16bit(self, tmp_path):
        from PIL import Image

        arr = (np.linspace(0, 65535, 64).reshape(8, 8)).astype(np.uint16)
        p = tmp_path / "g16.png"
        Image.fromarray(arr).save(p)
        img = load_image(p)
        assert img.samples.max() == pytest.approx(1.0, abs=1e-4)

    def test_rgb_luma(self, tmp_path):
        from PIL import Image

        arr = np.zeros((4, 4, 3), dtype=np.uint8)
        arr[:, :, 0] = 255  # pure red
        p = tmp_path / "rgb.png"
        Image.fromarray(arr, mode="RGB").save(p)
        img = load_image(p)
        assert img.samples[0, 0] == pytest.approx(0.299, abs=1e-6)

    def test_jpeg(self, tmp_path):
        from PIL import Image

        arr = np.full((16, 16), 128, dtype=np.uint8)
        p = tmp_path / "g.jpg"
        Image.fromarray(arr, mode="L").save(p, quality=95)
        img = load_image(p)
        assert img.samples.mean() == pytest.approx(0.5, abs=0.03)


def _detect_on_target(size, n_rings, period, **kw):
    cfg = kw.pop("cfg", DetectorConfig())
    img, gt, center = render_target(size=size, n_rings=n_rings, period=period, **kw)
    mask = remove_background(img)
    pith = estimate_pith(mask)
    detections = detect_rings(img, pith, mask, cfg)
    return img, gt, center, pith, detections


class TestDetectRings:
    def test_concentric_target(self):
        img, gt, center, pith, det = _detect_on_target(
            600, 10, 20.0, contrast=0.6, noise_sigma=0.05, seed=5
        )
        report = match_detections(gt, det, threshold=0.90)
        assert report.tp >= 9
        # radial accuracy of matched detections
        for a in report.assignments:
            errs = radial_errors(det[a.dt_ring_id], a.gt_ring_id + 1, 20.0, center)
            assert errs.max() < 2.0

    def test_elliptical_target(self):
        img, gt, center, pith, det = _detect_on_target(
            700, 10, 20.0, contrast=0.6, noise_sigma=0.05, ellipse_ratio=1.5, seed=6
        )
        report = match_detections(gt, det, threshold=0.90)
        assert report.tp >= 9
        for a in report.assignments:
            errs = radial_errors(
                det[a.dt_ring_id], a.gt_ring_id + 1, 20.0, center, ellipse_ratio=1.5
            )
            assert errs.max() < 3.0

    def test_blank_disc_no_rings(self):
        img = render_plain_disc(size=400, radius=150.0, noise_sigma=0.0)
        mask = remove_background(img)
        pith = estimate_pith(mask)
        det = detect_rings(img, pith, mask, DetectorConfig())
        assert det == []

    def test_blank_noisy_disc_no_rings(self):
        img = render_plain_disc(size=400, radius=150.0, value=0.5, noise_sigma=0.02, seed=8)
        mask = remove_background(img)
        pith = estimate_pith(mask)
        det = detect_rings(img, pith, mask, DetectorConfig())
        assert det == []

    def test_output_passes_validation(self):
        img, gt, center, pith, det = _detect_on_target(
            500, 6, 20.0, contrast=0.6, noise_sigma=0.04, seed=9
        )
        doc = AnnotationDocument(
            image_path="synthetic.png",
            image_size=(500, 500),
            pith=pith,
            shapes=tuple(det),
        )
        assert validate(doc) == []
        areas = [b.enclosed_area_px2() for b in det]
        assert areas == sorted(areas)
        assert all(len(b.points) == b.node_budget for b in det)

    def test_rotation_equivariance(self):
        # rotating the elliptical target must rotate the detections with it
        img, gt, center, pith, det = _detect_on_target(
            600, 6, 22.0, contrast=0.6, noise_sigma=0.03, ellipse_ratio=1.4,
            rotation_deg=37.0, seed=10
        )
        report = match_detections(gt, det, threshold=0.90)
        assert report.tp >= 5
        rms_all = []
        for a in report.assignments:
            errs = radial_errors(
                det[a.dt_ring_id], a.gt_ring_id + 1, 22.0, center,
                ellipse_ratio=1.4, rotation_deg=37.0,
            )
            rms_all.append(float(np.sqrt(np.mean(errs**2))))
        assert max(rms_all) < 2.0

    def test_pith_outside_mask(self):
        img = render_plain_disc(size=200, radius=60.0)
        mask = remove_background(img)
        with pytest.raises(PithOutsideMask):
            detect_rings(img, Pith(center=Point2(5.0, 5.0)), mask, DetectorConfig())

    @pytest.mark.parametrize("factor", [2, 4])
    def test_downscale_same_ring_count(self, factor):
        img, gt, center, pith, det = _detect_on_target(
            600, 6, 24.0, contrast=0.7, noise_sigma=0.02, seed=12
        )
        small = resize_lanczos(img, 600 // factor, 600 // factor)
        mask2 = remove_background(small)
        pith2 = estimate_pith(mask2)
        det2 = detect_rings(small, pith2, mask2, DetectorConfig())
        assert len(det2) == len(det)

    def test_runtime_3000px_single_threaded(self):
        import time

        img, gt, center = render_target(
            size=3000, n_rings=10, period=100.0, contrast=0.6, noise_sigma=0.05, seed=13
        )
        t0 = time.perf_counter()
        mask = remove_background(img)
        pith = estimate_pith(mask)
        det = detect_rings(img, pith, mask, DetectorConfig())
        elapsed = time.perf_counter() - t0
        assert elapsed < 10.0
        assert len(det) >= 9
