from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from semvc.codec import CodecConfig, decode_video, encode_video
from semvc.metrics import bpp, evaluate_video, kbps, miou, per_class_iou, rd_points_to_csv, rd_sweep
from semvc.synthetic import SceneObject, SyntheticSceneSpec, default_corpus, generate_corpus


def brute_miou(a, b):
    classes = sorted(set(a.ravel().tolist()) | set(b.ravel().tolist()))
    ious = []
    for c in classes:
        inter = union = 0
        for x, y in zip(a.ravel().tolist(), b.ravel().tolist()):
            inter += x == c and y == c
            union += x == c or y == c
        ious.append(Fraction(inter, union))
    return sum(ious) / len(ious), dict(zip(classes, ious))


def shifted_block():
    gt = np.zeros((10, 10), np.uint16)
    gt[2:6, 2:6] = 1
    pred = np.zeros_like(gt)
    pred[3:7, 2:6] = 1
    return pred, gt


def bits_for_rate(kbps_rate, fps, frames):
    return kbps_rate * 1024 * frames / fps


class TestMiou:
    def test_identity(self):
        m = np.arange(12, dtype=np.uint16).reshape(3, 4)
        assert miou(m, m) == 1.0

    def test_disjoint(self):
        assert miou(np.zeros((4, 4), int), np.ones((4, 4), int)) == 0.0

    def test_shifted_block(self):
        pred, gt = shifted_block()
        ref, per = brute_miou(pred, gt)
        # frozen from the pixel count: background keeps 80 of 88 union pixels
        assert per == {0: Fraction(80, 88), 1: Fraction(12, 20)}
        assert per_class_iou(pred, gt) == pytest.approx({0: 80 / 88, 1: 0.6})
        assert miou(pred, gt) == pytest.approx(float(ref))
        assert miou(pred, gt) == pytest.approx(0.7545, abs=5e-5)

    def test_against_brute_force(self, rng):
        for _ in range(20):
            a = rng.integers(0, 4, (6, 7))
            b = rng.integers(0, 5, (6, 7))
            assert miou(a, b) == pytest.approx(float(brute_miou(a, b)[0]))

    def test_ignore_label(self):
        pred, gt = shifted_block()
        assert miou(pred, gt, ignore_label=0) == pytest.approx(0.6)

    def test_size_mismatch(self):
        with pytest.raises(ValueError):
            miou(np.zeros((2, 2), int), np.zeros((2, 3), int))

    @settings(max_examples=100, deadline=None)
    @given(st.integers(1, 8), st.integers(1, 8), st.integers(0, 2**32 - 1))
    def test_symmetry_and_range(self, h, w, seed):
        rng = np.random.default_rng(seed)
        a = rng.integers(0, 4, (h, w))
        b = rng.integers(0, 4, (h, w))
        assert miou(a, b) == miou(b, a)
        assert 0.0 <= miou(a, b) <= 1.0
        assert miou(a, a) == 1.0


class TestRate:
    def test_low_rate_operating_points(self):
        assert bpp(bits_for_rate(7, 10, 10), 512, 256, 10) == pytest.approx(0.0054, abs=1e-4)
        assert bpp(bits_for_rate(1, 10, 10), 512, 512, 10) == pytest.approx(0.00039, abs=1e-5)

    def test_zero(self):
        assert bpp(0, 4, 4, 1) == 0 and kbps(0, 3) == 0

    def test_kbps(self):
        assert kbps(10240, 10, 10) == 10.0
        with pytest.raises(ValueError):
            kbps(1, 0)
        with pytest.raises(ValueError):
            bpp(1, 0, 1, 1)

    def test_rate_identity(self):
        v = default_corpus(1, 1, 4, 64, size_range=(10, 30))[0]
        ev = encode_video(v)
        r = evaluate_video(v, CodecConfig())
        assert r.total_bits == ev.total_bits
        assert bpp(r.total_bits, 64, 64, 4) == ev.total_bits / (64 * 64 * 4)


@pytest.fixture(scope="module")
def corpus():
    return default_corpus(2, 2, 4, 64, size_range=(10, 30))


class TestSweep:
    def test_single_point_matches_direct(self, corpus):
        (pt,) = rd_sweep(corpus[:1], [6.0], [256], [4])
        v = corpus[0]
        ev = encode_video(v, CodecConfig(6.0, 256, 4))
        out = decode_video(ev)
        assert pt.total_bits == ev.total_bits
        assert pt.bpp == ev.total_bits / (64 * 64 * 4)
        assert pt.kbps == kbps(ev.total_bits, 4)
        assert pt.miou == pytest.approx(np.mean([miou(a, b) for a, b in zip(out, v)]))

    def test_grid_order_and_csv(self, corpus):
        pts = rd_sweep(corpus, [8, 4], [64, 256], [2, 1])
        assert [(p.q, p.p, p.xi) for p in pts] == sorted((q, p, x) for q in (64, 256) for p in (1, 2) for x in (4, 8))
        text = rd_points_to_csv(pts)
        lines = text.splitlines()
        assert lines[0] == "xi,q,p,total_bits,bpp,kbps,miou"
        assert len(lines) == 9
        assert lines[1].split(",")[0] == "4.000000"
        assert rd_points_to_csv(rd_sweep(corpus, [8, 4], [64, 256], [2, 1])) == text

    def test_pooled_bits(self, corpus):
        (pt,) = rd_sweep(corpus, [6], [256], [4])
        rs = [evaluate_video(v, CodecConfig(6, 256, 4)) for v in corpus]
        assert pt.total_bits == sum(r.total_bits for r in rs)
        assert pt.miou == pytest.approx(np.mean([r.miou for r in rs]))

    def test_workers_agree(self, corpus):
        a = rd_sweep(corpus, [6], [256], [4], workers=1)
        b = rd_sweep(corpus, [6], [256], [4], workers=2)
        assert a == b

    def test_empty_inputs(self, corpus):
        with pytest.raises(ValueError):
            rd_sweep([], [6])
        with pytest.raises(ValueError):
            rd_sweep(corpus, [])


class TestSynthetic:
    def test_seed_determinism(self):
        a = default_corpus(4, 2, 3, 64)
        b = default_corpus(4, 2, 3, 64)
        assert all(np.array_equal(x, y) for va, vb in zip(a, b) for x, y in zip(va, vb))
        c = default_corpus(5, 2, 3, 64)
        assert not all(np.array_equal(x, y) for va, vc in zip(a, c) for x, y in zip(va, vc))

    def test_zero_velocity_static(self):
        spec = SyntheticSceneSpec(0, 50, 40, 5, (SceneObject(3, "ellipse", (10, 20), (5, 5)),))
        frames = generate_corpus(spec)
        assert all(np.array_equal(frames[0], f) for f in frames)
        assert (frames[0] == 3).sum() > 0

    def test_shifted_rectangle(self):
        spec = SyntheticSceneSpec(0, 30, 30, 6, (SceneObject(2, "rectangle", (5, 7), (3, 4), (1, 0)),))
        frames = generate_corpus(spec)
        m0 = frames[0] == 2
        for k, f in enumerate(frames):
            assert np.array_equal(f == 2, np.roll(m0, k, axis=0))

    def test_random_spec_ranges(self):
        spec = SyntheticSceneSpec.random(9, moving=True)
        assert 3 <= len(spec.objects) <= 8
        assert all(1 <= o.label <= 20 and o.velocity != (0, 0) for o in spec.objects)
        f = generate_corpus(SyntheticSceneSpec.random(9, 96, 80, 2))[0]
        assert f.shape == (80, 96) and f.dtype == np.uint16

    def test_oversized_object(self):
        spec = SyntheticSceneSpec(0, 10, 10, 1, (SceneObject(1, "rectangle", (11, 3), (0, 0)),))
        with pytest.raises(ValueError):
            generate_corpus(spec)
        with pytest.raises(ValueError):
            SceneObject(1, "star", (3, 3), (0, 0)).mask()
