import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pdqeval.oracles import naive_losses
from pdqeval.pbox import Heatmap, PBox, ProbabilisticDetection, rasterize
from pdqeval.quality import (
    EPS,
    PairwiseQuality,
    background_loss,
    foreground_loss,
    label_quality,
    pairwise_pdq,
    quality_from_heatmap,
    spatial_losses,
)
from pdqeval.synth import make_scene

from conftest import rect_object


def det(x1, y1, x2, y2, probs=(1.0, 0.0), tl_cov=None, br_cov=None):
    return ProbabilisticDetection(PBox.from_box(x1, y1, x2, y2, tl_cov, br_cov), probs)


def box_det(gt, probs=(1.0, 0.0), **kw):
    b = gt.bbox
    return det(b.x0, b.y0, b.x1 + 1, b.y1 + 1, probs, **kw)


def random_pbox(rng, width, height):
    x1, y1 = rng.uniform(-5, width - 5), rng.uniform(-5, height - 5)
    x2, y2 = x1 + rng.uniform(0, 30), y1 + rng.uniform(0, 30)
    covs = []
    for _ in range(2):
        e = rng.uniform(0, 25, size=2) * (rng.random(2) > 0.15)
        th = rng.uniform(0, np.pi)
        rot = np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
        covs.append(rot @ np.diag(e) @ rot.T)
    return PBox.from_box(x1, y1, x2, y2, *covs)


class TestLabelQuality:
    D = det(0, 0, 1, 1, (0.7, 0.3))

    def test_reads_true_class(self):
        assert label_quality(self.D, 0) == 0.7
        assert label_quality(self.D, 1) == 0.3

    def test_all_zero(self):
        assert label_quality(det(0, 0, 1, 1, (0.0, 0.0)), 1) == 0.0

    def test_missing_class(self):
        assert label_quality(self.D, 5) == 0.0


class TestForegroundLoss:
    def test_certain_detection(self):
        gt = rect_object(10, 10, 12, 14)
        assert foreground_loss(gt, box_det(gt)) == 0.0

    def test_half_probability(self):
        gt = rect_object(10, 10, 12, 14)
        b = gt.bbox
        hm = Heatmap((b.x0, b.y0), b.width, b.height, np.full((b.height, b.width), 0.5))
        fg, bg, hit = spatial_losses(gt, hm)
        assert fg == pytest.approx(math.log(2), abs=1e-12)
        assert bg == 0.0 and hit

    def test_missed_object_is_clamped(self):
        gt = rect_object(10, 10, 12, 14)
        assert foreground_loss(gt, det(40, 40, 50, 50)) == pytest.approx(-math.log(EPS))


class TestBackgroundLoss:
    def test_exact_box(self):
        gt = rect_object(10, 10, 12, 14)
        assert background_loss(gt, box_det(gt)) == 0.0

    def test_extra_certain_pixels(self):
        gt = rect_object(10, 10, 12, 14)
        b = gt.bbox
        # One extra column of 14 pixels at probability 1.
        d = det(b.x0, b.y0, b.x1 + 2, b.y1 + 1)
        k = b.height
        assert background_loss(gt, d) == pytest.approx(k / gt.pixel_count * -math.log(EPS), rel=1e-12)


class TestPairwise:
    def test_perfect_detection(self):
        gt = rect_object(10, 10, 12, 14)
        q = pairwise_pdq(gt, box_det(gt))
        assert (q.foreground_loss, q.background_loss, q.spatial_quality, q.label_quality, q.ppdq) == (0, 0, 1, 1, 1)

    def test_geometric_mean(self):
        q = PairwiseQuality.from_parts(math.log(4.0), 0.0, 0.64)
        assert q.spatial_quality == pytest.approx(0.25, abs=1e-15)
        assert q.ppdq == pytest.approx(0.4, abs=1e-15)

    def test_wrong_class(self):
        gt = rect_object(10, 10, 12, 14, class_id=1)
        q = pairwise_pdq(gt, box_det(gt, probs=(1.0, 0.0)))
        assert q.label_quality == 0.0 and q.ppdq == 0.0 and q.spatial_quality == 1.0

    def test_no_overlap_has_zero_spatial_quality(self):
        gt = rect_object(10, 10, 12, 14)
        q = pairwise_pdq(gt, det(40, 40, 50, 50))
        assert q.spatial_quality == 0.0 and q.ppdq == 0.0

    def test_field_invariants(self, rng):
        for seed in range(40):
            scene = make_scene(seed, 48, 48, n_objects=1, class_count=2)
            gt = scene.objects[0]
            q = pairwise_pdq(gt, ProbabilisticDetection(random_pbox(rng, 48, 48), rng.dirichlet([1, 1]) * 0.99))
            assert 0 <= q.spatial_quality <= 1 and 0 <= q.ppdq <= 1
            assert q.spatial_quality == pytest.approx(math.exp(-(q.foreground_loss + q.background_loss)), abs=1e-12)
            assert q.ppdq == pytest.approx(math.sqrt(q.spatial_quality * q.label_quality), abs=1e-12)


class TestOracleEquivalence:
    @pytest.mark.parametrize("seed", range(25))
    def test_losses_match_double_loop(self, seed):
        rng = np.random.default_rng(seed)
        scene = make_scene(seed, 40, 36, n_objects=1, size_range=(4, 20))
        gt = scene.objects[0]
        b = gt.bbox
        # Half of the cases center the box on the object so the foreground hits.
        if seed % 2:
            pbox = random_pbox(rng, 40, 36)
        else:
            cov = np.diag(rng.uniform(0, 9, 2))
            pbox = PBox.from_box(b.x0 + rng.normal(), b.y0 + rng.normal(), b.x1 + 1 + rng.normal(), b.y1 + 1 + rng.normal(), cov, cov)
        d = ProbabilisticDetection(pbox, [1.0, 0, 0])
        fg, bg, hit = naive_losses(gt, d)
        q = pairwise_pdq(gt, d)
        assert q.foreground_loss == pytest.approx(fg, abs=1e-9)
        assert q.background_loss == pytest.approx(bg, abs=1e-9)
        assert (q.spatial_quality > 0) == hit


class TestBandNeutrality:
    def test_band_pixels_do_not_change_losses(self, rng):
        # An L-shaped segment leaves a 6x6 corner of its box uncovered.
        gt = rect_object(10, 10, 16, 16, hole=(10, 10, 6, 6))
        pbox = PBox.from_box(9, 9, 27, 26, np.diag([2, 3]), np.diag([4, 1]))
        hm = rasterize(pbox, clip=None)
        base = quality_from_heatmap(gt, hm, 0.8)
        for _ in range(20):
            vals = hm.values.copy()
            for y in range(10, 16):
                for x in range(10, 16):
                    vals[y - hm.origin[1], x - hm.origin[0]] = rng.random()
            q = quality_from_heatmap(gt, hm.with_values(vals), 0.8)
            assert q.foreground_loss == base.foreground_loss
            assert q.background_loss == base.background_loss
            assert abs(q.ppdq - base.ppdq) <= 1e-12


class TestMonotoneLabel:
    @given(st.floats(0.01, 1.0), st.floats(0.01, 0.99))
    @settings(max_examples=60, deadline=None)
    def test_scaling_true_class_down_lowers_ppdq(self, p, factor):
        gt = rect_object(10, 10, 12, 14)
        d_hi = box_det(gt, probs=(p, 0.0), tl_cov=np.eye(2), br_cov=np.eye(2))
        d_lo = box_det(gt, probs=(p * factor, 0.0), tl_cov=np.eye(2), br_cov=np.eye(2))
        hi, lo = pairwise_pdq(gt, d_hi), pairwise_pdq(gt, d_lo)
        assert hi.spatial_quality > 0
        assert lo.ppdq < hi.ppdq


class TestCalibrationReward:
    @pytest.mark.parametrize("shift", [2.0, 3.0, 5.0])
    def test_some_variance_beats_zero(self, shift):
        gt = rect_object(20, 20, 20, 16)
        b = gt.bbox
        qs = {}
        for v in [0.0, 0.5, 1.0, 2.0, 4.0, 9.0, 16.0, 25.0]:
            cov = np.diag([v, v])
            d = det(b.x0 + shift, b.y0 + shift, b.x1 + 1 + shift, b.y1 + 1 + shift, tl_cov=cov, br_cov=cov)
            qs[v] = pairwise_pdq(gt, d).spatial_quality
        assert max(q for v, q in qs.items() if v > 0) > qs[0.0]
