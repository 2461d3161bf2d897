import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from pdqeval.errors import InvalidCovariance, InvalidProbabilities, InvalidThreshold
from pdqeval.geometry import Rect
from pdqeval.oracles import mc_inclusion_probability
from pdqeval.pbox import (
    GaussianCorner,
    PBox,
    ProbabilisticDetection,
    bivariate_normal_cdf,
    inclusion_grid,
    pixel_inclusion_probability,
    rasterize,
    support_region,
)


class TestBivariateNormalCdf:
    def test_mean_point_isotropic(self):
        assert bivariate_normal_cdf((3, -1), (3, -1), np.diag([2.5, 2.5])) == pytest.approx(0.25, abs=1e-15)

    def test_zero_covariance_is_closed_step(self):
        assert bivariate_normal_cdf((4, 4), (4, 4), np.zeros((2, 2))) == 1.0
        assert bivariate_normal_cdf((3.999, 4), (4, 4), np.zeros((2, 2))) == 0.0

    def test_one_sigma_offset(self):
        # Frozen from dblquad of the density over (-40, 2] x (-40, 2], sigma = 2.
        p = bivariate_normal_cdf((2.0, 2.0), (0.0, 0.0), np.diag([4.0, 4.0]))
        assert p == pytest.approx(0.7078609817371408, abs=1e-7)

    def test_one_sigma_offset_against_live_quadrature(self):
        f = lambda y, x: stats.multivariate_normal.pdf([x, y], [0, 0], np.diag([4.0, 4.0]))
        expected = integrate.dblquad(f, -40, 2.0, -40, 2.0, epsabs=1e-12)[0]
        assert bivariate_normal_cdf((2.0, 2.0), (0, 0), np.diag([4.0, 4.0])) == pytest.approx(expected, abs=1e-7)

    def test_correlated(self):
        # Frozen from dblquad, mean (1, 2), cov [[4, 3], [3, 9]], point (0.5, 3.5).
        p = bivariate_normal_cdf((0.5, 3.5), (1, 2), [[4, 3], [3, 9]])
        assert p == pytest.approx(0.3451301793177457, abs=1e-7)

    def test_one_degenerate_axis(self):
        p = bivariate_normal_cdf((5, 1), (5, 0), [[0, 0], [0, 4]])
        assert p == pytest.approx(stats.norm.cdf(0.5), abs=1e-12)

    def test_singular_correlated(self):
        # X = Y exactly: P(X <= 1, Y <= 2) = Phi(1).
        assert bivariate_normal_cdf((1, 2), (0, 0), [[1, 1], [1, 1]]) == pytest.approx(stats.norm.cdf(1), abs=1e-12)

    @pytest.mark.parametrize(
        "cov",
        [[[1, 0], [0, -1]], [[1, 2], [2, 1]], [[1, 0.5], [0.2, 1]], [[np.nan, 0], [0, 1]], [1, 2, 3]],
    )
    def test_rejects_invalid_covariance(self, cov):
        with pytest.raises(InvalidCovariance):
            bivariate_normal_cdf((0, 0), (0, 0), cov)


class TestPixelInclusion:
    BOX = PBox.from_box(2, 2, 8, 6)

    def test_deterministic_inside(self):
        assert pixel_inclusion_probability((5, 4), self.BOX) == 1.0

    def test_deterministic_outside(self):
        assert pixel_inclusion_probability((9, 4), self.BOX) == 0.0

    def test_deterministic_boundary_is_closed(self):
        assert pixel_inclusion_probability((2, 6), self.BOX) == 1.0

    def test_uncertain_corner_at_its_mean(self):
        box = PBox.from_box(0, 0, 20, 20, np.diag([4, 4]), np.diag([4, 4]))
        p = pixel_inclusion_probability((0, 0), box)
        assert p == pytest.approx(0.25, abs=1e-12)
        est, se = mc_inclusion_probability((0, 0), box, samples=100_000, seed=5)
        assert abs(est - p) <= 3 * se

    @given(
        st.floats(-50, 50), st.floats(-50, 50), st.floats(0, 40), st.floats(0, 40),
        st.floats(0, 25), st.floats(0, 25), st.floats(-1, 1),
        st.floats(-80, 80), st.floats(-80, 80),
    )
    @settings(max_examples=300, deadline=None)
    def test_bounded(self, x, y, w, h, va, vb, rho, px, py):
        cov = [[va, rho * math.sqrt(va * vb)], [rho * math.sqrt(va * vb), vb]]
        box = PBox.from_box(x, y, x + w, y + h, cov, np.diag([vb, va]))
        assert 0.0 <= pixel_inclusion_probability((px, py), box) <= 1.0

    @given(
        st.integers(-30, 30), st.integers(-30, 30),
        st.floats(0, 25), st.floats(0, 25), st.floats(-0.99, 0.99),
        st.floats(-10, 30), st.floats(-10, 30),
    )
    @settings(max_examples=200, deadline=None)
    def test_translation_equivariance(self, dx, dy, va, vb, rho, px, py):
        c = rho * math.sqrt(va * vb)
        cov = [[va, c], [c, vb]]
        a = PBox.from_box(1, 2, 15, 12, cov, cov)
        b = PBox.from_box(1 + dx, 2 + dy, 15 + dx, 12 + dy, cov, cov)
        pa = pixel_inclusion_probability((px, py), a)
        pb = pixel_inclusion_probability((px + dx, py + dy), b)
        assert pa == pytest.approx(pb, abs=1e-9)

    @given(st.integers(-5, 20), st.integers(-5, 20))
    def test_zero_covariance_matches_indicator(self, i, j):
        box = PBox.from_box(2.3, 1.0, 11.0, 9.7)
        inside = 2.3 <= i + 0.5 <= 11.0 and 1.0 <= j + 0.5 <= 9.7
        assert pixel_inclusion_probability((i + 0.5, j + 0.5), box) == float(inside)


class TestSupportRegion:
    def test_deterministic_box(self):
        box = PBox.from_box(2, 2, 8, 6)
        for t in (0.001, 0.0027, 0.2, 0.49):
            r = support_region(box, t)
            # Pixel centers 2.5..7.5 x 2.5..5.5 are inside.
            assert r == Rect(2, 2, 7, 5)

    def test_gaussian_box_matches_scan(self):
        box = PBox.from_box(10, 10, 20, 20, np.eye(2), np.eye(2))
        r = support_region(box, 0.0027)
        # Tight rectangle from scanning every pixel of [-5, 40)^2.
        assert r == Rect(7, 7, 22, 22)

    def test_gaussian_box_live_scan(self):
        box = PBox.from_box(3, 5, 9, 7, [[6, 2], [2, 3]], [[2, -1], [-1, 4]])
        keep = [
            (x, y)
            for x in range(-20, 40)
            for y in range(-20, 40)
            if pixel_inclusion_probability((x + 0.5, y + 0.5), box) >= 0.0027
        ]
        xs, ys = zip(*keep)
        assert support_region(box, 0.0027) == Rect(min(xs), min(ys), max(xs), max(ys))

    @pytest.mark.parametrize("t", [0.6, 0.5, 0.0, -0.1])
    def test_threshold_precondition(self, t):
        with pytest.raises(InvalidThreshold):
            support_region(PBox.from_box(0, 0, 1, 1), t)

    def test_clip(self):
        box = PBox.from_box(-5, -5, 10, 10)
        assert support_region(box, clip=Rect(0, 0, 63, 63)) == Rect(0, 0, 9, 9)

    def test_vanishing_box_is_empty(self):
        box = PBox.from_box(10, 10, 10, 10, np.eye(2) * 25, np.eye(2) * 25)
        assert support_region(box, 0.3).is_empty
        assert rasterize(box, 0.3).width == 0


class TestRasterize:
    def test_deterministic_box(self):
        hm = rasterize(PBox.from_box(2, 2, 8, 6))
        assert hm.origin == (2, 2)
        assert (hm.width, hm.height) == (6, 4)
        assert np.all(hm.values == 1.0)

    @pytest.mark.parametrize(
        "tl_cov,br_cov",
        [
            (np.diag([3.0, 5.0]), np.diag([1.0, 0.5])),
            ([[4, 1.5], [1.5, 2]], [[9, -4], [-4, 3]]),
            ([[0, 0], [0, 6]], [[2, 1.9], [1.9, 2]]),
            ([[4, 4], [4, 4]], np.zeros((2, 2))),
        ],
    )
    def test_cells_equal_point_evaluations(self, tl_cov, br_cov):
        box = PBox.from_box(4.2, 3.1, 17.8, 12.6, tl_cov, br_cov)
        hm = rasterize(box, 0.0027)
        for j in range(hm.height):
            for i in range(hm.width):
                x, y = hm.origin[0] + i, hm.origin[1] + j
                p = pixel_inclusion_probability((x + 0.5, y + 0.5), box)
                if hm.values[j, i] == 0.0:
                    assert p < 0.0027
                else:
                    assert hm.values[j, i] == pytest.approx(p, abs=1e-12)

    def test_zero_outside_support(self):
        box = PBox.from_box(10, 10, 14, 14, np.eye(2) * 16, np.eye(2) * 16)
        hm = rasterize(box, 0.05)
        grid = inclusion_grid(box, Rect(-10, -10, 40, 40))
        r = hm.rect
        outside = np.ones_like(grid, dtype=bool)
        outside[r.y0 + 10:r.y1 + 11, r.x0 + 10:r.x1 + 11] = False
        assert np.all(grid[outside] < 0.05)
        assert np.all((hm.values == 0) | (hm.values >= 0.05))
        assert np.all((hm.values >= 0) & (hm.values <= 1))

    def test_heatmap_is_immutable(self):
        hm = rasterize(PBox.from_box(0, 0, 4, 4, np.eye(2), np.eye(2)))
        with pytest.raises(ValueError):
            hm.values[0, 0] = 0.5


class TestTypes:
    def test_near_symmetric_covariance_is_canonicalized(self):
        c = GaussianCorner((0, 0), [[2.0, 1.0 + 1e-12], [1.0, 2.0]])
        assert c.covariance[0, 1] == c.covariance[1, 0]

    def test_inverted_mean_box_rejected(self):
        with pytest.raises(ValueError):
            PBox.from_box(5, 0, 4, 3)

    @pytest.mark.parametrize("probs", [[1.2, 0.0], [-0.1, 0.5], [0.7, 0.4]])
    def test_label_probs_validated(self, probs):
        with pytest.raises(InvalidProbabilities):
            ProbabilisticDetection(PBox.from_box(0, 0, 1, 1), probs)

    def test_label_mass_may_be_withheld(self):
        d = ProbabilisticDetection(PBox.from_box(0, 0, 1, 1), [0.3, 0.2])
        assert d.predicted_class == 0
