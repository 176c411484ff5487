import numpy as np

from igo_pqa.config import PipelineConfig
from igo_pqa.point_saliency import PointSaliencyBatch
from igo_pqa.pooling import (
    camera_raw_score,
    canvas_shape,
    pooled_canvas,
    splat,
)


def batch_from(u, v, s):
    u = np.asarray(u, dtype=np.float64)
    return PointSaliencyBatch(
        camera_id="cam",
        point_index=np.arange(len(u)),
        u=u,
        v=np.asarray(v, dtype=np.float64),
        s=np.asarray(s, dtype=np.float64),
    )


class TestSplat:
    def test_peak_weight_is_s(self):
        canvas = np.zeros((21, 21))
        splat(canvas, 10.0, 10.0, 0.7, sigma=2.5, radius=5.0)
        np.testing.assert_allclose(canvas[10, 10], 0.7)

    def test_disc_mass(self):
        # every covered cell contributes s * exp(-d^2 / (2 sigma^2));
        # center on a cell so the offsets are the integer grid
        canvas = np.zeros((21, 21))
        splat(canvas, 10.0, 10.0, 1.0, sigma=2.5, radius=5.0)
        expected = 0.0
        for dy in range(-5, 6):
            for dx in range(-5, 6):
                d2 = dx * dx + dy * dy
                if d2 <= 25.0:
                    expected += np.exp(-d2 / 12.5)
        np.testing.assert_allclose(canvas.sum(), expected, atol=1e-12)

    def test_radius_boundary_inclusive(self):
        canvas = np.zeros((21, 21))
        splat(canvas, 10.0, 10.0, 1.0, sigma=2.5, radius=5.0)
        assert canvas[10, 15] > 0.0  # d = 5 exactly
        assert canvas[10, 16] == 0.0
        assert canvas[15, 15] == 0.0  # d = 5*sqrt(2)

    def test_clipped_at_border(self):
        # only the quarter disc with dx, dy >= 0 survives the clip
        canvas = np.zeros((8, 8))
        splat(canvas, 0.0, 0.0, 1.0, sigma=2.5, radius=5.0)
        assert canvas[0, 0] == 1.0
        expected = sum(np.exp(-(dx * dx + dy * dy) / 12.5)
                       for dy in range(6) for dx in range(6)
                       if dx * dx + dy * dy <= 25.0)
        np.testing.assert_allclose(canvas.sum(), expected, atol=1e-12)
        assert (canvas[6:, :] == 0.0).all()

    def test_off_canvas_is_noop(self):
        canvas = np.zeros((8, 8))
        splat(canvas, 50.0, 50.0, 1.0, sigma=2.5, radius=5.0)
        assert canvas.sum() == 0.0


class TestCanvasShape:
    def test_identity_downsample(self):
        assert canvas_shape(32, 24, 1) == (24, 32)

    def test_rounds_up(self):
        assert canvas_shape(33, 25, 2) == (13, 17)
        assert canvas_shape(32, 24, 4) == (6, 8)


class TestPooledCanvas:
    def config(self, **kw):
        return PipelineConfig(**kw)

    def test_matches_sequential_splats(self):
        rng = np.random.default_rng(0)
        config = self.config()
        for _ in range(10):
            n = rng.integers(1, 40)
            u = rng.uniform(-3, 35, size=n)
            v = rng.uniform(-3, 27, size=n)
            s = rng.uniform(size=n)
            fast = pooled_canvas(batch_from(u, v, s), 32, 24, config)
            slow = np.zeros((24, 32))
            for uu, vv, ss in zip(u, v, s):
                splat(slow, uu, vv, ss, config.splat_sigma, config.splat_radius)
            np.testing.assert_allclose(fast, slow, atol=1e-12)

    def test_bit_identical_under_permutation(self):
        rng = np.random.default_rng(1)
        config = self.config()
        u = rng.uniform(0, 32, size=60)
        v = rng.uniform(0, 24, size=60)
        s = rng.uniform(size=60)
        ref = pooled_canvas(batch_from(u, v, s), 32, 24, config)
        for _ in range(5):
            p = rng.permutation(60)
            out = pooled_canvas(batch_from(u[p], v[p], s[p]), 32, 24, config)
            np.testing.assert_array_equal(out, ref)

    def test_downsample_halves_coordinates(self):
        config = self.config(downsample=2)
        canvas = pooled_canvas(batch_from([20.0], [12.0], [1.0]), 32, 24, config)
        assert canvas.shape == (12, 16)
        np.testing.assert_allclose(canvas[6, 10], 1.0)

    def test_empty_batch(self):
        canvas = pooled_canvas(batch_from([], [], []), 32, 24, self.config())
        assert canvas.shape == (24, 32)
        assert canvas.sum() == 0.0

    def test_additive_in_splats(self):
        config = self.config()
        a = batch_from([5.0], [5.0], [0.3])
        b = batch_from([14.0], [9.0], [0.9])
        both = batch_from([5.0, 14.0], [5.0, 9.0], [0.3, 0.9])
        np.testing.assert_allclose(
            pooled_canvas(both, 32, 24, config),
            pooled_canvas(a, 32, 24, config) + pooled_canvas(b, 32, 24, config),
            atol=1e-12)


class TestCameraRawScore:
    def test_equals_canvas_sum(self):
        rng = np.random.default_rng(2)
        config = PipelineConfig()
        batch = batch_from(rng.uniform(0, 32, 25), rng.uniform(0, 24, 25),
                           rng.uniform(size=25))
        np.testing.assert_allclose(
            camera_raw_score(batch, 32, 24, config),
            pooled_canvas(batch, 32, 24, config).sum())

    def test_more_salient_points_score_higher(self):
        config = PipelineConfig()
        lo = batch_from([16.0], [12.0], [0.2])
        hi = batch_from([16.0], [12.0], [0.9])
        assert (camera_raw_score(hi, 32, 24, config)
                > camera_raw_score(lo, 32, 24, config))
