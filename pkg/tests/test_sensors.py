import math

import numpy as np
import pytest

from safenav.geometry import Point2
from safenav.motion import MotionState
from safenav.sensors import (Landmark, LandmarkCluster, LandmarkMap,
                             LocalizationUnavailableError, SensorNoise,
                             TrilaterationError, measure_imu,
                             measure_position, trilaterate)

ANCHORS = np.array([[0.0, 0.0], [10.0, 0.0], [0.0, 10.0]])
TRUE_POINT = np.array([3.0, 4.0])
TRUE_RANGES = np.hypot(ANCHORS[:, 0] - 3.0, ANCHORS[:, 1] - 4.0)


def square_map(center=(50.0, 50.0), spread=5.0, cluster_id=1, id0=1) -> LandmarkMap:
    cx, cy = center
    marks = [Landmark(id0 + i, Point2(cx + dx * spread, cy + dy * spread), cluster_id)
             for i, (dx, dy) in enumerate([(-1, -1), (1, -1), (1, 1), (-1, 1)])]
    return LandmarkMap(marks)


def grid_search_sse(anchors, dists, lo, hi, step=0.01):
    """Dense grid search minimizing the sum of squared range residuals."""
    xs = np.arange(lo[0], hi[0], step)
    ys = np.arange(lo[1], hi[1], step)
    gx, gy = np.meshgrid(xs, ys)
    sse = np.zeros_like(gx)
    for (ax, ay), d in zip(anchors, dists):
        sse += (np.hypot(gx - ax, gy - ay) - d) ** 2
    i = np.argmin(sse)
    return np.array([gx.flat[i], gy.flat[i]]), sse.flat[i]


class TestTrilaterate:
    def test_exact_on_consistent_ranges(self):
        p = trilaterate(ANCHORS, TRUE_RANGES)
        assert p.x == pytest.approx(3.0, abs=1e-6)
        assert p.y == pytest.approx(4.0, abs=1e-6)

    def test_ranges_to_an_anchor(self):
        dists = np.hypot(ANCHORS[:, 0] - 10.0, ANCHORS[:, 1])
        p = trilaterate(ANCHORS, dists)
        assert p.x == pytest.approx(10.0, abs=1e-6)
        assert p.y == pytest.approx(0.0, abs=1e-6)

    def test_perturbed_ranges_near_grid_oracle(self):
        dists = TRUE_RANGES + 0.1
        p = trilaterate(ANCHORS, dists)
        assert math.hypot(p.x - 3.0, p.y - 4.0) < 0.2
        best, best_sse = grid_search_sse(ANCHORS, dists, (2.0, 3.0), (4.0, 5.0))
        ours = sum((math.hypot(p.x - ax, p.y - ay) - d) ** 2
                   for (ax, ay), d in zip(ANCHORS, dists))
        assert ours <= best_sse + 1e-6
        assert math.hypot(p.x - best[0], p.y - best[1]) < 0.05

    def test_collinear_anchors_raise(self):
        anchors = np.array([[0.0, 0.0], [5.0, 0.0], [10.0, 0.0]])
        with pytest.raises(TrilaterationError):
            trilaterate(anchors, np.array([1.0, 2.0, 3.0]))

    def test_too_few_anchors_raise(self):
        with pytest.raises(TrilaterationError):
            trilaterate(ANCHORS[:2], TRUE_RANGES[:2])

    def test_noiseless_random_cases(self):
        rng = np.random.default_rng(5)
        for _ in range(30):
            anchors = rng.uniform(0, 100, (4, 2))
            truth = rng.uniform(10, 90, 2)
            dists = np.hypot(anchors[:, 0] - truth[0], anchors[:, 1] - truth[1])
            p = trilaterate(anchors, dists)
            assert math.hypot(p.x - truth[0], p.y - truth[1]) < 1e-6


class TestLandmarkMap:
    def test_cluster_requires_three_members(self):
        with pytest.raises(ValueError):
            LandmarkCluster(id=1, member_ids=(1, 2), centroid=Point2(0, 0))

    def test_duplicate_ids_rejected(self):
        marks = [Landmark(1, Point2(0, 0), 1), Landmark(1, Point2(1, 0), 1),
                 Landmark(2, Point2(0, 1), 1)]
        with pytest.raises(ValueError):
            LandmarkMap(marks)

    def test_centroid_is_member_mean(self):
        lmap = square_map()
        assert (lmap.clusters[0].centroid.x, lmap.clusters[0].centroid.y) == (50.0, 50.0)


class TestMeasurePosition:
    def test_noiseless_fix_is_exact(self):
        lmap = square_map()
        noise = SensorNoise(sigma_range=0.0, sigma_fix_x=0.0, sigma_fix_y=0.0)
        fix = measure_position(Point2(52.0, 47.0), lmap, noise,
                               np.random.default_rng(0))
        assert fix.position.x == pytest.approx(52.0, abs=1e-6)
        assert fix.position.y == pytest.approx(47.0, abs=1e-6)

    def test_out_of_range_raises(self):
        lmap = square_map()
        noise = SensorNoise(detect_range=10.0)
        with pytest.raises(LocalizationUnavailableError):
            measure_position(Point2(150.0, 150.0), lmap, noise,
                             np.random.default_rng(0))

    def test_two_in_range_is_not_enough(self):
        marks = [Landmark(1, Point2(0, 0), 1), Landmark(2, Point2(1, 0), 1),
                 Landmark(3, Point2(200, 200), 1)]
        lmap = LandmarkMap(marks)
        noise = SensorNoise(detect_range=50.0)
        with pytest.raises(LocalizationUnavailableError):
            measure_position(Point2(0.5, 0.5), lmap, noise,
                             np.random.default_rng(0))

    def test_nearest_qualifying_cluster_selected(self):
        marks = (square_map(center=(20, 20)).landmarks
                 | square_map(center=(80, 80), cluster_id=2, id0=10).landmarks)
        lmap = LandmarkMap(list(marks.values()))
        noise = SensorNoise(sigma_fix_x=0.0, sigma_fix_y=0.0, detect_range=200.0)
        fix = measure_position(Point2(25.0, 25.0), lmap, noise,
                               np.random.default_rng(0))
        # both clusters qualify; the near one is exact for the noiseless case
        assert fix.position.x == pytest.approx(25.0, abs=1e-6)

    def test_default_rmse_calibration(self):
        lmap = square_map()
        noise = SensorNoise()
        rng = np.random.default_rng(10)
        n = 10_000
        errs = np.empty((n, 2))
        for i in range(n):
            fix = measure_position(Point2(50.0, 50.0), lmap, noise, rng)
            errs[i] = (fix.position.x - 50.0, fix.position.y - 50.0)
        rmse = np.sqrt((errs ** 2).mean(axis=0))
        assert abs(rmse[0] - 0.0142) / 0.0142 < 0.2
        assert abs(rmse[1] - 0.039) / 0.039 < 0.2

    def test_fix_errors_unbiased(self):
        lmap = square_map()
        noise = SensorNoise(sigma_range=0.05)
        rng = np.random.default_rng(21)
        n = 10_000
        errs = np.empty((n, 2))
        for i in range(n):
            fix = measure_position(Point2(48.0, 53.0), lmap, noise, rng)
            errs[i] = (fix.position.x - 48.0, fix.position.y - 53.0)
        se = errs.std(axis=0, ddof=1) / math.sqrt(n)
        assert np.all(np.abs(errs.mean(axis=0)) < 3.0 * se)

    def test_covariance_reports_fix_sigmas(self):
        lmap = square_map()
        noise = SensorNoise()
        fix = measure_position(Point2(50.0, 50.0), lmap, noise,
                               np.random.default_rng(0))
        assert np.allclose(fix.covariance, np.diag([0.0142 ** 2, 0.039 ** 2]))


class TestMeasureImu:
    def test_noiseless_exact(self):
        state = MotionState(Point2(0, 0), 3.2, 0.7)
        v, th = measure_imu(state, SensorNoise(), np.random.default_rng(0))
        assert (v, th) == (3.2, 0.7)

    def test_speed_clamped_nonnegative(self):
        state = MotionState(Point2(0, 0), 0.0, 0.0)
        noise = SensorNoise(sigma_imu_v=1.0)
        rng = np.random.default_rng(3)
        readings = [measure_imu(state, noise, rng)[0] for _ in range(200)]
        assert min(readings) >= 0.0

    def test_reproducible(self):
        state = MotionState(Point2(0, 0), 2.0, -1.0)
        noise = SensorNoise(sigma_imu_v=0.1, sigma_imu_theta=0.05)
        a = measure_imu(state, noise, np.random.default_rng(7))
        b = measure_imu(state, noise, np.random.default_rng(7))
        assert a == b
