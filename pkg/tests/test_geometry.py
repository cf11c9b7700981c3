#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""Tests for `potholedetector.geometry` module."""

import math
import unittest

import numpy as np

from potholedetector.exceptions import PotholeDetectorError
from potholedetector.exceptions import DegenerateFitError
from potholedetector.exceptions import InsufficientObservationsError
from potholedetector.raster import DisparityMap
from potholedetector.raster import LabelMap
from potholedetector.raster import INVALID_DISPARITY
from potholedetector.config import StereoRig
from potholedetector import geometry
from potholedetector.geometry import RoadModel
from potholedetector.geometry import RoadObservations
from potholedetector.geometry import PointCloud


def _plane_observations(model, rng, count=10000, sigma=0.0):
    u = rng.uniform(0, 640, size=count)
    v = rng.uniform(200, 480, size=count)
    d = geometry.road_disparity_at(model, u, v)
    if sigma > 0:
        d = d + rng.normal(0.0, sigma, size=count)
    return RoadObservations(d=d, u=u, v=v)


class TestGeometry(unittest.TestCase):
    """Tests for `potholedetector.geometry` module."""

    def setUp(self):
        """Set up test fixtures, if any."""

    def tearDown(self):
        """Tear down test fixtures, if any."""

    def test_road_model_surface(self):
        surface = RoadModel(a0=10.0, a1=0.5).surface(3, 2)
        self.assertEqual([[10.0, 10.0, 10.0], [10.5, 10.5, 10.5]], surface.tolist())
        try:
            RoadModel(a0=float('nan'), a1=0.0)
            self.fail('Expected Exception')
        except PotholeDetectorError as e:
            self.assertEqual('Road model a0 is not finite', str(e))

    def test_road_model_roll_limit(self):
        self.assertEqual(math.pi / 4, RoadModel(a0=10.0, a1=0.1, phi=math.pi / 4).phi)
        self.assertEqual(-math.pi / 4, RoadModel(a0=10.0, a1=0.1, phi=-math.pi / 4).phi)
        for phi in (math.pi / 4 + 1e-6, -math.pi / 2, math.pi):
            try:
                RoadModel(a0=10.0, a1=0.1, phi=phi)
                self.fail('Expected Exception')
            except PotholeDetectorError as e:
                self.assertTrue(str(e).startswith('Road model roll'))
                self.assertTrue(str(e).endswith('exceeds pi / 4 in magnitude'))

    def test_observations_validation(self):
        try:
            RoadObservations(d=[1.0, 2.0], u=[0, 1], v=[0, 1])
            self.fail('Expected Exception')
        except InsufficientObservationsError as e:
            self.assertEqual('At least 3 observations required, got 2', str(e))
        try:
            RoadObservations(d=[1.0, 2.0, 3.0], u=[0, 1], v=[0, 1, 2])
            self.fail('Expected Exception')
        except PotholeDetectorError as e:
            self.assertEqual('Observation vectors differ in length', str(e))
        obs = RoadObservations(d=[1.0, 2.0, 3.0, 4.0], u=[0, 1, 2, 3], v=[0, 1, 2, 3])
        self.assertEqual(4, obs.k)
        self.assertEqual(3, obs.subset(np.array([True, False, True, True])).k)

    def test_fit_line_matches_normal_equations(self):
        rng = np.random.default_rng(12)
        for _ in range(100):
            k = int(rng.integers(3, 10001))
            phi = float(rng.uniform(-0.2, 0.2))
            u = rng.uniform(0, 640, size=k)
            v = rng.uniform(0, 480, size=k)
            d = (rng.uniform(5, 20) + rng.uniform(0.05, 0.2) * v +
                 rng.normal(0.0, 0.5, size=k))
            obs = RoadObservations(d=d, u=u, v=v)
            model, e0min = geometry.fit_line(obs, phi)

            x = v * math.cos(phi) - u * math.sin(phi)
            design = np.column_stack((np.ones(k), x))
            expected = np.linalg.solve(design.T @ design, design.T @ d)
            residual = d - design @ expected
            np.testing.assert_allclose([model.a0, model.a1], expected, rtol=1e-9)
            np.testing.assert_allclose(e0min, float(residual @ residual),
                                       rtol=1e-9, atol=1e-9)
            self.assertEqual(phi, model.phi)

    def test_fit_line_exact_plane(self):
        obs = RoadObservations(d=[10.0, 10.5, 11.0, 11.0], u=[0, 0, 0, 5],
                               v=[0, 1, 2, 2])
        model, e0min = geometry.fit_line(obs, 0.0)
        self.assertAlmostEqual(10.0, model.a0)
        self.assertAlmostEqual(0.5, model.a1)
        self.assertAlmostEqual(0.0, e0min)

    def test_fit_line_single_row_is_degenerate(self):
        obs = RoadObservations(d=[10.0, 11.0, 12.0], u=[0, 1, 2], v=[4, 4, 4])
        try:
            geometry.fit_line(obs, 0.0)
            self.fail('Expected Exception')
        except DegenerateFitError as e:
            self.assertTrue(str(e).startswith('Singular normal matrix'))

    def test_golden_section_minimize(self):
        x, value = geometry.golden_section_minimize(lambda p: (p - 0.3) ** 2, -1.0, 1.0,
                                                    1e-6)
        self.assertAlmostEqual(0.3, x, delta=1e-6)
        self.assertAlmostEqual(0.0, value, places=10)

        # bracket narrower than tol evaluates the midpoint only
        x, value = geometry.golden_section_minimize(lambda p: p, 0.0, 1e-8, 1e-6)
        self.assertEqual(0.5e-8, x)

    def test_estimate_roll_noiseless(self):
        rng = np.random.default_rng(5)
        for degrees in (-5.0, -2.0, 0.0, 2.0, 5.0):
            truth = RoadModel(a0=12.0, a1=0.1, phi=math.radians(degrees))
            model = geometry.estimate_roll(_plane_observations(truth, rng))
            self.assertAlmostEqual(degrees, math.degrees(model.phi), delta=0.01)
            self.assertAlmostEqual(0.1, model.a1, delta=1e-3)

    def test_estimate_roll_noisy(self):
        rng = np.random.default_rng(6)
        for degrees in (-5.0, 2.0):
            truth = RoadModel(a0=12.0, a1=0.1, phi=math.radians(degrees))
            obs = _plane_observations(truth, rng, sigma=0.1)
            model = geometry.estimate_roll(obs)
            self.assertAlmostEqual(degrees, math.degrees(model.phi), delta=0.1)

    def test_estimate_roll_trimming_rejects_outliers(self):
        rng = np.random.default_rng(7)
        truth = RoadModel(a0=12.0, a1=0.1, phi=math.radians(2.0))
        obs = _plane_observations(truth, rng, count=5000, sigma=0.05)
        d = obs.d.copy()
        d[:250] = d[:250] - 6.0
        dirty = RoadObservations(d=np.maximum(d, 0.0), u=obs.u, v=obs.v)
        trimmed = geometry.estimate_roll(dirty, trim_factor=3.0)
        untrimmed = geometry.estimate_roll(dirty, trim_factor=0.0)
        self.assertLess(abs(trimmed.a0 - 12.0), abs(untrimmed.a0 - 12.0))
        self.assertAlmostEqual(12.0, trimmed.a0, delta=0.1)

    def test_estimate_roll_errors(self):
        obs = RoadObservations(d=[10.0, 11.0, 12.0], u=[0, 0, 0], v=[4, 4, 4])
        try:
            geometry.estimate_roll(obs, tol=0.0)
            self.fail('Expected Exception')
        except PotholeDetectorError as e:
            self.assertEqual('tol must be > 0', str(e))

    def test_roll_energy_profile(self):
        rng = np.random.default_rng(8)
        truth = RoadModel(a0=12.0, a1=0.1, phi=math.radians(1.0))
        phis = np.radians(np.arange(-3.0, 3.5, 0.5))
        energy = geometry.roll_energy_profile(_plane_observations(truth, rng, count=2000),
                                              phis)
        self.assertEqual(phis.shape, energy.shape)
        self.assertEqual(8, int(np.argmin(energy)))
        self.assertTrue(np.all(np.diff(energy[:9]) < 0))
        self.assertTrue(np.all(np.diff(energy[8:]) > 0))

    def test_sample_observations(self):
        values = np.arange(20, dtype=np.float64).reshape(4, 5)
        values[0, 0] = INVALID_DISPARITY
        d1 = DisparityMap(values)
        obs = geometry.sample_observations(d1)
        self.assertEqual(19, obs.k)
        self.assertEqual([1.0, 0.0, 0.0], [obs.d[0], obs.u[0] - 1, obs.v[0]])

        obs = geometry.sample_observations(d1, roi=(1, 1, 3, 3))
        self.assertEqual([6.0, 7.0, 11.0, 12.0], obs.d.tolist())

        obs = geometry.sample_observations(d1, max_count=5)
        self.assertEqual(5, obs.k)

        try:
            geometry.sample_observations(d1, roi=(0, 0, 2, 1))
            self.fail('Expected Exception')
        except InsufficientObservationsError as e:
            self.assertEqual('too few valid pixels to fit road: 1', str(e))

    def test_transform_disparity(self):
        model = RoadModel(a0=10.0, a1=0.5)
        values = model.surface(4, 3)
        values[1, 1] -= 2.0
        values[2, 3] = INVALID_DISPARITY
        values[0, 0] = 0.0
        d2, clamped = geometry.transform_disparity(DisparityMap(values), model, 5.0)
        self.assertEqual(1, clamped)
        self.assertEqual(0.0, d2.values[0, 0])
        self.assertEqual(3.0, d2.values[1, 1])
        self.assertEqual(INVALID_DISPARITY, d2.values[2, 3])
        self.assertEqual(5.0, d2.values[2, 0])

    def test_reproject(self):
        rig = StereoRig(focal=700.0, baseline=0.12, cu=1.0, cv=0.0)
        d1 = DisparityMap(np.array([[8.4, 0.0, 8.4], [INVALID_DISPARITY, 16.8, 8.4]]))
        cloud = geometry.reproject(d1, rig)
        self.assertEqual(4, len(cloud))
        expected = [[-10.0 / 700.0, 0.0, 10.0],
                    [10.0 / 700.0, 0.0, 10.0],
                    [0.0, 5.0 / 700.0, 5.0],
                    [10.0 / 700.0, 10.0 / 700.0, 10.0]]
        np.testing.assert_allclose(cloud.points, expected)

    def test_extract_pothole_clouds(self):
        rig = StereoRig(cu=0.0, cv=0.0)
        d1 = DisparityMap(np.full((3, 3), 8.4))
        labels = LabelMap(np.array([[0, 2, 2], [0, 0, 0], [1, 0, 0]]))
        clouds = geometry.extract_pothole_clouds(d1, labels, rig)
        self.assertEqual([1, 2], [label for label, _ in clouds])
        self.assertEqual(1, len(clouds[0][1]))
        self.assertEqual(2, len(clouds[1][1]))

    def test_reproject_mask_and_merge_clouds(self):
        rig = StereoRig(focal=700.0, baseline=0.12, cu=0.0, cv=0.0)
        d1 = DisparityMap(np.array([[8.4, 8.4, 8.4], [INVALID_DISPARITY, 16.8, 8.4]]))
        labels = LabelMap(np.array([[0, 2, 0], [1, 1, 0]]))
        cloud = geometry.reproject_mask(d1, labels, rig)
        np.testing.assert_allclose(cloud.points, [[10.0 / 700.0, 0.0, 10.0],
                                                  [5.0 / 700.0, 5.0 / 700.0, 5.0]])
        try:
            geometry.reproject_mask(d1, LabelMap(np.zeros((3, 3), dtype=int)), rig)
            self.fail('Expected Exception')
        except PotholeDetectorError:
            pass

        merged = geometry.merge_clouds([cloud, cloud])
        self.assertEqual(4, len(merged))
        np.testing.assert_allclose(merged.points[2:], cloud.points)
        self.assertEqual(0, len(geometry.merge_clouds([])))

    def test_point_cloud_requires_positive_depth(self):
        try:
            PointCloud(np.array([[0.0, 0.0, 0.0]]))
            self.fail('Expected Exception')
        except PotholeDetectorError as e:
            self.assertEqual('Point cloud depths must be > 0', str(e))

    def test_closest_distance_error(self):
        truth = PointCloud(np.array([[0.0, 0.0, 1.0], [1.0, 0.0, 1.0], [0.0, 1.0, 1.0]]))
        self.assertEqual(0.0, geometry.closest_distance_error(truth, truth))
        test = PointCloud(truth.points + np.array([0.0, 0.0, 0.01]))
        self.assertAlmostEqual(0.01, geometry.closest_distance_error(test, truth))
        try:
            geometry.closest_distance_error(PointCloud(np.zeros((0, 3))), truth)
            self.fail('Expected Exception')
        except PotholeDetectorError as e:
            self.assertTrue('non empty' in str(e))
