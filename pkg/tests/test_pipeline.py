#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""Tests for `potholedetector.pipeline` module."""

import math
import unittest
from collections import OrderedDict

import numpy as np

from potholedetector.exceptions import DegenerateFitError
from potholedetector.exceptions import DimensionMismatchError
from potholedetector.config import PipelineConfig
from potholedetector.raster import GrayImage
from potholedetector import synth
from potholedetector import pipeline
from potholedetector.synth import Pothole
from potholedetector.synth import SceneSpec
from potholedetector.evaluation import pixel_metrics

STAGES = ['bootstrap', 'match', 'fit', 'transform', 'slic', 'pool',
          'threshold', 'detect', 'reproject']


def small_scene():
    spec = SceneSpec(width=160, height=120, a0=12.0, a1=0.1, seed=11,
                     potholes=(Pothole(u=80.0, v=70.0, ru=28.0, rv=20.0, depth=5.0),))
    return synth.generate_scene(spec)


def small_config(**kwargs):
    values = {'d_max': 16, 'slic_count': 48, 'init_scale': 2, 'init_d_max': 48}
    values.update(kwargs)
    return PipelineConfig(**values)


class TestPipeline(unittest.TestCase):
    """Tests for `potholedetector.pipeline` module."""

    def setUp(self):
        """Set up test fixtures, if any."""

    def tearDown(self):
        """Tear down test fixtures, if any."""

    def test_block_average(self):
        image = GrayImage(np.arange(20, dtype=np.float64).reshape(4, 5))
        reduced = pipeline.block_average(image, 2)
        self.assertEqual([[3.0, 5.0], [13.0, 15.0]], reduced.pixels.tolist())

    def test_roll_bracket(self):
        lower, upper = pipeline.roll_bracket(PipelineConfig(roll_bracket=10.0))
        self.assertAlmostEqual(-math.radians(10.0), lower)
        self.assertAlmostEqual(math.radians(10.0), upper)

    def test_stage_timer(self):
        times = OrderedDict()
        timer = pipeline.StageTimer(times)
        timer.lap('first')
        timer.lap('second')
        self.assertEqual(['first', 'second'], list(times.keys()))
        self.assertTrue(all(t >= 0 for t in times.values()))
        result = pipeline.FrameResult(stage_times=times)
        self.assertAlmostEqual(times['first'] + times['second'], result.runtime_ms)

    def test_bootstrap_road_model(self):
        truth = small_scene()
        model = pipeline.bootstrap_road_model(truth.left, truth.right, small_config())
        self.assertAlmostEqual(12.0, model.a0, delta=1.5)
        self.assertAlmostEqual(0.1, model.a1, delta=0.03)

    def test_detect_frame(self):
        truth = small_scene()
        config = small_config()
        result = pipeline.detect_frame(truth.left, truth.right, config)
        self.assertEqual(STAGES, list(result.stage_times.keys()))
        self.assertAlmostEqual(sum(result.stage_times.values()), result.runtime_ms)
        self.assertAlmostEqual(12.0, result.model.a0, delta=1.0)
        self.assertAlmostEqual(0.1, result.model.a1, delta=0.02)
        self.assertAlmostEqual(0.0, math.degrees(result.model.phi), delta=1.0)
        for raster in (result.d0, result.d1, result.d2, result.d3):
            self.assertEqual((120, 160), raster.values.shape)
        self.assertEqual((120, 160), result.labels.labels.shape)
        self.assertLess(result.threshold.t_s, result.threshold.t_r)

        # the deepest part of the pothole is found, the far corner is road
        self.assertNotEqual(0, result.labels.labels[70, 80])
        self.assertEqual(0, result.labels.labels[10, 10])
        self.assertEqual(result.labels.count, len(result.clouds))

        again = pipeline.detect_frame(truth.left, truth.right, config)
        self.assertTrue(np.array_equal(result.labels.labels, again.labels.labels))
        self.assertTrue(np.array_equal(result.d1.values, again.d1.values))

    def test_detect_with_delta_pd_override(self):
        truth = small_scene()
        config = small_config()
        result = pipeline.detect_frame(truth.left, truth.right, config)
        same = pipeline.detect(result, config, delta_pd=config.delta_pd)
        self.assertTrue(np.array_equal(result.labels.labels, same.labels))
        none = pipeline.detect(result, config, delta_pd=100.0)
        self.assertEqual(0, none.count)
        self.assertAlmostEqual(config.delta_pd, result.threshold.t_r - result.threshold.t_s)

    def test_detect_frame_textureless(self):
        flat = GrayImage(np.full((60, 80), 128.0))
        try:
            pipeline.detect_frame(flat, flat, small_config())
            self.fail('Expected Exception')
        except DegenerateFitError:
            pass

    def test_detect_frame_shape_mismatch(self):
        try:
            pipeline.detect_frame(GrayImage(np.zeros((60, 80))),
                                  GrayImage(np.zeros((60, 81))), small_config())
            self.fail('Expected Exception')
        except DimensionMismatchError:
            pass

    def test_detect_frame_refines_to_pixels(self):
        truth = small_scene()
        config = small_config()
        result = pipeline.detect_frame(truth.left, truth.right, config)
        self.assertEqual(result.labels.count, len(result.regions))
        self.assertEqual(list(range(1, result.labels.count + 1)),
                         [r.label for r in result.regions])
        region = result.regions[result.labels.labels[70, 80] - 1]
        self.assertTrue(3.5 < region.depth < 6.0, str(region))
        self.assertLess(region.level, region.road)
        self.assertIsNotNone(result.smoothed)
        report = pixel_metrics(result.labels, truth.gt_mask)
        self.assertGreater(report.fscore, 0.8)

        superpixel_only = pipeline.detect_regions(result, small_config(refine_radius=0.0))
        self.assertEqual((), superpixel_only.regions)
        self.assertNotEqual(0, superpixel_only.labels.labels[70, 80])

    def test_transformed_road_is_flat(self):
        spec = SceneSpec(width=160, height=120, a0=11.0, a1=0.09,
                         phi=math.radians(-2.0), seed=12, noise_sigma=0.5)
        truth = synth.generate_scene(spec)
        config = small_config()
        result = pipeline.detect_frame(truth.left, truth.right, config)
        road = result.d2.values[3:117, 32:157]
        road = road[result.d2.valid_mask[3:117, 32:157]]
        self.assertGreater(road.size, 0.8 * 114 * 125)
        self.assertLessEqual(float(np.std(road)), 1.0)
        self.assertAlmostEqual(config.delta_dt, float(np.mean(road)), delta=0.5)
