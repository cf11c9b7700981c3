#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""Tests for `potholedetector.evaluation` module."""

import math
import unittest

import numpy as np

from potholedetector.exceptions import PotholeDetectorError
from potholedetector.exceptions import DimensionMismatchError
from potholedetector.raster import DisparityMap
from potholedetector.raster import LabelMap
from potholedetector.raster import INVALID_DISPARITY
from potholedetector.geometry import PointCloud
from potholedetector import evaluation


class TestEvaluation(unittest.TestCase):
    """Tests for `potholedetector.evaluation` module."""

    def setUp(self):
        """Set up test fixtures, if any."""
        self._gt = DisparityMap(np.array([[10.0, 10.0, 10.0, 10.0],
                                          [20.0, 20.0, 20.0, INVALID_DISPARITY]]))
        self._est = DisparityMap(np.array([[10.5, 12.0, 7.0, INVALID_DISPARITY],
                                           [20.0, 21.0, 24.0, 20.0]]))

    def tearDown(self):
        """Tear down test fixtures, if any."""

    def test_pep(self):
        # errors over the 6 shared pixels: 0.5, 2, 3, 0, 1, 4
        self.assertAlmostEqual(100.0 * 3 / 6, evaluation.pep(self._est, self._gt, 1.0))
        self.assertAlmostEqual(100.0 * 2 / 6, evaluation.pep(self._est, self._gt, 2.0))
        self.assertAlmostEqual(100.0 * 1 / 6, evaluation.pep(self._est, self._gt, 3.0))
        self.assertEqual(0.0, evaluation.pep(self._est, self._gt, 4.0))

    def test_rmse(self):
        expected = math.sqrt((0.25 + 4.0 + 9.0 + 0.0 + 1.0 + 16.0) / 6.0)
        self.assertAlmostEqual(expected, evaluation.rmse(self._est, self._gt))
        self.assertEqual(0.0, evaluation.rmse(self._gt, self._gt))

    def test_disparity_metrics_without_overlap(self):
        empty = DisparityMap(np.full((2, 4), INVALID_DISPARITY))
        for func in (lambda: evaluation.pep(empty, self._gt, 1.0),
                     lambda: evaluation.rmse(empty, self._gt)):
            try:
                func()
                self.fail('Expected Exception')
            except PotholeDetectorError as e:
                self.assertTrue(str(e).startswith('no overlapping valid pixels'))
        try:
            evaluation.rmse(DisparityMap(np.zeros((3, 4))), self._gt)
            self.fail('Expected Exception')
        except DimensionMismatchError:
            pass

    def test_fscore(self):
        self.assertAlmostEqual(0.8942, evaluation.fscore(0.8982, 0.8903), delta=0.0005)
        self.assertEqual(0.0, evaluation.fscore(0.0, 0.0))
        self.assertEqual(1.0, evaluation.fscore(1.0, 1.0))

    def test_pixel_metrics(self):
        pred = LabelMap(np.array([[1, 1, 0, 0],
                                  [0, 2, 0, 0]]))
        gt = LabelMap(np.array([[1, 0, 0, 0],
                                [1, 1, 0, 0]]))
        report = evaluation.pixel_metrics(pred, gt)
        self.assertEqual((2, 1, 1, 4), (report.counts.n_tp, report.counts.n_fp,
                                        report.counts.n_fn, report.counts.n_tn))
        self.assertAlmostEqual(2.0 / 3.0, report.precision)
        self.assertAlmostEqual(2.0 / 3.0, report.recall)
        self.assertAlmostEqual(6.0 / 8.0, report.accuracy)
        self.assertAlmostEqual(2.0 / 3.0, report.fscore)
        self.assertEqual((), report.degenerate)

    def test_pixel_metrics_degenerate(self):
        empty = LabelMap(np.zeros((3, 3), dtype=np.int64))
        report = evaluation.pixel_metrics(empty, empty)
        self.assertEqual(('precision', 'recall', 'fscore'), report.degenerate)
        self.assertEqual(1.0, report.accuracy)
        self.assertEqual(0.0, report.fscore)

        gt = LabelMap(np.ones((3, 3), dtype=np.int64))
        report = evaluation.pixel_metrics(empty, gt)
        self.assertEqual(('precision', 'fscore'), report.degenerate)
        self.assertEqual(0.0, report.recall)

    def test_instance_metrics(self):
        pred = np.zeros((10, 10), dtype=np.int64)
        gt = np.zeros((10, 10), dtype=np.int64)
        # IoU 6 / 10 = 0.6
        gt[0:2, 0:4] = 1
        pred[0:2, 1:4] = 1
        pred[2, 0:2] = 1
        # IoU 2 / 10 = 0.2
        gt[5:7, 0:4] = 2
        pred[5:7, 3:5] = 2
        # no overlap at all
        pred[9, 9] = 3
        report = evaluation.instance_metrics(LabelMap(pred), LabelMap(gt))
        self.assertEqual(1, report.correct)
        self.assertEqual(2, report.incorrect)
        self.assertEqual(1, report.misdetection)

        report = evaluation.instance_metrics(LabelMap(pred), LabelMap(gt), iou_min=0.2)
        self.assertEqual((2, 1, 0), (report.correct, report.incorrect,
                                     report.misdetection))

    def test_instance_metrics_one_to_one(self):
        gt = np.zeros((4, 8), dtype=np.int64)
        gt[:, 0:8] = 1
        pred = np.zeros((4, 8), dtype=np.int64)
        pred[:, 0:5] = 1
        pred[:, 5:8] = 2
        report = evaluation.instance_metrics(LabelMap(pred), LabelMap(gt), iou_min=0.3)
        self.assertEqual((1, 1, 0), (report.correct, report.incorrect,
                                     report.misdetection))

    def test_pep_key(self):
        self.assertEqual('pep_1', evaluation.pep_key(1.0))
        self.assertEqual('pep_2.5', evaluation.pep_key(2.5))

    def test_frame_metrics(self):
        pred = LabelMap(np.array([[1, 0, 0, 0], [0, 0, 0, 0]]))
        gt_mask = LabelMap(np.array([[1, 0, 0, 0], [0, 0, 0, 0]]))
        row = evaluation.frame_metrics(self._est, self._gt, pred, gt_mask,
                                       eps_list=(1.0, 3.0), runtime_ms=12.5)
        self.assertAlmostEqual(50.0, row['pep_1'])
        self.assertAlmostEqual(100.0 / 6.0, row['pep_3'])
        self.assertEqual(1.0, row['fscore'])
        self.assertEqual((1, 0, 0), (row['correct'], row['incorrect'],
                                     row['misdetection']))
        self.assertEqual(12.5, row['runtime_ms'])
        self.assertEqual([], row['degenerate'])

        empty = DisparityMap(np.full((2, 4), INVALID_DISPARITY))
        row = evaluation.frame_metrics(empty, self._gt, pred, gt_mask, eps_list=(1.0,))
        self.assertIsNone(row['pep_1'])
        self.assertIsNone(row['rmse'])
        self.assertEqual(1.0, row['precision'])
        self.assertIsNone(row['closest_distance'])

    def test_frame_metrics_closest_distance(self):
        pred = LabelMap(np.array([[1, 0, 0, 0], [0, 0, 0, 0]]))
        truth = PointCloud(np.array([[0.0, 0.0, 1.0], [1.0, 0.0, 1.0]]))
        shifted = PointCloud(truth.points + np.array([0.0, 0.0, 0.5]))
        row = evaluation.frame_metrics(self._est, self._gt, pred, pred, eps_list=(1.0,),
                                       est_cloud=shifted, gt_cloud=truth)
        self.assertAlmostEqual(0.5, row['closest_distance'])

        empty = PointCloud(np.zeros((0, 3)))
        row = evaluation.frame_metrics(self._est, self._gt, pred, pred, eps_list=(1.0,),
                                       est_cloud=empty, gt_cloud=truth)
        self.assertIsNone(row['closest_distance'])

        rows = [dict(row), dict(row)]
        rows[0]['closest_distance'] = 0.25
        self.assertAlmostEqual(0.25, evaluation.aggregate_metrics(rows)['closest_distance'])

    def test_aggregate_metrics(self):
        rows = [{'frame': 'a', 'pep_1': 10.0, 'rmse': None, 'fscore': 0.5,
                 'correct': 2, 'incorrect': 1, 'misdetection': 0, 'degenerate': []},
                {'frame': 'b', 'pep_1': 20.0, 'rmse': 2.0, 'fscore': 1.0,
                 'correct': 3, 'incorrect': 0, 'misdetection': 1,
                 'degenerate': ['precision']}]
        aggregate = evaluation.aggregate_metrics(rows)
        self.assertAlmostEqual(15.0, aggregate['pep_1'])
        self.assertAlmostEqual(2.0, aggregate['rmse'])
        self.assertAlmostEqual(0.75, aggregate['fscore'])
        self.assertEqual(5, aggregate['correct'])
        self.assertEqual(1, aggregate['incorrect'])
        self.assertEqual(1, aggregate['misdetection'])
        self.assertEqual(2, aggregate['frames'])
        self.assertNotIn('degenerate', aggregate)

        try:
            evaluation.aggregate_metrics([])
            self.fail('Expected Exception')
        except PotholeDetectorError as e:
            self.assertEqual('No frames to aggregate', str(e))
