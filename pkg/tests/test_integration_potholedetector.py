#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""Integration Tests for `potholedetector` package."""

import os
import json
import tempfile
import shutil
import unittest

import numpy as np
import pandas as pd

from potholedetector.raster import LabelMap
from potholedetector import fileio
from potholedetector import synth
from potholedetector import evaluation
from potholedetector import potholedetectorcmd
from potholedetector import runner

SKIP_REASON = 'POTHOLEDETECTOR_INTEGRATION_TEST ' \
              'environment variable not set, cannot run integration ' \
              'tests'


@unittest.skipUnless(os.getenv('POTHOLEDETECTOR_INTEGRATION_TEST') is not None, SKIP_REASON)
class TestIntegrationPotholeDetector(unittest.TestCase):
    """Tests for `potholedetector` package."""

    def setUp(self):
        """Set up test fixtures, if any."""

    def tearDown(self):
        """Tear down test fixtures, if any."""

    def test_synth_bench_and_tune(self):
        temp_dir = tempfile.mkdtemp()
        try:
            scenes = os.path.join(temp_dir, 'scenes')
            res = potholedetectorcmd.main(['myprog', 'synth', '--out', scenes,
                                           '--count', '3', '--seed', '100'])
            self.assertEqual(0, res)

            bench = os.path.join(temp_dir, 'bench')
            res = potholedetectorcmd.main(['myprog', 'bench', scenes, '--out', bench,
                                           '--workers', '1'])
            self.assertEqual(0, res)
            with open(os.path.join(bench, 'benchmark.json'), 'r') as f:
                summary = json.loads(f.readline())
            aggregate = summary['aggregate']
            self.assertEqual(3, aggregate['frames'])
            self.assertGreaterEqual(aggregate['accuracy'], 0.98)
            self.assertLess(aggregate['pep_3'], 10.0)
            self.assertGreaterEqual(aggregate['correct'], 1)
            self.assertTrue(os.path.isfile(os.path.join(bench, 'output.log')))

            tune = os.path.join(temp_dir, 'tune')
            res = potholedetectorcmd.main(['myprog', 'tune', scenes, '--out', tune,
                                           '--delta_min', '0.2', '--delta_max', '1.0',
                                           '--delta_step', '0.2'])
            self.assertEqual(0, res)
            table = pd.read_csv(os.path.join(tune, runner.TUNE_TABLE))
            self.assertEqual([0.2, 0.4, 0.6, 0.8, 1.0], table['delta_pd'].tolist())
            self.assertTrue(table['accuracy'].between(0.0, 1.0).all())
        finally:
            shutil.rmtree(temp_dir)

    def test_default_pipeline_on_synthetic_batch(self):
        temp_dir = tempfile.mkdtemp()
        try:
            scenes = os.path.join(temp_dir, 'scenes')
            res = potholedetectorcmd.main(['myprog', 'synth', '--out', scenes,
                                           '--count', '20', '--seed', '2024'])
            self.assertEqual(0, res)

            bench = os.path.join(temp_dir, 'bench')
            res = potholedetectorcmd.main(['myprog', 'bench', scenes, '--out', bench])
            self.assertEqual(0, res)
            with open(os.path.join(bench, 'benchmark.json'), 'r') as f:
                summary = json.loads(f.readline())
            self.assertEqual([], summary['degenerate_frames'])
            aggregate = summary['aggregate']
            self.assertEqual(20, aggregate['frames'])
            self.assertGreaterEqual(aggregate['accuracy'], 0.99)
            self.assertGreaterEqual(aggregate['fscore'], 0.85)
            detected = aggregate['correct'] + aggregate['incorrect']
            self.assertGreater(detected, 0)
            self.assertGreaterEqual(aggregate['correct'] / detected, 0.90)
            self.assertLessEqual(aggregate['runtime_ms'], 5000.0)
            self.assertIsNotNone(aggregate['closest_distance'])

            # every pothole at least 2 pixels deep is found
            for name in runner.list_scene_dirs(scenes):
                truth = synth.read_scene(os.path.join(scenes, name))
                deep = [i for i, p in enumerate(truth.spec.potholes, start=1)
                        if p.depth >= 2.0]
                gt = truth.gt_mask.labels
                deep_mask = LabelMap(np.where(np.isin(gt, deep), gt, 0))
                pred = fileio.load_labels(os.path.join(bench, name, runner.LABELS_FILE))
                report = evaluation.instance_metrics(pred, deep_mask)
                self.assertEqual(0, report.misdetection, name)
        finally:
            shutil.rmtree(temp_dir)
