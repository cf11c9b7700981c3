#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""Tests for `potholedetector` package."""

import os
import argparse
import tempfile
import shutil

import unittest

import numpy as np

import potholedetector
from potholedetector.config import PipelineConfig
from potholedetector.raster import GrayImage
from potholedetector import fileio
from potholedetector import synth
from potholedetector import potholedetectorcmd
from potholedetector.runner import EvaluationRunner
from potholedetector.runner import BenchmarkRunner
from potholedetector.runner import DeltaPdTuner


class TestPotholeDetectorCmd(unittest.TestCase):
    """Tests for `potholedetector` package."""

    def setUp(self):
        """Set up test fixtures, if any."""

    def tearDown(self):
        """Tear down test fixtures, if any."""

    def test_eps_list(self):
        self.assertEqual([1.0, 2.5], potholedetectorcmd._eps_list('1,2.5'))
        for value in ('1,x', ','):
            try:
                potholedetectorcmd._eps_list(value)
                self.fail('Expected Exception')
            except argparse.ArgumentTypeError:
                pass

    def test_parse_arguments(self):
        """Tests parse arguments"""

        res = potholedetectorcmd._parse_arguments('hi', ['detect', 'l.png', 'r.png',
                                                         '--out', 'foo'])
        self.assertEqual('detect', res.command)
        self.assertEqual(res.verbose, 1)
        self.assertEqual(res.logconf, None)
        self.assertIsNone(res.delta_pd)
        self.assertFalse(res.skip_logging)

        someargs = ['detect', 'l.png', 'r.png', '--out', 'foo', '-vv', '--logconf',
                    'hi', '--delta_pd', '3.5', '--d_max', '64']
        res = potholedetectorcmd._parse_arguments('hi', someargs)

        self.assertEqual(res.verbose, 3)
        self.assertEqual(res.out, 'foo')
        self.assertEqual(res.left, 'l.png')
        self.assertEqual(res.right, 'r.png')
        self.assertEqual(res.logconf, 'hi')
        self.assertEqual(3.5, res.delta_pd)
        self.assertEqual(64, res.d_max)

    def test_parse_arguments_other_commands(self):
        res = potholedetectorcmd._parse_arguments('hi', ['eval', 'p', 'g'])
        self.assertEqual([1.0, 2.0, 3.0], res.eps)
        self.assertEqual(0.5, res.iou_min)
        self.assertIsNone(res.out)

        res = potholedetectorcmd._parse_arguments('hi', ['synth', '--out', 'x'])
        self.assertEqual((1, 0), (res.count, res.seed))

        res = potholedetectorcmd._parse_arguments('hi', ['bench', 'd', '--out', 'x',
                                                         '--eps', '0.5,1',
                                                         '--workers', '3'])
        self.assertEqual([0.5, 1.0], res.eps)
        self.assertEqual(3, res.workers)

        res = potholedetectorcmd._parse_arguments('hi', ['tune', 'd', '--out', 'x'])
        self.assertEqual((0.2, 3.0, 0.02), (res.delta_min, res.delta_max,
                                            res.delta_step))
        self.assertEqual((DeltaPdTuner.DELTA_MIN, DeltaPdTuner.DELTA_MAX),
                         (res.delta_min, res.delta_max))

    def test_load_config(self):
        temp_dir = tempfile.mkdtemp()
        try:
            res = potholedetectorcmd._parse_arguments('hi', ['detect', 'l', 'r',
                                                             '--out', 'o',
                                                             '--delta_pd', '3.0'])
            config = potholedetectorcmd._load_config(res)
            self.assertEqual(3.0, config.delta_pd)
            self.assertEqual(32, config.d_max)

            config_file = os.path.join(temp_dir, 'pipeline.cfg')
            with open(config_file, 'w') as f:
                f.write('d_max=48\ndelta_pd=2.0\n')
            res = potholedetectorcmd._parse_arguments('hi', ['detect', 'l', 'r',
                                                             '--out', 'o',
                                                             '--config', config_file,
                                                             '--delta_pd', '3.0'])
            config = potholedetectorcmd._load_config(res)
            self.assertEqual(3.0, config.delta_pd)
            self.assertEqual(48, config.d_max)
        finally:
            shutil.rmtree(temp_dir)

    def test_get_runner(self):
        res = potholedetectorcmd._parse_arguments('hi', ['eval', 'p', 'g'])
        self.assertTrue(isinstance(potholedetectorcmd._get_runner(res), EvaluationRunner))
        res = potholedetectorcmd._parse_arguments('hi', ['bench', 'd', '--out', 'x'])
        self.assertTrue(isinstance(potholedetectorcmd._get_runner(res), BenchmarkRunner))
        res = potholedetectorcmd._parse_arguments('hi', ['tune', 'd', '--out', 'x'])
        self.assertTrue(isinstance(potholedetectorcmd._get_runner(res), DeltaPdTuner))

    def test_get_runner_eval_config(self):
        temp_dir = tempfile.mkdtemp()
        try:
            config_file = os.path.join(temp_dir, 'pipeline.cfg')
            with open(config_file, 'w') as f:
                f.write('focal=500.0\nbaseline=0.3\n')
            res = potholedetectorcmd._parse_arguments('hi', ['eval', 'p', 'g',
                                                             '--config', config_file])
            self.assertEqual(config_file, res.config)
            myobj = potholedetectorcmd._get_runner(res)
            self.assertEqual((500.0, 0.3), (myobj._config.focal, myobj._config.baseline))

            res = potholedetectorcmd._parse_arguments('hi', ['eval', 'p', 'g'])
            self.assertIsNone(res.config)
            self.assertEqual(PipelineConfig().focal,
                             potholedetectorcmd._get_runner(res)._config.focal)
        finally:
            shutil.rmtree(temp_dir)

    def test_package_metadata(self):
        self.assertTrue(len(potholedetector.__version__) > 0)
        self.assertTrue(len(potholedetector.__description__) > 0)
        self.assertFalse(hasattr(potholedetector, '__computation_name__'))

    def test_main_usage_errors(self):
        self.assertEqual(1, potholedetectorcmd.main(['myprog.py']))
        self.assertEqual(1, potholedetectorcmd.main(['myprog.py', 'detect']))
        self.assertEqual(1, potholedetectorcmd.main(['myprog.py', 'eval', 'p', 'g',
                                                     '--eps', 'x']))
        self.assertEqual(0, potholedetectorcmd.main(['myprog.py', '--version']))

    def test_main_missing_image(self):
        temp_dir = tempfile.mkdtemp()
        try:
            res = potholedetectorcmd.main(['myprog.py', 'detect',
                                           os.path.join(temp_dir, 'left.png'),
                                           os.path.join(temp_dir, 'right.png'),
                                           '--out', os.path.join(temp_dir, 'out'),
                                           '--skip_logging'])
            self.assertEqual(1, res)
        finally:
            shutil.rmtree(temp_dir)

    def test_main_degenerate_fit(self):
        temp_dir = tempfile.mkdtemp()
        try:
            flat = GrayImage(np.full((60, 80), 128.0))
            left = os.path.join(temp_dir, 'left.png')
            right = os.path.join(temp_dir, 'right.png')
            fileio.save_gray_image(flat, left)
            fileio.save_gray_image(flat, right)
            res = potholedetectorcmd.main(['myprog.py', 'detect', left, right,
                                           '--out', os.path.join(temp_dir, 'out'),
                                           '--skip_logging'])
            self.assertEqual(2, res)
        finally:
            shutil.rmtree(temp_dir)

    def test_main_synth(self):
        temp_dir = tempfile.mkdtemp()
        try:
            out_dir = os.path.join(temp_dir, 'scenes')
            self.assertEqual(1, potholedetectorcmd.main(['myprog.py', 'synth',
                                                         '--out', out_dir,
                                                         '--count', '0',
                                                         '--skip_logging']))
            self.assertEqual(0, potholedetectorcmd.main(['myprog.py', 'synth',
                                                         '--out', out_dir,
                                                         '--seed', '3',
                                                         '--skip_logging']))
            spec = synth.read_scene(os.path.join(out_dir, 'scene_0000')).spec
            self.assertEqual(3, spec.seed)
            self.assertTrue(os.path.isfile(os.path.join(out_dir, 'README.txt')))
        finally:
            shutil.rmtree(temp_dir)

    def test_main_eval_without_ground_truth(self):
        temp_dir = tempfile.mkdtemp()
        try:
            res = potholedetectorcmd.main(['myprog.py', 'eval', temp_dir, temp_dir])
            self.assertEqual(1, res)
        finally:
            shutil.rmtree(temp_dir)
