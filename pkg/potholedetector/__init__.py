# -*- coding: utf-8 -*-

"""Top-level package for potholedetector."""

__author__ = 'Road Inspection team'
__email__ = 'tools@roadinspection.org'
__version__ = '0.1.0'
__repo_url__ = 'https://github.com/roadinspection/potholedetector'
__description__ = 'Detects road potholes from rectified stereo pairs using perspective transformation, semi-global matching, disparity transformation and superpixel thresholding'
