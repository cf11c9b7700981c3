# -*- coding: utf-8 -*-


class PotholeDetectorError(Exception):
    """
    Base exception for potholedetector
    """
    pass


class RasterFormatError(PotholeDetectorError):
    """
    Raised when a raster file cannot be decoded or encoded
    """
    pass


class DimensionMismatchError(PotholeDetectorError):
    """
    Raised when rasters that must share a shape do not
    """
    pass


class DegenerateFitError(PotholeDetectorError):
    """
    Raised when the road disparity model cannot be fit
    """
    pass


class InsufficientObservationsError(DegenerateFitError):
    """
    Raised when too few valid disparities are available to fit the road
    """
    pass


class ThresholdError(PotholeDetectorError):
    """
    Raised when no histogram vector survives the diagonal band
    """
    pass
