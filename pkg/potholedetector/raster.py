import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from potholedetector.exceptions import RasterFormatError
from potholedetector.exceptions import DimensionMismatchError

logger = logging.getLogger(__name__)

INVALID_DISPARITY = -1.0
"""
Sentinel stored in :py:attr:`DisparityMap.values` for pixels
without a disparity estimate. Every valid disparity is ``>= 0``
"""


def _frozen(arr, dtype):
    """
    Copies **arr** into a read only :py:class:`numpy.ndarray`

    :param arr: array like input
    :param dtype: numpy dtype of the copy
    :return: read only copy
    :rtype: :py:class:`numpy.ndarray`
    """
    out = np.array(arr, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


def check_same_shape(first, second, what='rasters'):
    """
    Raises :py:class:`~potholedetector.exceptions.DimensionMismatchError`
    if **first** and **second** differ in width or height

    :param first: raster with ``width`` and ``height`` attributes
    :param second: raster with ``width`` and ``height`` attributes
    :param what: description used in the error message
    :type what: str
    """
    if first.width != second.width or first.height != second.height:
        raise DimensionMismatchError('Dimension mismatch between ' + what + ': ' +
                                     str(first.width) + 'x' + str(first.height) +
                                     ' vs ' + str(second.width) + 'x' +
                                     str(second.height))


@dataclass(frozen=True)
class GrayImage:
    """
    Grayscale intensity raster with intensities in ``[0, 255]``

    **mask**, when set, flags the pixels that carry real image content.
    Pixels outside the mask (for example samples that fell beyond the
    right border during the perspective transformation) hold ``0``.
    """
    pixels: np.ndarray
    mask: Optional[np.ndarray] = None

    def __post_init__(self):
        pixels = np.asarray(self.pixels)
        if pixels.ndim != 2:
            raise RasterFormatError('Image must be two dimensional, got shape ' +
                                    str(pixels.shape))
        if pixels.shape[0] < 2 or pixels.shape[1] < 2:
            raise RasterFormatError('image too small: ' + str(pixels.shape[1]) +
                                    'x' + str(pixels.shape[0]))
        object.__setattr__(self, 'pixels', _frozen(pixels, np.float64))
        if self.mask is not None:
            mask = np.asarray(self.mask, dtype=bool)
            if mask.shape != pixels.shape:
                raise DimensionMismatchError('Image mask shape ' + str(mask.shape) +
                                             ' does not match image shape ' +
                                             str(pixels.shape))
            object.__setattr__(self, 'mask', _frozen(mask, bool))

    @property
    def width(self):
        return self.pixels.shape[1]

    @property
    def height(self):
        return self.pixels.shape[0]

    @property
    def in_view(self):
        """
        Boolean raster, ``True`` where the pixel holds image content

        :rtype: :py:class:`numpy.ndarray`
        """
        if self.mask is None:
            return np.ones(self.pixels.shape, dtype=bool)
        return self.mask


@dataclass(frozen=True)
class DisparityMap:
    """
    Dense disparity raster in pixels. Pixels without an estimate hold
    :py:const:`INVALID_DISPARITY`
    """
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise RasterFormatError('Disparity map must be two dimensional, got shape ' +
                                    str(values.shape))
        if not np.all(np.isfinite(values)):
            raise RasterFormatError('Disparity map contains non finite values')
        bad = (values < 0) & (values != INVALID_DISPARITY)
        if np.any(bad):
            raise RasterFormatError(str(int(bad.sum())) +
                                    ' negative disparities found')
        object.__setattr__(self, 'values', _frozen(values, np.float64))

    @classmethod
    def from_array(cls, values, valid=None):
        """
        Builds a map from a float array, marking pixels where **valid**
        is ``False`` (or the value is not finite) as invalid

        :param values: disparities
        :type values: :py:class:`numpy.ndarray`
        :param valid: optional boolean raster of valid pixels
        :type valid: :py:class:`numpy.ndarray`
        :rtype: :py:class:`DisparityMap`
        """
        out = np.array(values, dtype=np.float64, copy=True)
        keep = np.isfinite(out)
        if valid is not None:
            keep &= np.asarray(valid, dtype=bool)
        out[~keep] = INVALID_DISPARITY
        return cls(out)

    @property
    def width(self):
        return self.values.shape[1]

    @property
    def height(self):
        return self.values.shape[0]

    @property
    def valid_mask(self):
        """
        Boolean raster, ``True`` where a disparity estimate exists

        :rtype: :py:class:`numpy.ndarray`
        """
        return self.values != INVALID_DISPARITY

    def valid_count(self):
        return int(np.count_nonzero(self.valid_mask))


@dataclass(frozen=True)
class LabelMap:
    """
    Integer label raster, ``0`` is background
    """
    labels: np.ndarray

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.ndim != 2:
            raise RasterFormatError('Label map must be two dimensional, got shape ' +
                                    str(labels.shape))
        if labels.size > 0 and labels.min() < 0:
            raise RasterFormatError('Label map contains negative labels')
        object.__setattr__(self, 'labels', _frozen(labels, np.int64))

    @property
    def width(self):
        return self.labels.shape[1]

    @property
    def height(self):
        return self.labels.shape[0]

    @property
    def count(self):
        """
        Number of distinct nonzero labels
        """
        ids = np.unique(self.labels)
        return int(np.count_nonzero(ids))

    def mask(self):
        """
        :return: boolean raster, ``True`` for nonzero labels
        :rtype: :py:class:`numpy.ndarray`
        """
        return self.labels != 0
