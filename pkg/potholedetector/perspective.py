import math
import logging
from dataclasses import dataclass

import numpy as np

from potholedetector.exceptions import DimensionMismatchError
from potholedetector.raster import GrayImage
from potholedetector.raster import DisparityMap
from potholedetector.raster import INVALID_DISPARITY

logger = logging.getLogger(__name__)


def road_disparity_at(model, u, v):
    """
    Road disparity projection ``a0 + a1 * (v * cos(phi) - u * sin(phi))``

    :param model: road model
    :type model: :py:class:`~potholedetector.geometry.RoadModel`
    :param u: column(s), scalar or :py:class:`numpy.ndarray`
    :param v: row(s), scalar or :py:class:`numpy.ndarray`
    :return: road disparity at ``(u, v)``
    """
    return model.a0 + model.a1 * (v * math.cos(model.phi) - u * math.sin(model.phi))


@dataclass(frozen=True)
class RowShiftTable:
    """
    Per row horizontal shift applied to the right image, one
    entry per image row
    """
    shifts: np.ndarray
    delta_pt: float

    def __post_init__(self):
        shifts = np.array(self.shifts, dtype=np.float64, copy=True)
        if shifts.ndim != 1 or not np.all(np.isfinite(shifts)):
            raise ValueError('shifts must be a finite one dimensional array')
        shifts.setflags(write=False)
        object.__setattr__(self, 'shifts', shifts)

    @property
    def height(self):
        return self.shifts.shape[0]


def compute_row_shifts(model, width, height, delta_pt):
    """
    Computes the shift of every row as the minimum of the road disparity
    over the row minus **delta_pt**. The projection is affine in the
    column so the minimum is taken at column ``0`` or column **width**.
    Shifts are clamped below at ``0``

    :param model: road model
    :type model: :py:class:`~potholedetector.geometry.RoadModel`
    :param width: image width in pixels
    :type width: int
    :param height: image height in pixels
    :type height: int
    :param delta_pt: margin kept between the road and the shifted image
    :type delta_pt: float
    :rtype: :py:class:`RowShiftTable`
    """
    if width < 2:
        raise ValueError('width must be >= 2, got ' + str(width))
    v = np.arange(height, dtype=np.float64)
    left_end = road_disparity_at(model, 0.0, v)
    right_end = road_disparity_at(model, float(width), v)
    shifts = np.maximum(np.minimum(left_end, right_end) - delta_pt, 0.0)
    logger.debug('Row shifts range from ' + str(shifts.min()) + ' to ' + str(shifts.max()))
    return RowShiftTable(shifts=shifts, delta_pt=float(delta_pt))


def warp_right_image(right, table):
    """
    Moves the content of every row ``v`` of **right** by ``shifts[v]``
    pixels towards the matching left view position,
    ``out(u, v) = right(u - shifts[v], v)`` with linear interpolation,
    so a left pixel of disparity ``d`` against **right** has disparity
    ``d - shifts[v]`` against the output. Samples before the left border
    are ``0`` and flagged out of view in the returned image mask

    :param right: right image
    :type right: :py:class:`~potholedetector.raster.GrayImage`
    :param table: row shifts
    :type table: :py:class:`RowShiftTable`
    :raises DimensionMismatchError: if table length differs from image height
    :rtype: :py:class:`~potholedetector.raster.GrayImage`
    """
    if table.height != right.height:
        raise DimensionMismatchError('Shift table has ' + str(table.height) +
                                     ' rows but image has ' + str(right.height))
    width = right.width
    rows = np.arange(right.height)[:, np.newaxis]
    x = np.arange(width, dtype=np.float64)[np.newaxis, :] - table.shifts[:, np.newaxis]
    out_of_view = (x < 0) | (x > width - 1)
    x = np.clip(x, 0.0, width - 1)
    i0 = np.floor(x).astype(np.int64)
    frac = x - i0
    i1 = np.minimum(i0 + 1, width - 1)
    src = right.pixels
    warped = (1.0 - frac) * src[rows, i0] + frac * src[rows, i1]

    if right.mask is not None:
        out_of_view |= ~right.mask[rows, i0]
        out_of_view |= (frac > 0) & ~right.mask[rows, i1]
    warped[out_of_view] = 0.0
    return GrayImage(warped, mask=~out_of_view)


def restore_disparity(d0, table):
    """
    Maps disparities of the left / warped right pair back to the
    original pair, ``D1 = D0 + shifts[v]``. Invalid pixels stay invalid

    :param d0: disparity map of left and warped right image
    :type d0: :py:class:`~potholedetector.raster.DisparityMap`
    :param table: row shifts used for the warp
    :type table: :py:class:`RowShiftTable`
    :raises DimensionMismatchError: if table length differs from map height
    :rtype: :py:class:`~potholedetector.raster.DisparityMap`
    """
    if table.height != d0.height:
        raise DimensionMismatchError('Shift table has ' + str(table.height) +
                                     ' rows but disparity map has ' + str(d0.height))
    valid = d0.valid_mask
    values = d0.values + table.shifts[:, np.newaxis]
    values[~valid] = INVALID_DISPARITY
    return DisparityMap(values)
