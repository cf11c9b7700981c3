import logging
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from potholedetector.exceptions import PotholeDetectorError
from potholedetector.raster import GrayImage
from potholedetector.raster import DisparityMap
from potholedetector.raster import check_same_shape
from potholedetector.perspective import compute_row_shifts
from potholedetector.perspective import warp_right_image
from potholedetector.perspective import restore_disparity

logger = logging.getLogger(__name__)

EIGHT_DIRECTIONS = ((1, 0), (-1, 0), (0, 1), (0, -1),
                    (1, 1), (-1, -1), (1, -1), (-1, 1))
"""
Scan directions as ``(du, dv)`` offsets, the predecessor of pixel
``p`` along direction ``r`` is ``p - r``
"""

_POPCOUNT_TABLE = np.array([bin(i).count('1') for i in range(256)], dtype=np.uint8)


@dataclass(frozen=True)
class CostVolume:
    """
    Matching costs indexed ``(v, u, d)`` for ``d`` in ``[0, d_max]``
    """
    costs: np.ndarray

    def __post_init__(self):
        costs = np.asarray(self.costs)
        if costs.ndim != 3 or costs.shape[2] < 1:
            raise PotholeDetectorError('Cost volume must be indexed (v, u, d), got shape ' +
                                       str(costs.shape))
        if not np.issubdtype(costs.dtype, np.floating):
            costs = costs.astype(np.float64)
        if not np.all(np.isfinite(costs)) or np.any(costs < 0):
            raise PotholeDetectorError('Cost volume must hold finite costs >= 0')
        costs = costs.view()
        costs.setflags(write=False)
        object.__setattr__(self, 'costs', costs)

    @property
    def height(self):
        return self.costs.shape[0]

    @property
    def width(self):
        return self.costs.shape[1]

    @property
    def d_max(self):
        return self.costs.shape[2] - 1


@dataclass(frozen=True)
class SgmParams:
    """
    Semi-global matching parameters

    :param lambda1: penalty for disparity changes of one pixel
    :param lambda2: penalty for larger disparity changes
    :param directions: scan directions as ``(du, dv)`` integer offsets
    :param census_window: census window size
    """
    lambda1: float = 8.0
    lambda2: float = 32.0
    directions: tuple = EIGHT_DIRECTIONS
    census_window: int = 5

    def __post_init__(self):
        if self.lambda1 < 0 or self.lambda1 > self.lambda2:
            raise PotholeDetectorError('penalties must satisfy 0 <= lambda1 <= lambda2')
        directions = tuple((int(du), int(dv)) for du, dv in self.directions)
        if len(directions) == 0:
            raise PotholeDetectorError('At least one aggregation direction is required')
        if (0, 0) in directions:
            raise PotholeDetectorError('(0, 0) is not a valid aggregation direction')
        if self.census_window not in (3, 5, 7):
            raise PotholeDetectorError('census window must be one of 3, 5, 7')
        object.__setattr__(self, 'directions', directions)

    @classmethod
    def from_config(cls, config):
        """
        :param config: pipeline configuration
        :type config: :py:class:`~potholedetector.config.PipelineConfig`
        :rtype: :py:class:`SgmParams`
        """
        return cls(lambda1=config.lambda1, lambda2=config.lambda2,
                   census_window=config.census_window)


def census_transform(image, window=5):
    """
    Census bit string of every pixel, one bit per window offset (centre
    excluded) set when the neighbour is darker than the centre. Pixels
    near the border see the border replicated

    :param image: grayscale image
    :type image: :py:class:`~potholedetector.raster.GrayImage`
    :param window: odd window size
    :type window: int
    :return: ``uint64`` bit strings
    :rtype: :py:class:`numpy.ndarray`
    """
    half = window // 2
    pixels = image.pixels
    padded = np.pad(pixels, half, mode='edge')
    height, width = pixels.shape
    codes = np.zeros(pixels.shape, dtype=np.uint64)
    bit = 0
    for dv in range(window):
        for du in range(window):
            if dv == half and du == half:
                continue
            neighbour = padded[dv:dv + height, du:du + width]
            codes |= (neighbour < pixels).astype(np.uint64) << np.uint64(bit)
            bit += 1
    return codes


def hamming_distance(first, second):
    """
    Number of differing bits between ``uint64`` arrays

    :rtype: :py:class:`numpy.ndarray`
    """
    xor = np.bitwise_xor(first, second)
    if hasattr(np, 'bitwise_count'):
        return np.bitwise_count(xor).astype(np.uint8)
    as_bytes = np.ascontiguousarray(xor).view(np.uint8).reshape(xor.shape + (8,))
    return _POPCOUNT_TABLE[as_bytes].sum(axis=-1, dtype=np.uint8)


def census_cost_volume(left, right_warped, d_max, window=5):
    """
    Builds the census matching cost volume. ``cost(v, u, d)`` is the
    Hamming distance between the census strings of **left** at
    ``(u, v)`` and **right_warped** at ``(u - d, v)``. Samples falling
    outside the image, or on out of view pixels of either image, get
    the maximum cost ``window * window - 1``

    :param left: left image
    :type left: :py:class:`~potholedetector.raster.GrayImage`
    :param right_warped: right image, usually after perspective transformation
    :type right_warped: :py:class:`~potholedetector.raster.GrayImage`
    :param d_max: largest disparity searched
    :type d_max: int
    :param window: census window, one of 3, 5, 7
    :type window: int
    :raises DimensionMismatchError: if the images differ in size
    :raises PotholeDetectorError: if **d_max** is not smaller than the width
    :rtype: :py:class:`CostVolume`
    """
    check_same_shape(left, right_warped, 'left and right images')
    if window not in (3, 5, 7):
        raise PotholeDetectorError('census window must be one of 3, 5, 7')
    d_max = int(d_max)
    if d_max < 0 or d_max >= left.width:
        raise PotholeDetectorError('d_max (' + str(d_max) + ') must be in [0, width ' +
                                   str(left.width) + ')')
    max_cost = window * window - 1
    left_codes = census_transform(left, window)
    right_codes = census_transform(right_warped, window)
    left_ok = left.in_view
    right_ok = right_warped.in_view
    width = left.width

    costs = np.full((left.height, width, d_max + 1), max_cost, dtype=np.float32)
    for d in range(d_max + 1):
        distance = hamming_distance(left_codes[:, d:], right_codes[:, :width - d])
        usable = left_ok[:, d:] & right_ok[:, :width - d]
        costs[:, d:, d] = np.where(usable, distance, max_cost)
    return CostVolume(costs)


def _path_step(previous, lambda1, lambda2):
    """
    Smoothness term of one scan line step for a ``(N, D)`` block of
    predecessor path costs. The predecessor minimum is subtracted here,
    so the term lies in ``[0, lambda2]`` and an all zero predecessor
    gives ``0``
    """
    floor = previous.min(axis=1, keepdims=True)
    best = previous.copy()
    if previous.shape[1] > 1:
        np.minimum(best[:, 1:], previous[:, :-1] + lambda1, out=best[:, 1:])
        np.minimum(best[:, :-1], previous[:, 1:] + lambda1, out=best[:, :-1])
    np.minimum(best, floor + lambda2, out=best)
    best -= floor
    return best


def _scan_rows(costs, total, offsets, step, lambda1, lambda2):
    """
    Adds to **total** the path costs of every direction ``(du, step)``,
    ``du`` in **offsets**, over a ``(H, W, D)`` array scanned top down.
    All directions advance together one row at a time. Predecessors
    outside the image read zero padding, whose step is ``0``, so those
    pixels keep their raw cost
    """
    height, width, n_disp = costs.shape
    k = len(offsets)
    pad = max(abs(du) for du in offsets)
    # slot v % step holds row v - step, padded by pad columns on both sides
    history = np.zeros((step, k, width + 2 * pad, n_disp), dtype=costs.dtype)
    columns = pad + np.arange(width)[np.newaxis, :] - np.asarray(offsets)[:, np.newaxis]
    lanes = np.arange(k)[:, np.newaxis]
    for v in range(height):
        slot = history[v % step]
        previous = slot[lanes, columns].reshape(k * width, n_disp)
        current = _path_step(previous, lambda1, lambda2).reshape(k, width, n_disp)
        current += costs[v]
        total[v] += current.sum(axis=0)
        slot[:, pad:pad + width] = current


def aggregate_costs(volume, params):
    """
    Semi-global aggregation. For every direction ``r`` the path cost is
    ``L(p, d) = C(p, d) + min(L(p-r, d), L(p-r, d-1) + lambda1,
    L(p-r, d+1) + lambda1, min_i L(p-r, i) + lambda2) - min_i L(p-r, i)``
    and the result is the sum of path costs over all directions. A pixel
    without predecessor along ``r`` keeps its raw cost

    Directions sharing a row offset are scanned together, horizontal
    ones on a transposed copy. Costs are aggregated in single precision

    :param volume: raw matching costs
    :type volume: :py:class:`CostVolume`
    :param params: penalties and directions
    :type params: :py:class:`SgmParams`
    :rtype: :py:class:`CostVolume`
    """
    costs = np.ascontiguousarray(volume.costs, dtype=np.float32)
    total = np.zeros(costs.shape, dtype=np.float32)
    groups = {}
    for du, dv in params.directions:
        if dv == 0:
            groups.setdefault((True, du), []).append(0)
        else:
            groups.setdefault((False, dv), []).append(du)

    swapped = None
    for (transposed, dv), offsets in sorted(groups.items()):
        if transposed:
            if swapped is None:
                swapped = np.ascontiguousarray(costs.transpose(1, 0, 2))
                swapped_total = np.zeros(swapped.shape, dtype=np.float32)
            scan, into = swapped, swapped_total
        else:
            scan, into = costs, total
        if dv < 0:
            scan, into = scan[::-1], into[::-1]
        _scan_rows(scan, into, offsets, abs(dv), params.lambda1, params.lambda2)
    if swapped is not None:
        total += swapped_total.transpose(1, 0, 2)
    return CostVolume(total)


def _winner_takes_all(costs, uniqueness_ratio):
    """
    Refined disparity and validity of every pixel of a ``(H, W, D)``
    array
    """
    n_disp = costs.shape[2]
    best = np.argmin(costs, axis=2)
    best_cost = np.take_along_axis(costs, best[:, :, np.newaxis], axis=2)[:, :, 0]

    # second best outside best-1..best+1
    index = np.arange(n_disp)[np.newaxis, np.newaxis, :]
    near = np.abs(index - best[:, :, np.newaxis]) <= 1
    rival = np.where(near, np.inf, costs).min(axis=2)
    unique = best_cost < rival * (1.0 - uniqueness_ratio)

    interior = (best > 0) & (best < n_disp - 1)
    lower = np.take_along_axis(costs, np.clip(best - 1, 0, n_disp - 1)[:, :, np.newaxis],
                               axis=2)[:, :, 0]
    upper = np.take_along_axis(costs, np.clip(best + 1, 0, n_disp - 1)[:, :, np.newaxis],
                               axis=2)[:, :, 0]
    denom = 2.0 * (lower + upper - 2.0 * best_cost)
    refine = interior & (denom > 0)
    offset = np.zeros(best.shape, dtype=np.float64)
    offset[refine] = (lower[refine] - upper[refine]) / denom[refine]
    offset = np.clip(offset, -0.5, 0.5)
    return best + offset, unique


def select_disparity(aggregated, right_volume=None, lr_threshold=1.0,
                     uniqueness_ratio=0.0):
    """
    Winner takes all disparity with parabola subpixel refinement
    ``d + (C(d-1) - C(d+1)) / (2 (C(d-1) + C(d+1) - 2 C(d)))``, skipped at
    ``0``, at ``d_max`` and when the denominator is not positive.

    A pixel is invalid when another disparity more than one pixel away
    from the winner has a cost within **uniqueness_ratio** of the
    winner (a tie with ratio ``0``). When **right_volume**, the
    aggregated costs of the right view indexed by right view column, is
    given, pixels whose left and right disparities disagree by more than
    **lr_threshold** are invalid too

    :param aggregated: aggregated costs of the left view
    :type aggregated: :py:class:`CostVolume`
    :param right_volume: aggregated costs of the right view or ``None``
    :type right_volume: :py:class:`CostVolume`
    :param lr_threshold: left right tolerance in pixels
    :type lr_threshold: float
    :param uniqueness_ratio: uniqueness margin in ``[0, 1)``
    :type uniqueness_ratio: float
    :rtype: :py:class:`~potholedetector.raster.DisparityMap`
    """
    disparity, valid = _winner_takes_all(np.asarray(aggregated.costs, dtype=np.float64),
                                         uniqueness_ratio)
    if right_volume is not None:
        if right_volume.costs.shape != aggregated.costs.shape:
            raise PotholeDetectorError('Left and right cost volumes differ in shape')
        right_disp, right_valid = _winner_takes_all(
            np.asarray(right_volume.costs, dtype=np.float64), uniqueness_ratio)
        width = aggregated.width
        rows = np.arange(aggregated.height)[:, np.newaxis]
        cols = np.rint(np.arange(width)[np.newaxis, :] - disparity).astype(np.int64)
        inside = (cols >= 0) & (cols < width)
        cols = np.clip(cols, 0, width - 1)
        consistent = (inside & right_valid[rows, cols] &
                      (np.abs(disparity - right_disp[rows, cols]) <= lr_threshold))
        logger.debug(str(int(np.count_nonzero(valid & ~consistent))) +
                     ' pixels failed left right check')
        valid &= consistent
    return DisparityMap.from_array(disparity, valid)


def textured_pixels(image, window=5):
    """
    Flags pixels whose census window holds at least two distinct
    intensities. A flat window yields an all zero census string that
    carries no matching information

    :param image: grayscale image
    :type image: :py:class:`~potholedetector.raster.GrayImage`
    :param window: census window size
    :type window: int
    :rtype: :py:class:`numpy.ndarray`
    """
    upper = ndimage.maximum_filter(image.pixels, size=window, mode='nearest')
    lower = ndimage.minimum_filter(image.pixels, size=window, mode='nearest')
    return upper > lower


def _mirror(image):
    mask = None if image.mask is None else image.mask[:, ::-1]
    return GrayImage(image.pixels[:, ::-1], mask=mask)


def match_pair(left, right, model, config):
    """
    Perspective transformed stereo matching of a rectified pair

    Warps **right** with row shifts from **model**, matches it
    against **left** with census costs and semi-global aggregation,
    checks left right consistency against the mirrored pair, then
    adds the row shifts back

    :param left: left image
    :type left: :py:class:`~potholedetector.raster.GrayImage`
    :param right: right image
    :type right: :py:class:`~potholedetector.raster.GrayImage`
    :param model: road model used for the row shifts
    :type model: :py:class:`~potholedetector.geometry.RoadModel`
    :param config: pipeline configuration
    :type config: :py:class:`~potholedetector.config.PipelineConfig`
    :return: (D0 of the warped pair, D1 of the original pair)
    :rtype: tuple
    """
    check_same_shape(left, right, 'left and right images')
    table = compute_row_shifts(model, left.width, left.height, config.delta_pt)
    warped = warp_right_image(right, table)
    params = SgmParams.from_config(config)

    logger.debug('Matching left view')
    left_volume = aggregate_costs(census_cost_volume(left, warped, config.d_max,
                                                     params.census_window), params)
    logger.debug('Matching right view')
    mirrored = aggregate_costs(census_cost_volume(_mirror(warped), _mirror(left),
                                                  config.d_max, params.census_window),
                               params)
    right_volume = CostVolume(mirrored.costs[:, ::-1, :])

    d0 = select_disparity(left_volume, right_volume=right_volume,
                          lr_threshold=config.lr_threshold,
                          uniqueness_ratio=config.uniqueness_ratio)
    d0 = DisparityMap.from_array(d0.values, d0.valid_mask &
                                 textured_pixels(left, params.census_window))
    logger.info(str(d0.valid_count()) + ' of ' + str(d0.values.size) +
                ' pixels have a valid disparity')
    return d0, restore_disparity(d0, table)
