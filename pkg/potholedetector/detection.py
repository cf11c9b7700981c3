import math
import logging
import dataclasses
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from potholedetector.exceptions import ThresholdError
from potholedetector.raster import DisparityMap
from potholedetector.raster import LabelMap
from potholedetector.raster import INVALID_DISPARITY
from potholedetector.raster import check_same_shape

logger = logging.getLogger(__name__)

MAD_SCALE = 1.4826

MIN_RING_PIXELS = 20
"""
Fewest road pixels around a seed needed to measure its local road level
"""


@dataclass(frozen=True)
class Histogram2D:
    """
    Counts of ``(g1, g2)`` vectors where ``g1`` is the transformed
    disparity of a pixel and ``g2`` the mean of its eight neighbours.
    Both axes share **origin**, the smallest value binned, and bin
    index ``k`` covers ``[origin + k * bin_width, origin + (k + 1) * bin_width)``.
    Cell ``(i, j)`` of **counts** holds the vectors whose bin indices are
    ``(i + offset1, j + offset2)`` and the same cell of **sums** the sum
    of their diagonal values ``(g1 + g2) / 2``
    """
    counts: np.ndarray
    bin_width: float
    offset1: int
    offset2: int
    origin: float = 0.0
    sums: np.ndarray = None

    @property
    def total(self):
        return int(self.counts.sum())

    def occupied(self):
        """
        :return: (g1 bin indices, g2 bin indices, counts) of non empty bins
        :rtype: tuple
        """
        i, j = np.nonzero(self.counts)
        return i + self.offset1, j + self.offset2, self.counts[i, j]

    def diagonal_sums(self):
        """
        Sum of the diagonal values of each non empty bin, in the order of
        :py:meth:`occupied`. Without **sums** every vector is placed at
        its bin centre

        :rtype: :py:class:`numpy.ndarray`
        """
        i, j = np.nonzero(self.counts)
        if self.sums is not None:
            return self.sums[i, j].astype(np.float64)
        centre = self.origin + (i + j + self.offset1 + self.offset2 + 1) * self.bin_width / 2.0
        return centre * self.counts[i, j]


@dataclass(frozen=True)
class ThresholdResult:
    """
    Road and pothole threshold. **mu1** is the mean of the low (pothole)
    cluster, **mu2** of the road cluster. **degenerate** is set when only
    one cluster could be formed
    """
    t_r: float
    t_s: float
    mu1: float
    mu2: float
    excluded_fraction: float
    degenerate: bool = False


def _empty_histogram(bin_width):
    return Histogram2D(np.zeros((0, 0), dtype=np.int64), float(bin_width), 0, 0,
                       sums=np.zeros((0, 0), dtype=np.float64))


def build_histogram(d2, bin_width=0.25):
    """
    Bins ``(D2(p), mean of D2 over the 8 neighbours of p)`` for every
    pixel whose 3x3 neighbourhood is inside the image and fully valid.
    Bins start at the smallest binned value so adding a constant to
    **d2** moves the origin and leaves the counts unchanged

    :param d2: transformed disparity map
    :type d2: :py:class:`~potholedetector.raster.DisparityMap`
    :param bin_width: bin width in pixels of disparity
    :type bin_width: float
    :rtype: :py:class:`Histogram2D`
    """
    if not bin_width > 0:
        raise ValueError('bin_width must be > 0')
    values = d2.values
    valid = d2.valid_mask
    height, width = values.shape
    if height < 3 or width < 3:
        return _empty_histogram(bin_width)

    centre = values[1:-1, 1:-1]
    neighbour_sum = np.zeros(centre.shape, dtype=np.float64)
    usable = valid[1:-1, 1:-1].copy()
    for dv in (-1, 0, 1):
        for du in (-1, 0, 1):
            if dv == 0 and du == 0:
                continue
            window = (slice(1 + dv, height - 1 + dv), slice(1 + du, width - 1 + du))
            neighbour_sum += values[window]
            usable &= valid[window]

    v1 = centre[usable].astype(np.float64)
    v2 = neighbour_sum[usable] / 8.0
    if v1.size == 0:
        return _empty_histogram(bin_width)
    origin = float(min(v1.min(), v2.min()))
    g1 = np.floor((v1 - origin) / bin_width).astype(np.int64)
    g2 = np.floor((v2 - origin) / bin_width).astype(np.int64)
    offset1, offset2 = int(g1.min()), int(g2.min())
    shape = (int(g1.max()) - offset1 + 1, int(g2.max()) - offset2 + 1)
    counts = np.zeros(shape, dtype=np.int64)
    sums = np.zeros(shape, dtype=np.float64)
    cells = (g1 - offset1, g2 - offset2)
    np.add.at(counts, cells, 1)
    np.add.at(sums, cells, (v1 + v2) / 2.0)
    return Histogram2D(counts, float(bin_width), offset1, offset2, origin=origin, sums=sums)


def two_means_split(positions, weights):
    """
    Exact weighted 2-means of sorted distinct 1-D **positions**, found by
    trying every contiguous split

    :param positions: sorted distinct values
    :type positions: :py:class:`numpy.ndarray`
    :param weights: positive weight of each position
    :type weights: :py:class:`numpy.ndarray`
    :return: (index of first high position, low mean, high mean)
    :rtype: tuple
    """
    positions = np.asarray(positions, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    w_low = np.cumsum(weights)[:-1]
    s_low = np.cumsum(weights * positions)[:-1]
    w_high = weights.sum() - w_low
    s_high = (weights * positions).sum() - s_low
    # within cluster squared error minus the constant sum of w * x^2
    cost = -(s_low ** 2 / w_low) - (s_high ** 2 / w_high)
    split = int(np.argmin(cost)) + 1
    return split, s_low[split - 1] / w_low[split - 1], s_high[split - 1] / w_high[split - 1]


def find_road_threshold(hist, delta_pd=2.36, band=3.0):
    """
    Finds road threshold ``t_r`` and pothole threshold
    ``t_s = t_r - delta_pd``. Vectors with ``|g1 - g2| > band`` are
    noise or discontinuities and are dropped, the others are projected
    on the principal diagonal at ``(g1 + g2) / 2`` and split in two
    clusters. ``t_r`` is the mean of the high (road) cluster, taken
    over the diagonal values of its members rather than bin centres

    :param hist: histogram from :py:func:`build_histogram`
    :type hist: :py:class:`Histogram2D`
    :param delta_pd: pothole tolerance in pixels
    :type delta_pd: float
    :param band: largest ``|g1 - g2|`` kept
    :type band: float
    :raises ThresholdError: if no vector lies within the band
    :rtype: :py:class:`ThresholdResult`
    """
    i1, i2, counts = hist.occupied()
    total = int(counts.sum())
    keep = np.abs(i1 - i2) * hist.bin_width <= band
    if total == 0 or not np.any(keep):
        raise ThresholdError('all vectors excluded, no histogram mass within ' +
                             str(band) + ' of the diagonal')
    excluded_fraction = 1.0 - counts[keep].sum() / total

    # diagonal position in half bins keeps the split search in integers
    diagonal, inverse = np.unique(i1[keep] + i2[keep], return_inverse=True)
    weights = np.bincount(inverse, weights=counts[keep])
    sums = np.bincount(inverse, weights=hist.diagonal_sums()[keep])

    if diagonal.shape[0] < 2:
        mean = float(sums.sum() / weights.sum())
        logger.warning('Single cluster along the histogram diagonal, road threshold '
                       'set to the global mean ' + str(mean))
        return ThresholdResult(t_r=mean, t_s=mean - delta_pd, mu1=mean, mu2=mean,
                               excluded_fraction=float(excluded_fraction),
                               degenerate=True)

    split, _, _ = two_means_split(diagonal, weights)
    mu1 = float(sums[:split].sum() / weights[:split].sum())
    mu2 = float(sums[split:].sum() / weights[split:].sum())
    logger.debug('Diagonal clusters at ' + str(mu1) + ' and ' + str(mu2) +
                 ', excluded fraction ' + str(excluded_fraction))
    return ThresholdResult(t_r=mu2, t_s=mu2 - delta_pd, mu1=mu1, mu2=mu2,
                           excluded_fraction=float(excluded_fraction))


def _structure(connectivity):
    if connectivity == 8:
        return np.ones((3, 3), dtype=bool)
    if connectivity == 4:
        return ndimage.generate_binary_structure(2, 1)
    raise ValueError('connectivity must be 4 or 8, got ' + str(connectivity))


def connected_components(mask, connectivity=8):
    """
    Labels the connected components of **mask**, numbered ``1..n`` in
    the order their first pixel is met in a row major scan

    :param mask: binary raster, nonzero is foreground
    :type mask: :py:class:`numpy.ndarray` or :py:class:`~potholedetector.raster.LabelMap`
    :param connectivity: 4 or 8
    :type connectivity: int
    :rtype: :py:class:`~potholedetector.raster.LabelMap`
    """
    if isinstance(mask, LabelMap):
        mask = mask.labels
    mask = np.asarray(mask) != 0
    labeled, _ = ndimage.label(mask, structure=_structure(connectivity))
    return _relabel(labeled)


def _rejected_components(components, superpixels, border_margin, min_superpixels,
                         min_area):
    """
    :return: boolean per label ``0..n``, ``True`` for components that
             reach the border margin, span too few superpixels or are
             too small. Label ``0`` is always rejected
    """
    n = int(components.max())
    height, width = components.shape
    margin = max(0, int(border_margin))
    rejected = np.zeros(n + 1, dtype=bool)
    if margin > 0:
        edge = np.ones(components.shape, dtype=bool)
        edge[margin:height - margin, margin:width - margin] = False
        rejected[np.unique(components[edge])] = True

    fg = components > 0
    pairs = np.unique(np.column_stack((components[fg], superpixels[fg])), axis=0)
    spanned = np.bincount(pairs[:, 0], minlength=n + 1)
    area = np.bincount(components.ravel(), minlength=n + 1)
    rejected |= spanned < min_superpixels
    rejected |= area < min_area
    rejected[0] = True
    return rejected


def detect_potholes(d3, sp, thr, border_margin=5, min_superpixels=2,
                    connectivity=8, min_area=None):
    """
    Selects the pixels whose pooled value is below ``t_s``, labels the
    connected components and drops those that come within
    **border_margin** pixels of the image border, span fewer than
    **min_superpixels** superpixels or cover fewer than **min_area**
    pixels (default ``S^2`` with ``S`` the superpixel interval).
    Survivors are relabeled ``1..n`` in scan order

    :param d3: pooled transformed disparity map
    :type d3: :py:class:`~potholedetector.raster.DisparityMap`
    :param sp: superpixels used for pooling
    :type sp: :py:class:`~potholedetector.segmentation.SuperpixelMap`
    :param thr: threshold
    :type thr: :py:class:`ThresholdResult`
    :rtype: :py:class:`~potholedetector.raster.LabelMap`
    """
    check_same_shape(d3, sp.labels, 'pooled disparity map and superpixels')
    if min_area is None:
        min_area = sp.spacing * sp.spacing
    mask = d3.valid_mask & (d3.values < thr.t_s)
    components = connected_components(mask, connectivity=connectivity).labels
    n = int(components.max())
    if n == 0:
        return LabelMap(components)

    rejected = _rejected_components(components, sp.labels.labels, border_margin,
                                    min_superpixels, min_area)
    logger.debug(str(n) + ' candidate regions, ' + str(int(rejected[1:].sum())) +
                 ' rejected')
    survivors = np.where(rejected[components], 0, components)
    return _relabel(survivors)


@dataclass(frozen=True)
class PotholeRegion:
    """
    One refined pothole. **road** is the road level found around it,
    pixels below **level** belong to it and **depth** is how far its
    deepest tenth lies below **road**, all in pixels of disparity
    """
    label: int
    road: float
    level: float
    depth: float
    area: int


@dataclass(frozen=True)
class RefinedDetection:
    """
    Pixel accurate pothole labels with one :py:class:`PotholeRegion` per
    label, ordered by label
    """
    labels: LabelMap
    regions: tuple = ()

    def region(self, label):
        for r in self.regions:
            if r.label == label:
                return r
        raise KeyError(label)


def smooth_disparity(d2, window=7):
    """
    Mean of the valid disparities in a **window** x **window**
    neighbourhood. Pixels whose neighbourhood is less than half valid,
    counting pixels outside the image as invalid, become invalid

    :param d2: transformed disparity map
    :type d2: :py:class:`~potholedetector.raster.DisparityMap`
    :param window: odd window size, ``1`` returns **d2** unchanged
    :type window: int
    :rtype: :py:class:`~potholedetector.raster.DisparityMap`
    """
    if window < 1 or window % 2 == 0:
        raise ValueError('window must be a positive odd number, got ' + str(window))
    if window == 1:
        return d2
    valid = d2.valid_mask
    weight = ndimage.uniform_filter(valid.astype(np.float64), size=window,
                                    mode='constant', cval=0.0)
    total = ndimage.uniform_filter(np.where(valid, d2.values, 0.0), size=window,
                                   mode='constant', cval=0.0)
    usable = weight >= 0.5
    out = np.full(d2.values.shape, INVALID_DISPARITY)
    out[usable] = np.maximum(total[usable] / weight[usable], 0.0)
    return DisparityMap(out)


def robust_level(samples):
    """
    :return: (median, scaled median absolute deviation) of **samples**,
             the deviation estimates the standard deviation of normal data
    :rtype: tuple
    """
    samples = np.asarray(samples, dtype=np.float64)
    median = float(np.median(samples))
    return median, MAD_SCALE * float(np.median(np.abs(samples - median)))


def _deepest_first(values, valid, seeds, n):
    lowest = ndimage.minimum(np.where(valid, values, np.inf), labels=seeds,
                             index=np.arange(1, n + 1))
    return [int(x) + 1 for x in np.argsort(np.asarray(lowest), kind='stable')]


def refine_potholes(smoothed, seeds, spacing, road_level, radius=1.5, tolerance=0.15,
                    mad_factor=3.0, connectivity=8):
    """
    Grows every seed region to the pixels of **smoothed** lying below
    the road around it. The road level of a seed is the median of the
    valid, unclaimed pixels between ``radius * spacing`` and
    ``2 * radius * spacing`` away from it, falling back to
    **road_level** when fewer than :py:const:`MIN_RING_PIXELS` remain.
    The seed then claims the connected pixels within ``radius * spacing``
    that touch it and lie more than
    ``max(tolerance, mad_factor * spread)`` below that level, ``spread``
    being the robust deviation of the ring. Seeds are processed deepest
    first and never take pixels claimed before

    :param smoothed: smoothed transformed disparity map
    :type smoothed: :py:class:`~potholedetector.raster.DisparityMap`
    :param seeds: superpixel level pothole candidates
    :type seeds: :py:class:`~potholedetector.raster.LabelMap`
    :param spacing: superpixel interval ``S`` in pixels
    :type spacing: float
    :param road_level: road threshold ``t_r`` of the frame
    :type road_level: float
    :rtype: :py:class:`RefinedDetection`
    """
    check_same_shape(smoothed, seeds, 'smoothed disparity map and seeds')
    seed_labels = seeds.labels
    out = np.zeros(seed_labels.shape, dtype=np.int64)
    n = int(seed_labels.max()) if seed_labels.size else 0
    if n == 0:
        return RefinedDetection(LabelMap(out))

    grow = max(1.0, radius * spacing)
    reach = int(math.ceil(2.0 * grow)) + 1
    values = smoothed.values
    valid = smoothed.valid_mask
    structure = _structure(connectivity)
    height, width = seed_labels.shape
    boxes = ndimage.find_objects(seed_labels)
    regions = []
    for label in _deepest_first(values, valid, seed_labels, n):
        box = boxes[label - 1]
        if box is None:
            continue
        window = (slice(max(0, box[0].start - reach), min(height, box[0].stop + reach)),
                  slice(max(0, box[1].start - reach), min(width, box[1].stop + reach)))
        crop = values[window]
        crop_valid = valid[window]
        seed = seed_labels[window] == label
        free = out[window] == 0
        distance = ndimage.distance_transform_edt(~seed)

        ring = (crop_valid & free & (seed_labels[window] == 0) &
                (distance > grow) & (distance <= 2.0 * grow))
        road, tol = float(road_level), float(tolerance)
        if np.count_nonzero(ring) >= MIN_RING_PIXELS:
            road, spread = robust_level(crop[ring])
            tol = max(tol, mad_factor * spread)
        level = road - tol

        candidate = crop_valid & free & (distance <= grow) & (crop < level)
        parts, _ = ndimage.label(candidate, structure=structure)
        touching = np.unique(parts[seed & candidate])
        region = np.isin(parts, touching[touching != 0])
        if not region.any():
            logger.debug('Seed ' + str(label) + ' has no pixel below level ' + str(level))
            continue
        out[window][region] = label
        depth = road - float(np.percentile(crop[region], 10))
        regions.append(PotholeRegion(label=label, road=road, level=level, depth=depth,
                                     area=int(np.count_nonzero(region))))
    return RefinedDetection(LabelMap(out), tuple(sorted(regions, key=lambda r: r.label)))


def select_regions(refined, sp, border_margin=5, min_superpixels=2, min_area=None,
                   min_depth=1.0):
    """
    Applies the border, superpixel count and area rules of
    :py:func:`detect_potholes` to refined regions, also dropping those
    shallower than **min_depth**. Survivors are relabeled ``1..n`` in
    scan order

    :param refined: refined regions
    :type refined: :py:class:`RefinedDetection`
    :param sp: superpixels of the frame
    :type sp: :py:class:`~potholedetector.segmentation.SuperpixelMap`
    :rtype: :py:class:`RefinedDetection`
    """
    check_same_shape(refined.labels, sp.labels, 'refined labels and superpixels')
    if min_area is None:
        min_area = sp.spacing * sp.spacing
    components = refined.labels.labels
    n = int(components.max()) if components.size else 0
    if n == 0:
        return RefinedDetection(LabelMap(np.zeros_like(components)))

    rejected = _rejected_components(components, sp.labels.labels, border_margin,
                                    min_superpixels, min_area)
    for r in refined.regions:
        if r.depth < min_depth:
            rejected[r.label] = True
    logger.debug(str(len(refined.regions)) + ' refined regions, ' +
                 str(sum(1 for r in refined.regions if rejected[r.label])) +
                 ' rejected')
    survivors = np.where(rejected[components], 0, components)
    mapping = _relabel_mapping(survivors)
    regions = [dataclasses.replace(r, label=int(mapping[r.label]))
               for r in refined.regions if not rejected[r.label]]
    return RefinedDetection(LabelMap(mapping[survivors]),
                            tuple(sorted(regions, key=lambda r: r.label)))


def _relabel_mapping(labels):
    ids, first = np.unique(labels.ravel(), return_index=True)
    keep = ids != 0
    order = np.argsort(first[keep])
    mapping = np.zeros(int(ids.max()) + 1, dtype=np.int64)
    mapping[ids[keep][order]] = np.arange(1, int(keep.sum()) + 1)
    return mapping


def _relabel(labels):
    return LabelMap(_relabel_mapping(labels)[labels])
