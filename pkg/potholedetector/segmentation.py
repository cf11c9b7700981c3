import math
import logging
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from potholedetector.exceptions import PotholeDetectorError
from potholedetector.raster import DisparityMap
from potholedetector.raster import LabelMap
from potholedetector.raster import INVALID_DISPARITY
from potholedetector.raster import check_same_shape

logger = logging.getLogger(__name__)

EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True)
class SuperpixelMap:
    """
    Superpixel partition of a disparity map

    :param labels: labels ``1..count``, every pixel assigned
    :param centers: ``count x 3`` array of (column, row, mean value),
                    row ``k - 1`` describes label ``k``
    :param count: number of superpixels
    :param spacing: grid interval ``S`` used to seed the superpixels
    """
    labels: LabelMap
    centers: np.ndarray
    count: int
    spacing: float

    @property
    def width(self):
        return self.labels.width

    @property
    def height(self):
        return self.labels.height


def _gradient(values):
    """
    Sum of squared forward differences, ``0`` past the last row or column
    """
    grad = np.zeros(values.shape, dtype=np.float64)
    grad[:, :-1] += np.diff(values, axis=1) ** 2
    grad[:-1, :] += np.diff(values, axis=0) ** 2
    return grad


def _seed_centers(values, spacing, nx, ny):
    """
    Regular grid seeds moved to the lowest gradient position of their
    3x3 neighbourhood when it is strictly lower than the seed pixel
    """
    height, width = values.shape
    grad = _gradient(values)
    us = (np.arange(nx) + 0.5) * (width / nx) - 0.5
    vs = (np.arange(ny) + 0.5) * (height / ny) - 0.5
    centers = []
    for cv in vs:
        for cu in us:
            pu = min(width - 1, int(math.floor(cu + 0.5)))
            pv = min(height - 1, int(math.floor(cv + 0.5)))
            v0, v1 = max(0, pv - 1), min(height, pv + 2)
            u0, u1 = max(0, pu - 1), min(width, pu + 2)
            block = grad[v0:v1, u0:u1]
            lowest = np.unravel_index(np.argmin(block), block.shape)
            if block[lowest] < grad[pv, pu]:
                pv, pu = v0 + lowest[0], u0 + lowest[1]
                cu, cv = float(pu), float(pv)
            centers.append((cu, cv, values[pv, pu]))
    return np.asarray(centers, dtype=np.float64)


def _assign(values, centers, spacing, compactness):
    """
    Assigns each pixel to the nearest center among those whose
    ``2S x 2S`` window covers it, ``-1`` where no window does
    """
    height, width = values.shape
    labels = np.full(values.shape, -1, dtype=np.int64)
    distance = np.full(values.shape, np.inf)
    weight = (compactness / spacing) ** 2
    for k, (cu, cv, cval) in enumerate(centers):
        u0 = max(0, int(math.ceil(cu - spacing)))
        u1 = min(width, int(math.floor(cu + spacing)) + 1)
        v0 = max(0, int(math.ceil(cv - spacing)))
        v1 = min(height, int(math.floor(cv + spacing)) + 1)
        if u0 >= u1 or v0 >= v1:
            continue
        vv, uu = np.ogrid[v0:v1, u0:u1]
        d2 = ((values[v0:v1, u0:u1] - cval) ** 2 +
              ((uu - cu) ** 2 + (vv - cv) ** 2) * weight)
        current = distance[v0:v1, u0:u1]
        closer = d2 < current
        current[closer] = d2[closer]
        labels[v0:v1, u0:u1][closer] = k
    return labels


def _update(values, labels, centers):
    """
    Moves every center to the mean position and value of its pixels,
    centers without pixels stay put
    """
    assigned = labels >= 0
    lab = labels[assigned]
    vv, uu = np.nonzero(assigned)
    n = centers.shape[0]
    counts = np.bincount(lab, minlength=n)
    updated = centers.copy()
    has = counts > 0
    for axis, data in enumerate((uu, vv, values[assigned])):
        sums = np.bincount(lab, weights=data, minlength=n)
        updated[has, axis] = sums[has] / counts[has]
    return updated


def _enforce_connectivity(labels, count, min_size):
    """
    Keeps the largest 8-connected fragment of every label, gives other
    fragments of at least **min_size** pixels a new label and merges
    the rest, together with unassigned pixels, into the most frequent
    neighbouring label. Returns labels ``1..n``
    """
    out = labels.copy()
    next_label = count
    objects = ndimage.find_objects(labels + 1)
    for k, window in enumerate(objects):
        if window is None:
            continue
        fragments, n = ndimage.label(labels[window] == k, structure=EIGHT_CONNECTED)
        sizes = np.bincount(fragments.ravel())
        sizes[0] = 0
        largest = int(np.argmax(sizes))
        target = out[window]
        for j in range(1, n + 1):
            if sizes[j] < min_size:
                target[fragments == j] = -1
            elif j != largest:
                target[fragments == j] = next_label
                next_label += 1

    orphans, n_orphans = ndimage.label(out < 0, structure=EIGHT_CONNECTED)
    if n_orphans > 0:
        logger.debug('Merging ' + str(n_orphans) + ' orphan fragments')
    for j, window in enumerate(ndimage.find_objects(orphans), start=1):
        grown = tuple(slice(max(0, s.start - 1), s.stop + 1) for s in window)
        fragment = orphans[grown] == j
        ring = ndimage.binary_dilation(fragment, structure=EIGHT_CONNECTED) & ~fragment
        neighbours = out[grown][ring]
        neighbours = neighbours[neighbours >= 0]
        if neighbours.size == 0:
            out[grown][fragment] = next_label
            next_label += 1
            continue
        out[grown][fragment] = np.argmax(np.bincount(neighbours))

    _, relabeled = np.unique(out, return_inverse=True)
    return relabeled.reshape(labels.shape) + 1


def _final_centers(values, labels, count):
    lab = labels.ravel() - 1
    vv, uu = np.indices(labels.shape)
    counts = np.bincount(lab, minlength=count).astype(np.float64)
    centers = np.empty((count, 3), dtype=np.float64)
    for axis, data in enumerate((uu, vv, values)):
        centers[:, axis] = np.bincount(lab, weights=data.ravel(), minlength=count) / counts
    return centers


def slic(d2, p, compactness=2.0, iterations=10):
    """
    Simple linear iterative clustering of a disparity map

    Seeds ``nx x ny`` centers on a regular grid of interval
    ``S = sqrt(H * W / p)``, moves each seed to the lowest gradient
    pixel of its 3x3 neighbourhood, then alternates assignment and
    center update. A pixel is assigned to the center, among those whose
    ``2S x 2S`` window covers it, minimizing
    ``dv^2 + (ds / S)^2 * m^2`` with ``dv`` the value difference, ``ds``
    the spatial distance and ``m`` the **compactness**. Invalid pixels
    count as value ``0``.

    :param d2: transformed disparity map
    :type d2: :py:class:`~potholedetector.raster.DisparityMap`
    :param p: requested number of superpixels
    :type p: int
    :param compactness: spatial weight ``m``
    :type compactness: float
    :param iterations: update / assignment rounds after the first assignment
    :type iterations: int
    :raises PotholeDetectorError: if **p** is below 4 or exceeds the pixel count
    :rtype: :py:class:`SuperpixelMap`
    """
    height, width = d2.height, d2.width
    if p < 4:
        raise PotholeDetectorError('At least 4 superpixels required, got ' + str(p))
    if p > height * width:
        raise PotholeDetectorError('Requested ' + str(p) + ' superpixels for ' +
                                   str(height * width) + ' pixels')
    values = np.where(d2.valid_mask, d2.values, 0.0)
    spacing = math.sqrt(height * width / p)
    nx = max(1, int(round(width / spacing)))
    ny = max(1, int(round(height / spacing)))

    centers = _seed_centers(values, spacing, nx, ny)
    labels = _assign(values, centers, spacing, compactness)
    for _ in range(iterations):
        centers = _update(values, labels, centers)
        labels = _assign(values, centers, spacing, compactness)

    labels = _enforce_connectivity(labels, centers.shape[0], spacing * spacing / 4.0)
    count = int(labels.max())
    logger.debug('SLIC produced ' + str(count) + ' superpixels for ' + str(p) +
                 ' requested, interval ' + str(spacing))
    return SuperpixelMap(labels=LabelMap(labels),
                         centers=_final_centers(values, labels, count),
                         count=count, spacing=spacing)


def pool_superpixels(d2, sp):
    """
    Replaces every pixel by the mean of the valid values of its
    superpixel. A superpixel without valid pixels becomes invalid

    :param d2: transformed disparity map
    :type d2: :py:class:`~potholedetector.raster.DisparityMap`
    :param sp: superpixels of **d2**
    :type sp: :py:class:`SuperpixelMap`
    :raises DimensionMismatchError: if dimensions differ
    :rtype: :py:class:`~potholedetector.raster.DisparityMap`
    """
    check_same_shape(d2, sp.labels, 'disparity map and superpixels')
    labels = sp.labels.labels
    valid = d2.valid_mask
    lab = labels[valid]
    val = d2.values[valid]
    n = int(labels.max()) + 1

    # means are taken relative to one member so uniform superpixels stay exact
    reference = np.zeros(n, dtype=np.float64)
    present, first = np.unique(lab, return_index=True)
    reference[present] = val[first]
    counts = np.bincount(lab, minlength=n)
    sums = np.bincount(lab, weights=val - reference[lab], minlength=n)

    means = np.full(n, INVALID_DISPARITY)
    has = counts > 0
    means[has] = reference[has] + sums[has] / counts[has]
    return DisparityMap(means[labels])
