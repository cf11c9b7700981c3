import math
import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd

from potholedetector.exceptions import PotholeDetectorError
from potholedetector.raster import check_same_shape
from potholedetector.geometry import closest_distance_error

logger = logging.getLogger(__name__)

INSTANCE_COLUMNS = ('correct', 'incorrect', 'misdetection')


@dataclass(frozen=True)
class ConfusionCounts:
    """
    Pixel level confusion counts, pothole is the positive class
    """
    n_tp: int
    n_fp: int
    n_fn: int
    n_tn: int

    @property
    def total(self):
        return self.n_tp + self.n_fp + self.n_fn + self.n_tn


@dataclass(frozen=True)
class PixelReport:
    """
    Pixel level detection scores. **degenerate** names the ratios whose
    denominator was ``0`` and that were set to ``0``
    """
    counts: ConfusionCounts
    precision: float
    recall: float
    accuracy: float
    fscore: float
    degenerate: tuple = ()


@dataclass(frozen=True)
class InstanceReport:
    """
    Instance level detection counts
    """
    correct: int
    incorrect: int
    misdetection: int


def _overlap(est, gt):
    check_same_shape(est, gt, 'estimated and ground truth disparity')
    both = est.valid_mask & gt.valid_mask
    q = int(np.count_nonzero(both))
    if q == 0:
        raise PotholeDetectorError('no overlapping valid pixels between estimate '
                                   'and ground truth')
    return est.values[both] - gt.values[both]


def pep(est, gt, eps):
    """
    Percentage of error pixels, the share of pixels valid in both maps
    whose absolute disparity error is strictly greater than **eps**

    :param est: estimated disparity
    :type est: :py:class:`~potholedetector.raster.DisparityMap`
    :param gt: ground truth disparity
    :type gt: :py:class:`~potholedetector.raster.DisparityMap`
    :param eps: tolerance in pixels
    :type eps: float
    :raises PotholeDetectorError: if no pixel is valid in both maps
    :return: percentage in ``[0, 100]``
    :rtype: float
    """
    error = _overlap(est, gt)
    return 100.0 * float(np.count_nonzero(np.abs(error) > eps)) / error.shape[0]


def rmse(est, gt):
    """
    Root mean squared disparity error over pixels valid in both maps

    :raises PotholeDetectorError: if no pixel is valid in both maps
    :rtype: float
    """
    error = _overlap(est, gt)
    return math.sqrt(float(np.dot(error, error)) / error.shape[0])


def fscore(precision, recall):
    """
    Harmonic mean ``2PR / (P + R)``, ``0`` when ``P + R`` is ``0``

    :rtype: float
    """
    if precision + recall == 0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def _ratio(num, den, name, degenerate):
    if den == 0:
        degenerate.append(name)
        return 0.0
    return num / den


def pixel_metrics(pred, gt_mask):
    """
    Pixel level precision, recall, accuracy and F-score of **pred**
    against **gt_mask**, nonzero labels are potholes in both

    :param pred: detected pothole labels
    :type pred: :py:class:`~potholedetector.raster.LabelMap`
    :param gt_mask: ground truth pothole labels
    :type gt_mask: :py:class:`~potholedetector.raster.LabelMap`
    :rtype: :py:class:`PixelReport`
    """
    check_same_shape(pred, gt_mask, 'predicted and ground truth labels')
    p = pred.mask()
    g = gt_mask.mask()
    counts = ConfusionCounts(n_tp=int(np.count_nonzero(p & g)),
                             n_fp=int(np.count_nonzero(p & ~g)),
                             n_fn=int(np.count_nonzero(~p & g)),
                             n_tn=int(np.count_nonzero(~p & ~g)))
    degenerate = []
    precision = _ratio(counts.n_tp, counts.n_tp + counts.n_fp, 'precision', degenerate)
    recall = _ratio(counts.n_tp, counts.n_tp + counts.n_fn, 'recall', degenerate)
    accuracy = _ratio(counts.n_tp + counts.n_tn, counts.total, 'accuracy', degenerate)
    if precision + recall == 0:
        degenerate.append('fscore')
    return PixelReport(counts=counts, precision=precision, recall=recall,
                       accuracy=accuracy, fscore=fscore(precision, recall),
                       degenerate=tuple(degenerate))


def _iou_table(pred, gt):
    """
    IoU of every (predicted, ground truth) instance pair with overlap
    """
    p = pred.labels.ravel()
    g = gt.labels.ravel()
    p_ids = np.unique(p[p != 0])
    g_ids = np.unique(g[g != 0])
    p_area = dict(zip(*np.unique(p[p != 0], return_counts=True)))
    g_area = dict(zip(*np.unique(g[g != 0], return_counts=True)))
    both = (p != 0) & (g != 0)
    if not np.any(both):
        return p_ids, g_ids, []
    pairs, inter = np.unique(np.column_stack((p[both], g[both])), axis=0,
                             return_counts=True)
    table = []
    for (pi, gi), n in zip(pairs, inter):
        table.append((n / (p_area[pi] + g_area[gi] - n), int(pi), int(gi)))
    return p_ids, g_ids, table


def instance_metrics(pred, gt_instances, iou_min=0.5):
    """
    Greedy one to one matching of predicted and ground truth instances by
    descending IoU. A predicted instance matched with IoU of at least
    **iou_min** is correct, every other predicted instance is incorrect,
    ground truth instances left unmatched are misdetections

    :param pred: detected pothole labels
    :type pred: :py:class:`~potholedetector.raster.LabelMap`
    :param gt_instances: ground truth pothole labels
    :type gt_instances: :py:class:`~potholedetector.raster.LabelMap`
    :param iou_min: smallest IoU for a match
    :type iou_min: float
    :rtype: :py:class:`InstanceReport`
    """
    check_same_shape(pred, gt_instances, 'predicted and ground truth labels')
    p_ids, g_ids, table = _iou_table(pred, gt_instances)
    matched_pred = set()
    matched_gt = set()
    for iou, pi, gi in sorted(table, key=lambda t: (-t[0], t[1], t[2])):
        if iou < iou_min:
            break
        if pi in matched_pred or gi in matched_gt:
            continue
        matched_pred.add(pi)
        matched_gt.add(gi)
    correct = len(matched_pred)
    return InstanceReport(correct=correct,
                          incorrect=len(p_ids) - correct,
                          misdetection=len(g_ids) - len(matched_gt))


def pep_key(eps):
    """
    :return: metric name of the error pixel percentage at **eps**
    :rtype: str
    """
    return 'pep_' + '%g' % eps


def frame_metrics(est, gt_disp, pred, gt_mask, eps_list=(1.0, 2.0, 3.0),
                  iou_min=0.5, runtime_ms=None, est_cloud=None, gt_cloud=None):
    """
    Every metric of one frame as a JSON ready dict with keys
    ``pep_<eps>``, ``rmse``, ``closest_distance``, ``precision``,
    ``recall``, ``accuracy``, ``fscore``, ``correct``, ``incorrect``,
    ``misdetection``, ``runtime_ms`` and ``degenerate``. Disparity
    metrics are ``None`` when **est** and **gt_disp** share no valid
    pixel, ``closest_distance`` is ``None`` unless both clouds hold points

    :param est_cloud: points of the detected potholes
    :type est_cloud: :py:class:`~potholedetector.geometry.PointCloud`
    :param gt_cloud: points of the ground truth potholes
    :type gt_cloud: :py:class:`~potholedetector.geometry.PointCloud`
    :rtype: dict
    """
    row = {}
    try:
        for eps in eps_list:
            row[pep_key(eps)] = pep(est, gt_disp, eps)
        row['rmse'] = rmse(est, gt_disp)
    except PotholeDetectorError as pe:
        logger.warning('Disparity metrics skipped: ' + str(pe))
        for eps in eps_list:
            row[pep_key(eps)] = None
        row['rmse'] = None

    row['closest_distance'] = None
    if est_cloud is not None and gt_cloud is not None:
        if len(est_cloud) > 0 and len(gt_cloud) > 0:
            row['closest_distance'] = closest_distance_error(est_cloud, gt_cloud)
        else:
            logger.debug('Closest distance error skipped, empty point cloud')

    pixels = pixel_metrics(pred, gt_mask)
    row['precision'] = pixels.precision
    row['recall'] = pixels.recall
    row['accuracy'] = pixels.accuracy
    row['fscore'] = pixels.fscore
    instances = instance_metrics(pred, gt_mask, iou_min=iou_min)
    row['correct'] = instances.correct
    row['incorrect'] = instances.incorrect
    row['misdetection'] = instances.misdetection
    row['runtime_ms'] = runtime_ms
    row['degenerate'] = list(pixels.degenerate)
    return row


def aggregate_metrics(rows):
    """
    Aggregate row over frames, the mean of every numeric metric
    (missing values skipped) with instance counts summed instead

    :param rows: dicts from :py:func:`frame_metrics`
    :type rows: list
    :rtype: dict
    """
    if len(rows) == 0:
        raise PotholeDetectorError('No frames to aggregate')
    df = pd.DataFrame(rows)
    if 'degenerate' in df.columns:
        df = df.drop(columns=['degenerate'])
    df = df.apply(pd.to_numeric, errors='coerce')
    aggregate = {}
    for column in df.columns:
        if column in INSTANCE_COLUMNS:
            aggregate[column] = int(df[column].sum())
            continue
        mean = df[column].mean(skipna=True)
        aggregate[column] = None if pd.isna(mean) else float(mean)
    aggregate['frames'] = len(rows)
    return aggregate
