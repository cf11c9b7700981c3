import math
import logging
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from potholedetector.exceptions import PotholeDetectorError
from potholedetector.exceptions import DegenerateFitError
from potholedetector.exceptions import InsufficientObservationsError
from potholedetector.raster import DisparityMap
from potholedetector.raster import INVALID_DISPARITY
from potholedetector.raster import check_same_shape
from potholedetector.perspective import road_disparity_at

logger = logging.getLogger(__name__)

MAX_OBSERVATIONS = 100000

INV_PHI = (math.sqrt(5) - 1) / 2
INV_PHI_SQUARE = (3 - math.sqrt(5)) / 2

MAX_ROLL = math.pi / 4.0


@dataclass(frozen=True)
class RoadModel:
    """
    Road disparity projection ``a0 + a1 * (v * cos(phi) - u * sin(phi))``
    where **phi** is the stereo rig roll angle in radians, at most
    ``pi / 4`` in magnitude
    """
    a0: float
    a1: float
    phi: float = 0.0

    def __post_init__(self):
        for name in ('a0', 'a1', 'phi'):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise PotholeDetectorError('Road model ' + name + ' is not finite')
            object.__setattr__(self, name, value)
        if abs(self.phi) > MAX_ROLL:
            raise PotholeDetectorError('Road model roll ' + str(self.phi) +
                                       ' exceeds pi / 4 in magnitude')

    def surface(self, width, height):
        """
        Evaluates the model over every pixel of a **width** x **height** raster

        :rtype: :py:class:`numpy.ndarray`
        """
        vv, uu = np.mgrid[0:height, 0:width].astype(np.float64)
        return road_disparity_at(self, uu, vv)


@dataclass(frozen=True)
class RoadObservations:
    """
    Valid road disparities **d** at columns **u** and rows **v**
    """
    d: np.ndarray
    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        arrays = [np.array(getattr(self, n), dtype=np.float64, copy=True).ravel()
                  for n in ('d', 'u', 'v')]
        if not arrays[0].shape == arrays[1].shape == arrays[2].shape:
            raise PotholeDetectorError('Observation vectors differ in length')
        if arrays[0].shape[0] < 3:
            raise InsufficientObservationsError('At least 3 observations required, got ' +
                                                str(arrays[0].shape[0]))
        if not all(np.all(np.isfinite(a)) for a in arrays) or np.any(arrays[0] < 0):
            raise PotholeDetectorError('Observations must be finite valid disparities')
        for name, arr in zip(('d', 'u', 'v'), arrays):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def k(self):
        return self.d.shape[0]

    def subset(self, keep):
        """
        :param keep: boolean selection
        :type keep: :py:class:`numpy.ndarray`
        :rtype: :py:class:`RoadObservations`
        """
        return RoadObservations(d=self.d[keep], u=self.u[keep], v=self.v[keep])


@dataclass(frozen=True)
class PointCloud:
    """
    ``N x 3`` array of ``(X, Y, Z)`` points in meters
    """
    points: np.ndarray

    def __post_init__(self):
        points = np.array(self.points, dtype=np.float64, copy=True).reshape(-1, 3)
        if np.any(points[:, 2] <= 0):
            raise PotholeDetectorError('Point cloud depths must be > 0')
        points.setflags(write=False)
        object.__setattr__(self, 'points', points)

    def __len__(self):
        return self.points.shape[0]


def _rotated_rows(obs, phi):
    return obs.v * math.cos(phi) - obs.u * math.sin(phi)


def fit_line(obs, phi):
    """
    Least squares fit of ``d = a0 + a1 * (v * cos(phi) - u * sin(phi))``
    at fixed roll **phi**. The 2x2 normal equations are solved in closed
    form (centred), the returned residual ``e0min`` is the minimum
    squared error for that roll

    :param obs: road observations
    :type obs: :py:class:`RoadObservations`
    :param phi: roll angle in radians
    :type phi: float
    :raises DegenerateFitError: if the normal matrix is singular, which
                                happens when every observation lies on one
                                rotated row
    :return: (model, e0min)
    :rtype: tuple
    """
    x = _rotated_rows(obs, phi)
    x_mean = x.mean()
    d_mean = obs.d.mean()
    xc = x - x_mean
    sxx = float(np.dot(xc, xc))
    scale = max(1.0, float(np.dot(x, x)))
    if sxx <= np.finfo(np.float64).eps * scale * obs.k:
        raise DegenerateFitError('Singular normal matrix: all observations on one row '
                                 'at roll ' + str(phi))
    a1 = float(np.dot(xc, obs.d - d_mean)) / sxx
    a0 = float(d_mean - a1 * x_mean)
    residual = obs.d - a0 - a1 * x
    e0min = max(0.0, float(np.dot(residual, residual)))
    return RoadModel(a0=a0, a1=a1, phi=float(phi)), e0min


def _energy(obs, phi):
    try:
        return fit_line(obs, phi)[1]
    except DegenerateFitError:
        return math.inf


def golden_section_minimize(func, lower, upper, tol):
    """
    Golden-section search for the minimum of **func** on
    ``[lower, upper]``

    :param func: function of one float
    :param lower: lower end of bracket
    :type lower: float
    :param upper: upper end of bracket
    :type upper: float
    :param tol: final bracket width
    :type tol: float
    :return: (best argument, best value) over every evaluation made
    :rtype: tuple
    """
    a, b = min(lower, upper), max(lower, upper)
    h = b - a
    seen = {}

    def evaluate(x):
        if x not in seen:
            seen[x] = func(x)
        return seen[x]

    if h > tol:
        n = int(math.ceil(math.log(tol / h) / math.log(INV_PHI)))
        c = a + INV_PHI_SQUARE * h
        d = a + INV_PHI * h
        yc = evaluate(c)
        yd = evaluate(d)
        for _ in range(n - 1):
            if yc < yd:
                b = d
                d = c
                yd = yc
                h = INV_PHI * h
                c = a + INV_PHI_SQUARE * h
                yc = evaluate(c)
            else:
                a = c
                c = d
                yc = yd
                h = INV_PHI * h
                d = a + INV_PHI * h
                yd = evaluate(d)
    evaluate((a + b) / 2.0)
    best = min(seen, key=lambda x: (seen[x], abs(x - (a + b) / 2.0)))
    return best, seen[best]


def _search_roll(obs, bracket, tol):
    phi, energy = golden_section_minimize(lambda p: _energy(obs, p),
                                          bracket[0], bracket[1], tol)
    if not math.isfinite(energy):
        raise DegenerateFitError('Road fit degenerate at every roll tried in ' +
                                 str(bracket))
    return fit_line(obs, phi)


def estimate_roll(obs, bracket=(-math.radians(15.0), math.radians(15.0)),
                  tol=1e-4, trim_factor=3.0):
    """
    Estimates roll angle and road model by minimizing ``e0min(phi)``
    over **bracket** with golden-section search. When **trim_factor**
    is > 0, observations whose residual exceeds **trim_factor** times
    the residual RMS are dropped and the search is run once more

    :param obs: road observations
    :type obs: :py:class:`RoadObservations`
    :param bracket: (lower, upper) roll bounds in radians
    :type bracket: tuple
    :param tol: roll tolerance in radians
    :type tol: float
    :param trim_factor: outlier rejection factor, ``<= 0`` disables
    :type trim_factor: float
    :raises DegenerateFitError: if every roll tried is degenerate
    :rtype: :py:class:`RoadModel`
    """
    if not tol > 0:
        raise PotholeDetectorError('tol must be > 0')
    model, e0min = _search_roll(obs, bracket, tol)
    logger.debug('Initial roll ' + str(model.phi) + ' rad, e0min ' + str(e0min))
    if trim_factor is None or trim_factor <= 0 or e0min == 0:
        return model

    residual = obs.d - road_disparity_at(model, obs.u, obs.v)
    rms = math.sqrt(e0min / obs.k)
    keep = np.abs(residual) <= trim_factor * rms
    kept = int(np.count_nonzero(keep))
    if kept == obs.k or kept < 3:
        return model
    logger.debug('Trimming ' + str(obs.k - kept) + ' road outliers and refitting')
    try:
        model, e0min = _search_roll(obs.subset(keep), bracket, tol)
    except DegenerateFitError as de:
        logger.warning('Refit after trimming failed, keeping first fit: ' + str(de))
    return model


def roll_energy_profile(obs, phis):
    """
    Evaluates ``e0min`` at every roll in **phis**, degenerate rolls
    give ``inf``

    :param obs: road observations
    :type obs: :py:class:`RoadObservations`
    :param phis: roll angles in radians
    :rtype: :py:class:`numpy.ndarray`
    """
    return np.array([_energy(obs, float(p)) for p in np.asarray(phis, dtype=np.float64)])


def sample_observations(d1, roi=None, max_count=MAX_OBSERVATIONS):
    """
    Collects the valid pixels of **d1** inside **roi** in row major
    order. When more than **max_count** are found, exactly **max_count**
    are kept at evenly spaced positions

    :param d1: disparity map
    :type d1: :py:class:`~potholedetector.raster.DisparityMap`
    :param roi: (u_min, v_min, u_max, v_max), max exclusive, ``None`` for
                whole image
    :type roi: tuple
    :param max_count: cap on observations
    :type max_count: int
    :raises InsufficientObservationsError: if fewer than 3 valid pixels
    :rtype: :py:class:`RoadObservations`
    """
    valid = d1.valid_mask.copy()
    if roi is not None:
        u_min, v_min, u_max, v_max = (int(x) for x in roi)
        window = np.zeros_like(valid)
        window[max(0, v_min):max(0, v_max), max(0, u_min):max(0, u_max)] = True
        valid &= window
    vs, us = np.nonzero(valid)
    n = vs.shape[0]
    if n < 3:
        raise InsufficientObservationsError('too few valid pixels to fit road: ' + str(n))
    if n > max_count:
        idx = (np.arange(max_count, dtype=np.int64) * n) // max_count
        vs = vs[idx]
        us = us[idx]
    logger.debug('Sampled ' + str(vs.shape[0]) + ' of ' + str(n) + ' valid pixels')
    return RoadObservations(d=d1.values[vs, us], u=us, v=vs)


def transform_disparity(d1, model, delta_dt):
    """
    Disparity transformation ``D2 = D1 - road(u, v) + delta_dt``.
    Invalid pixels stay invalid, negative results are clamped to ``0``

    :param d1: disparity map of the original pair
    :type d1: :py:class:`~potholedetector.raster.DisparityMap`
    :param model: road model
    :type model: :py:class:`RoadModel`
    :param delta_dt: offset keeping the road positive
    :type delta_dt: float
    :return: (transformed map, number of clamped pixels)
    :rtype: tuple
    """
    valid = d1.valid_mask
    values = d1.values - model.surface(d1.width, d1.height) + delta_dt
    clamp = valid & (values < 0)
    clamped = int(np.count_nonzero(clamp))
    if clamped > 0:
        logger.warning(str(clamped) + ' transformed disparities clamped to 0, '
                       'road model may be poor')
    values[clamp] = 0.0
    values[~valid] = INVALID_DISPARITY
    return DisparityMap(values), clamped


def reproject(d1, rig):
    """
    Reprojects every valid pixel with disparity ``d > 0`` to
    ``Z = f * b / d``, ``X = (u - cu) * Z / f``, ``Y = (v - cv) * Z / f``

    :param d1: disparity map
    :type d1: :py:class:`~potholedetector.raster.DisparityMap`
    :param rig: stereo rig
    :type rig: :py:class:`~potholedetector.config.StereoRig`
    :rtype: :py:class:`PointCloud`
    """
    return _reproject_where(d1, rig, d1.valid_mask)


def _reproject_where(d1, rig, select):
    keep = select & d1.valid_mask & (d1.values > 0)
    vs, us = np.nonzero(keep)
    d = d1.values[vs, us]
    z = rig.focal * rig.baseline / d
    x = (us - rig.cu) * z / rig.focal
    y = (vs - rig.cv) * z / rig.focal
    return PointCloud(np.column_stack((x, y, z)))


def extract_pothole_clouds(d1, labels, rig):
    """
    Reprojects the pixels of each detected pothole separately

    :param d1: disparity map of the original pair
    :type d1: :py:class:`~potholedetector.raster.DisparityMap`
    :param labels: pothole labels
    :type labels: :py:class:`~potholedetector.raster.LabelMap`
    :param rig: stereo rig
    :type rig: :py:class:`~potholedetector.config.StereoRig`
    :return: list of (label, :py:class:`PointCloud`) sorted by label
    :rtype: list
    """
    check_same_shape(d1, labels, 'disparity and labels')
    clouds = []
    for label in np.unique(labels.labels):
        if label == 0:
            continue
        clouds.append((int(label), _reproject_where(d1, rig, labels.labels == label)))
    return clouds


def reproject_mask(d1, labels, rig):
    """
    Reprojects the pixels of **d1** with a nonzero label, for example
    every ground truth pothole of a frame as one cloud

    :param d1: disparity map
    :type d1: :py:class:`~potholedetector.raster.DisparityMap`
    :param labels: pixels to reproject
    :type labels: :py:class:`~potholedetector.raster.LabelMap`
    :param rig: stereo rig
    :type rig: :py:class:`~potholedetector.config.StereoRig`
    :rtype: :py:class:`PointCloud`
    """
    check_same_shape(d1, labels, 'disparity and labels')
    return _reproject_where(d1, rig, labels.mask())


def merge_clouds(clouds):
    """
    :param clouds: point clouds
    :type clouds: list
    :return: all points of **clouds** in one cloud, empty if none
    :rtype: :py:class:`PointCloud`
    """
    if len(clouds) == 0:
        return PointCloud(np.zeros((0, 3)))
    return PointCloud(np.concatenate([c.points for c in clouds], axis=0))


def closest_distance_error(test, truth):
    """
    Root mean squared distance from every point of **test** to its
    nearest neighbour in **truth**

    :param test: evaluated cloud
    :type test: :py:class:`PointCloud`
    :param truth: reference cloud
    :type truth: :py:class:`PointCloud`
    :raises PotholeDetectorError: if either cloud is empty
    :return: error in meters
    :rtype: float
    """
    if len(test) == 0 or len(truth) == 0:
        raise PotholeDetectorError('Closest distance error needs non empty clouds')
    distances, _ = cKDTree(truth.points).query(test.points, k=1)
    return float(np.sqrt(np.mean(distances ** 2)))
