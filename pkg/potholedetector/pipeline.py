import math
import time
import logging
import dataclasses
from collections import OrderedDict
from dataclasses import dataclass
from dataclasses import field

from potholedetector.raster import GrayImage
from potholedetector.raster import check_same_shape
from potholedetector.geometry import RoadModel
from potholedetector.geometry import estimate_roll
from potholedetector.geometry import sample_observations
from potholedetector.geometry import transform_disparity
from potholedetector.geometry import extract_pothole_clouds
from potholedetector.stereo import match_pair
from potholedetector.segmentation import slic
from potholedetector.segmentation import pool_superpixels
from potholedetector.detection import build_histogram
from potholedetector.detection import find_road_threshold
from potholedetector.detection import detect_potholes
from potholedetector.detection import smooth_disparity
from potholedetector.detection import refine_potholes
from potholedetector.detection import select_regions
from potholedetector.detection import RefinedDetection

logger = logging.getLogger(__name__)


@dataclass
class FrameResult:
    """
    Every intermediate of one processed frame. **stage_times** maps stage
    name to wall clock milliseconds in execution order
    """
    model: RoadModel = None
    d0: object = None
    d1: object = None
    d2: object = None
    d3: object = None
    superpixels: object = None
    threshold: object = None
    labels: object = None
    regions: tuple = ()
    smoothed: object = None
    clouds: list = field(default_factory=list)
    stage_times: OrderedDict = field(default_factory=OrderedDict)
    warnings: list = field(default_factory=list)
    clamped: int = 0
    bootstrap_model: RoadModel = None

    @property
    def runtime_ms(self):
        return float(sum(self.stage_times.values()))


class StageTimer(object):
    """
    Records contiguous stage durations, each stage ends where the next
    begins so the durations add up to the elapsed total
    """

    def __init__(self, stage_times):
        """
        Constructor

        :param stage_times: dict to fill with stage name to milliseconds
        :type stage_times: dict
        """
        self._stage_times = stage_times
        self._last = time.perf_counter()

    def lap(self, stage):
        now = time.perf_counter()
        self._stage_times[stage] = (now - self._last) * 1000.0
        self._last = now
        logger.debug('Stage ' + stage + ' took ' +
                     str(round(self._stage_times[stage], 1)) + ' ms')


def block_average(image, scale):
    """
    Averages non overlapping **scale** x **scale** blocks, dropping the
    remainder rows and columns

    :param image: image to reduce
    :type image: :py:class:`~potholedetector.raster.GrayImage`
    :param scale: block size
    :type scale: int
    :rtype: :py:class:`~potholedetector.raster.GrayImage`
    """
    height, width = image.height // scale, image.width // scale
    blocks = image.pixels[:height * scale, :width * scale]
    return GrayImage(blocks.reshape(height, scale, width, scale).mean(axis=(1, 3)))


def roll_bracket(config):
    limit = math.radians(config.roll_bracket)
    return -limit, limit


def bootstrap_road_model(left, right, config):
    """
    First road model, needed before the perspective transformation can
    be applied. Both views are block averaged by ``init_scale``, matched
    without row shifts over ``ceil(init_d_max / init_scale)``
    disparities and the coarse road fit is scaled back to full
    resolution with
    ``a0 = s * a0_s - a1 * (s - 1) / 2 * (cos(phi) - sin(phi))``

    :param left: left image
    :type left: :py:class:`~potholedetector.raster.GrayImage`
    :param right: right image
    :type right: :py:class:`~potholedetector.raster.GrayImage`
    :param config: pipeline configuration
    :type config: :py:class:`~potholedetector.config.PipelineConfig`
    :raises InsufficientObservationsError: if the coarse match has too few
                                           valid pixels
    :raises DegenerateFitError: if the coarse road fit is degenerate
    :rtype: :py:class:`~potholedetector.geometry.RoadModel`
    """
    scale = config.init_scale
    if scale > 1:
        left = block_average(left, scale)
        right = block_average(right, scale)
    d_max = min(int(math.ceil(config.init_d_max / scale)), left.width - 1)
    coarse = config.updated(d_max=d_max)
    _, d1 = match_pair(left, right, RoadModel(a0=0.0, a1=0.0), coarse)
    model = estimate_roll(sample_observations(d1), bracket=roll_bracket(config),
                          tol=config.roll_tol, trim_factor=config.trim_factor)
    offset = model.a1 * (scale - 1) / 2.0 * (math.cos(model.phi) - math.sin(model.phi))
    full = RoadModel(a0=scale * model.a0 - offset, a1=model.a1, phi=model.phi)
    logger.info('Bootstrap road model ' + str(full))
    return full


def detect_frame(left, right, config, rig=None):
    """
    Runs the whole detection pipeline on one rectified stereo pair

    :param left: left image
    :type left: :py:class:`~potholedetector.raster.GrayImage`
    :param right: right image
    :type right: :py:class:`~potholedetector.raster.GrayImage`
    :param config: pipeline configuration
    :type config: :py:class:`~potholedetector.config.PipelineConfig`
    :param rig: stereo rig, built from **config** if ``None``
    :type rig: :py:class:`~potholedetector.config.StereoRig`
    :raises DegenerateFitError: if the road cannot be fitted
    :rtype: :py:class:`FrameResult`
    """
    check_same_shape(left, right, 'left and right images')
    if rig is None:
        rig = config.stereo_rig(left.width, left.height)
    result = FrameResult()
    timer = StageTimer(result.stage_times)

    result.bootstrap_model = bootstrap_road_model(left, right, config)
    timer.lap('bootstrap')

    result.d0, result.d1 = match_pair(left, right, result.bootstrap_model, config)
    timer.lap('match')

    result.model = estimate_roll(sample_observations(result.d1),
                                 bracket=roll_bracket(config),
                                 tol=config.roll_tol, trim_factor=config.trim_factor)
    logger.info('Road model ' + str(result.model))
    timer.lap('fit')

    result.d2, result.clamped = transform_disparity(result.d1, result.model,
                                                    config.delta_dt)
    if result.clamped > 0:
        result.warnings.append(str(result.clamped) +
                               ' transformed disparities clamped to 0')
    timer.lap('transform')

    result.superpixels = slic(result.d2, config.slic_count,
                              compactness=config.slic_compactness,
                              iterations=config.slic_iterations)
    timer.lap('slic')

    result.d3 = pool_superpixels(result.d2, result.superpixels)
    timer.lap('pool')

    result.threshold = find_road_threshold(build_histogram(result.d2,
                                                           config.histogram_bin_width),
                                           delta_pd=config.delta_pd,
                                           band=config.diagonal_band)
    if result.threshold.degenerate:
        result.warnings.append('degenerate threshold, single cluster at ' +
                               str(result.threshold.t_r))
    timer.lap('threshold')

    detection = detect_regions(result, config)
    result.labels, result.regions = detection.labels, detection.regions
    timer.lap('detect')

    result.clouds = extract_pothole_clouds(result.d1, result.labels, rig)
    timer.lap('reproject')
    logger.info(str(len(result.clouds)) + ' potholes detected in ' +
                str(round(result.runtime_ms, 1)) + ' ms')
    return result


def detect_regions(result, config, delta_pd=None):
    """
    Detection step alone, reusing the pooled map, superpixels and road
    threshold of **result**. When **delta_pd** is given the pothole
    threshold is moved to ``t_r - delta_pd``

    With a positive ``refine_radius`` the superpixel components below
    ``t_s`` are seeds that are grown to pixel accuracy on the smoothed
    transformed disparities, the border, superpixel, area and depth
    rules then apply to the grown regions. Otherwise the superpixel
    components are the result

    :param result: processed frame
    :type result: :py:class:`FrameResult`
    :param config: pipeline configuration
    :type config: :py:class:`~potholedetector.config.PipelineConfig`
    :param delta_pd: pothole tolerance overriding the one of the threshold
    :type delta_pd: float
    :rtype: :py:class:`~potholedetector.detection.RefinedDetection`
    """
    threshold = result.threshold
    if delta_pd is not None:
        threshold = dataclasses.replace(threshold, t_s=threshold.t_r - delta_pd)
    if config.refine_radius <= 0:
        return RefinedDetection(detect_potholes(result.d3, result.superpixels, threshold,
                                                border_margin=config.border_margin,
                                                min_superpixels=config.min_superpixels,
                                                connectivity=config.connectivity))
    seeds = detect_potholes(result.d3, result.superpixels, threshold, border_margin=0,
                            min_superpixels=1, connectivity=config.connectivity,
                            min_area=1)
    if result.smoothed is None:
        result.smoothed = smooth_disparity(result.d2, config.smoothing_window)
    refined = refine_potholes(result.smoothed, seeds, result.superpixels.spacing,
                              threshold.t_r, radius=config.refine_radius,
                              tolerance=config.refine_tolerance,
                              mad_factor=config.refine_mad_factor,
                              connectivity=config.connectivity)
    return select_regions(refined, result.superpixels, border_margin=config.border_margin,
                          min_superpixels=config.min_superpixels,
                          min_depth=config.min_depth)


def detect(result, config, delta_pd=None):
    """
    Labels of :py:func:`detect_regions`

    :rtype: :py:class:`~potholedetector.raster.LabelMap`
    """
    return detect_regions(result, config, delta_pd=delta_pd).labels
