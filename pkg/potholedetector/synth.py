import os
import math
import logging
from dataclasses import dataclass
from dataclasses import field

import numpy as np
from scipy import ndimage

from potholedetector.exceptions import PotholeDetectorError
from potholedetector.config import StereoRig
from potholedetector.raster import GrayImage
from potholedetector.raster import DisparityMap
from potholedetector.raster import LabelMap
from potholedetector import fileio

logger = logging.getLogger(__name__)

LEFT_IMAGE = 'left.png'
RIGHT_IMAGE = 'right.png'
DISPARITY_GT = 'disp_gt.png'
MASK_GT = 'mask_gt.png'
SCENE_SPEC = 'spec.txt'

TEXTURE_OCTAVES = ((2, 0.5), (4, 0.3), (8, 0.2))
"""
(cell size in pixels, weight) of each value noise octave
"""

TEXTURE_RANGE = (30.0, 220.0)

SCENE_MARGIN = 5
"""
Smallest gap between a pothole and the image border
"""

_BINOMIAL = np.array([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0


@dataclass(frozen=True)
class Pothole:
    """
    Elliptic paraboloid disparity deficit of **depth** pixels at its
    centre ``(u, v)`` falling to ``0`` on the ellipse of radii
    ``(ru, rv)``
    """
    u: float
    v: float
    ru: float
    rv: float
    depth: float

    def deficit(self, width, height):
        """
        :return: deficit raster, ``0`` outside the ellipse
        :rtype: :py:class:`numpy.ndarray`
        """
        vv, uu = np.mgrid[0:height, 0:width].astype(np.float64)
        r2 = ((uu - self.u) / self.ru) ** 2 + ((vv - self.v) / self.rv) ** 2
        return self.depth * np.maximum(0.0, 1.0 - r2)


@dataclass(frozen=True)
class SceneSpec:
    """
    Everything needed to regenerate one synthetic stereo road scene
    """
    width: int = 640
    height: int = 480
    rig: StereoRig = field(default_factory=StereoRig)
    a0: float = 12.0
    a1: float = 0.1
    phi: float = 0.0
    potholes: tuple = ()
    seed: int = 0
    noise_sigma: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, 'potholes', tuple(self.potholes))
        if self.width < 16 or self.height < 16:
            raise PotholeDetectorError('Scene must be at least 16x16')
        if self.noise_sigma < 0:
            raise PotholeDetectorError('noise_sigma must be >= 0')
        for p in self.potholes:
            if p.depth < 0:
                raise PotholeDetectorError('Pothole depth must be >= 0: ' + str(p))
            if p.ru < 4 or p.rv < 4:
                raise PotholeDetectorError('Pothole radii must be >= 4: ' + str(p))
            if (p.u - p.ru <= SCENE_MARGIN or p.u + p.ru >= self.width - 1 - SCENE_MARGIN or
                    p.v - p.rv <= SCENE_MARGIN or p.v + p.rv >= self.height - 1 - SCENE_MARGIN):
                raise PotholeDetectorError('Pothole too close to image border: ' + str(p))


@dataclass(frozen=True)
class SceneTruth:
    """
    Generated stereo pair with ground truth
    """
    left: GrayImage
    right: GrayImage
    gt_disparity: DisparityMap
    gt_mask: LabelMap
    spec: SceneSpec


@dataclass(frozen=True)
class SceneRanges:
    """
    Ranges scenes of :py:func:`scene_batch` are drawn from, each a
    ``(low, high)`` tuple
    """
    width: int = 640
    height: int = 480
    a0: tuple = (10.0, 14.0)
    a1: tuple = (0.08, 0.12)
    roll_degrees: tuple = (-3.0, 3.0)
    depth: tuple = (1.5, 4.0)
    radius: tuple = (20.0, 60.0)
    noise_sigma: tuple = (0.0, 1.0)
    potholes: tuple = (1, 3)


def road_disparity(spec):
    """
    :return: planar road disparity of **spec** over the whole image
    :rtype: :py:class:`numpy.ndarray`
    """
    vv, uu = np.mgrid[0:spec.height, 0:spec.width].astype(np.float64)
    return spec.a0 + spec.a1 * (vv * math.cos(spec.phi) - uu * math.sin(spec.phi))


def make_texture(rng, width, height):
    """
    Band limited noise texture: value noise octaves summed, smoothed with
    a 5x5 binomial kernel and stretched to ``[30, 220]``

    :param rng: random generator
    :type rng: :py:class:`numpy.random.Generator`
    :rtype: :py:class:`numpy.ndarray`
    """
    texture = np.zeros((height, width), dtype=np.float64)
    vv, uu = np.mgrid[0:height, 0:width].astype(np.float64)
    for cell, weight in TEXTURE_OCTAVES:
        grid = rng.random((height // cell + 2, width // cell + 2))
        texture += weight * ndimage.map_coordinates(grid, [vv / cell, uu / cell],
                                                    order=1, mode='nearest')
    texture = ndimage.convolve(texture, np.outer(_BINOMIAL, _BINOMIAL), mode='reflect')
    low, high = texture.min(), texture.max()
    if high <= low:
        return np.full(texture.shape, np.mean(TEXTURE_RANGE))
    return TEXTURE_RANGE[0] + (texture - low) * (TEXTURE_RANGE[1] - TEXTURE_RANGE[0]) / (high - low)


def _left_columns(disparity, iterations=20):
    """
    Left view column ``x`` seen at every right view pixel ``u`` solving
    ``x = u + disparity(x)`` by fixed point iteration along the row
    """
    height, width = disparity.shape
    rows = np.broadcast_to(np.arange(height, dtype=np.float64)[:, np.newaxis],
                           (height, width))
    u = np.arange(width, dtype=np.float64)[np.newaxis, :]
    x = u + disparity
    for _ in range(iterations):
        # disparity is only known inside the image, extend the border values
        d = ndimage.map_coordinates(disparity, [rows, np.clip(x, 0, width - 1)],
                                    order=1, mode='nearest')
        x = u + d
    return x


def generate_scene(spec):
    """
    Renders a stereo pair of a textured planar road with potholes

    Ground truth disparity is the road model minus every pothole
    deficit. The right image samples the left texture where each right
    pixel's left correspondence lies, so left pixel ``u`` matches right
    pixel ``u - gt(u)`` exactly

    :param spec: scene description
    :type spec: :py:class:`SceneSpec`
    :raises PotholeDetectorError: if potholes push disparity below ``0``
    :rtype: :py:class:`SceneTruth`
    """
    rng = np.random.default_rng(spec.seed)
    disparity = road_disparity(spec)
    mask = np.zeros(disparity.shape, dtype=np.int64)
    for label, pothole in enumerate(spec.potholes, start=1):
        deficit = pothole.deficit(spec.width, spec.height)
        disparity -= deficit
        mask[deficit > 0] = label
    if disparity.min() < 0:
        raise PotholeDetectorError('Scene has negative disparities, minimum ' +
                                   str(disparity.min()))

    margin = int(math.ceil(disparity.max())) + 2
    texture = make_texture(rng, spec.width + margin, spec.height)
    left = texture[:, :spec.width].copy()
    rows = np.broadcast_to(np.arange(spec.height, dtype=np.float64)[:, np.newaxis],
                           disparity.shape)
    right = ndimage.map_coordinates(texture, [rows, _left_columns(disparity)],
                                    order=1, mode='nearest')
    if spec.noise_sigma > 0:
        left = np.clip(left + rng.normal(0.0, spec.noise_sigma, left.shape), 0, 255)
        right = np.clip(right + rng.normal(0.0, spec.noise_sigma, right.shape), 0, 255)
    logger.debug('Generated scene seed ' + str(spec.seed) + ' with ' +
                 str(len(spec.potholes)) + ' potholes')
    return SceneTruth(left=GrayImage(left), right=GrayImage(right),
                      gt_disparity=DisparityMap(disparity),
                      gt_mask=LabelMap(mask), spec=spec)


def _overlaps(candidate, placed):
    for other in placed:
        gap = max(candidate.ru, candidate.rv) + max(other.ru, other.rv) + 2
        if math.hypot(candidate.u - other.u, candidate.v - other.v) < gap:
            return True
    return False


def _random_potholes(rng, ranges, count, attempts=100):
    placed = []
    for _ in range(count):
        for _ in range(attempts):
            ru = rng.uniform(*ranges.radius)
            rv = rng.uniform(0.5 * ru, ru)
            low_u, high_u = ru + SCENE_MARGIN + 1, ranges.width - ru - SCENE_MARGIN - 2
            low_v, high_v = rv + SCENE_MARGIN + 1, ranges.height - rv - SCENE_MARGIN - 2
            if low_u >= high_u or low_v >= high_v:
                continue
            candidate = Pothole(u=rng.uniform(low_u, high_u), v=rng.uniform(low_v, high_v),
                                ru=ru, rv=rv, depth=rng.uniform(*ranges.depth))
            if not _overlaps(candidate, placed):
                placed.append(candidate)
                break
        else:
            logger.warning('Unable to place pothole ' + str(len(placed) + 1) +
                           ' without overlap, scene gets ' + str(len(placed)))
    return tuple(placed)


def random_scene_spec(seed, ranges=None):
    """
    Draws a :py:class:`SceneSpec` from **ranges** using **seed**

    :rtype: :py:class:`SceneSpec`
    """
    if ranges is None:
        ranges = SceneRanges()
    rng = np.random.default_rng(seed)
    a0 = rng.uniform(*ranges.a0)
    a1 = rng.uniform(*ranges.a1)
    phi = math.radians(rng.uniform(*ranges.roll_degrees))
    noise = rng.uniform(*ranges.noise_sigma)
    count = int(rng.integers(ranges.potholes[0], ranges.potholes[1] + 1))
    return SceneSpec(width=ranges.width, height=ranges.height, a0=a0, a1=a1, phi=phi,
                     potholes=_random_potholes(rng, ranges, count), seed=int(seed),
                     noise_sigma=noise)


def iter_scene_batch(count, base_seed=0, ranges=None):
    """
    Generator form of :py:func:`scene_batch`, yields one
    :py:class:`SceneTruth` at a time

    :raises PotholeDetectorError: if **count** is below 1
    """
    if count is None or count < 1:
        raise PotholeDetectorError('count must be >= 1, got ' + str(count))
    for i in range(count):
        yield generate_scene(random_scene_spec(base_seed + i, ranges))


def scene_batch(count, base_seed=0, ranges=None):
    """
    Deterministic batch of **count** random scenes, scene ``i`` uses
    seed ``base_seed + i``

    :param count: number of scenes
    :type count: int
    :param base_seed: seed of the first scene
    :type base_seed: int
    :param ranges: randomisation ranges
    :type ranges: :py:class:`SceneRanges`
    :raises PotholeDetectorError: if **count** is below 1
    :rtype: list
    """
    return list(iter_scene_batch(count, base_seed=base_seed, ranges=ranges))


def format_spec(spec):
    """
    :return: ``key=value`` text of **spec**
    :rtype: str
    """
    lines = ['width=' + str(spec.width),
             'height=' + str(spec.height),
             'focal=' + repr(spec.rig.focal),
             'baseline=' + repr(spec.rig.baseline),
             'cu=' + repr(spec.rig.cu),
             'cv=' + repr(spec.rig.cv),
             'a0=' + repr(spec.a0),
             'a1=' + repr(spec.a1),
             'phi=' + repr(spec.phi),
             'seed=' + str(spec.seed),
             'noise_sigma=' + repr(spec.noise_sigma)]
    for i, p in enumerate(spec.potholes, start=1):
        lines.append('pothole_' + str(i) + '=' + ','.join(repr(float(x)) for x in
                                                         (p.u, p.v, p.ru, p.rv, p.depth)))
    return '\n'.join(lines) + '\n'


def parse_spec(text):
    """
    Parses text written by :py:func:`format_spec`

    :rtype: :py:class:`SceneSpec`
    """
    values = {}
    potholes = []
    for line in text.splitlines():
        line = line.strip()
        if line == '' or line.startswith('#'):
            continue
        if '=' not in line:
            raise PotholeDetectorError('Malformed scene spec line: ' + line)
        key, value = (x.strip() for x in line.split('=', 1))
        if key.startswith('pothole_'):
            parts = [float(x) for x in value.split(',')]
            if len(parts) != 5:
                raise PotholeDetectorError('Pothole needs u,v,ru,rv,depth: ' + line)
            potholes.append((int(key[len('pothole_'):]), Pothole(*parts)))
        else:
            values[key] = value
    try:
        rig = StereoRig(focal=float(values.pop('focal', 700.0)),
                        baseline=float(values.pop('baseline', 0.12)),
                        cu=float(values.pop('cu', 0.0)),
                        cv=float(values.pop('cv', 0.0)))
        return SceneSpec(width=int(values['width']), height=int(values['height']), rig=rig,
                         a0=float(values['a0']), a1=float(values['a1']),
                         phi=float(values.get('phi', 0.0)),
                         potholes=tuple(p for _, p in sorted(potholes, key=lambda x: x[0])),
                         seed=int(values.get('seed', 0)),
                         noise_sigma=float(values.get('noise_sigma', 0.0)))
    except (KeyError, ValueError) as e:
        raise PotholeDetectorError('Invalid scene spec: ' + str(e))


def write_scene(truth, directory):
    """
    Writes **truth** to **directory** as ``left.png``, ``right.png``,
    ``disp_gt.png``, ``mask_gt.png`` and ``spec.txt``

    :param truth: generated scene
    :type truth: :py:class:`SceneTruth`
    :param directory: destination, created if missing
    :type directory: str
    """
    os.makedirs(directory, mode=0o755, exist_ok=True)
    fileio.save_gray_image(truth.left, os.path.join(directory, LEFT_IMAGE))
    fileio.save_gray_image(truth.right, os.path.join(directory, RIGHT_IMAGE))
    fileio.save_disparity(truth.gt_disparity, os.path.join(directory, DISPARITY_GT))
    fileio.save_labels(truth.gt_mask, os.path.join(directory, MASK_GT))
    with open(os.path.join(directory, SCENE_SPEC), 'w') as f:
        f.write(format_spec(truth.spec))


def read_scene(directory):
    """
    Reads a scene written by :py:func:`write_scene`

    :param directory: scene directory
    :type directory: str
    :raises PotholeDetectorError: if a file is not found
    :rtype: :py:class:`SceneTruth`
    """
    spec_file = os.path.join(directory, SCENE_SPEC)
    if not os.path.isfile(spec_file):
        raise PotholeDetectorError('Scene spec not found: ' + spec_file)
    with open(spec_file, 'r') as f:
        spec = parse_spec(f.read())
    return SceneTruth(left=fileio.load_gray_image(os.path.join(directory, LEFT_IMAGE)),
                      right=fileio.load_gray_image(os.path.join(directory, RIGHT_IMAGE)),
                      gt_disparity=fileio.load_disparity(os.path.join(directory, DISPARITY_GT)),
                      gt_mask=fileio.load_labels(os.path.join(directory, MASK_GT)),
                      spec=spec)
