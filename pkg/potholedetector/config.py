import os
import logging
import dataclasses
from dataclasses import dataclass

from potholedetector.exceptions import PotholeDetectorError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class StereoRig:
    """
    Rectified stereo rig intrinsics needed to reproject disparities

    :param focal: focal length in pixels
    :param baseline: baseline in meters
    :param cu: principal point column in pixels
    :param cv: principal point row in pixels
    """
    focal: float = 700.0
    baseline: float = 0.12
    cu: float = 0.0
    cv: float = 0.0

    def __post_init__(self):
        if not self.focal > 0:
            raise PotholeDetectorError('focal length must be > 0, got ' +
                                       str(self.focal))
        if not self.baseline > 0:
            raise PotholeDetectorError('baseline must be > 0, got ' +
                                       str(self.baseline))


@dataclass(frozen=True)
class PipelineConfig:
    """
    Every tunable of the pothole detection pipeline

    Values can be loaded from a flat ``key=value`` file via
    :py:meth:`from_file` where each key must exactly match
    one of the field names below.
    """
    delta_pt: float = 5.0
    delta_dt: float = 30.0
    delta_pd: float = 0.6
    d_max: int = 32
    lambda1: float = 8.0
    lambda2: float = 32.0
    census_window: int = 5
    lr_threshold: float = 1.0
    uniqueness_ratio: float = 0.0
    slic_count: int = 1000
    slic_compactness: float = 2.0
    slic_iterations: int = 10
    histogram_bin_width: float = 0.25
    diagonal_band: float = 3.0
    border_margin: int = 5
    connectivity: int = 8
    min_superpixels: int = 2
    refine_radius: float = 1.5
    smoothing_window: int = 7
    refine_tolerance: float = 0.15
    refine_mad_factor: float = 3.0
    min_depth: float = 1.0
    roll_bracket: float = 15.0
    roll_tol: float = 1e-4
    trim_factor: float = 3.0
    init_scale: int = 4
    init_d_max: int = 128
    iou_min: float = 0.5
    focal: float = 700.0
    baseline: float = 0.12
    cu: float = -1.0
    cv: float = -1.0

    def __post_init__(self):
        if self.delta_pt < 0:
            raise PotholeDetectorError('delta_pt must be >= 0')
        if not self.delta_dt > 0:
            raise PotholeDetectorError('delta_dt must be > 0')
        if not self.delta_pd > 0:
            raise PotholeDetectorError('delta_pd must be > 0')
        if not 0 < self.lambda1 <= self.lambda2:
            raise PotholeDetectorError('penalties must satisfy 0 < lambda1 <= lambda2')
        if self.d_max < 1:
            raise PotholeDetectorError('d_max must be >= 1')
        if self.slic_count < 4:
            raise PotholeDetectorError('slic_count must be >= 4')
        if self.census_window not in (3, 5, 7):
            raise PotholeDetectorError('census_window must be one of 3, 5, 7')
        if self.connectivity not in (4, 8):
            raise PotholeDetectorError('connectivity must be 4 or 8')
        if not self.histogram_bin_width > 0:
            raise PotholeDetectorError('histogram_bin_width must be > 0')
        if self.init_scale < 1:
            raise PotholeDetectorError('init_scale must be >= 1')
        if not self.roll_tol > 0:
            raise PotholeDetectorError('roll_tol must be > 0')
        if not 0 < self.roll_bracket <= 45.0:
            raise PotholeDetectorError('roll_bracket must be in (0, 45] degrees')
        if self.refine_radius < 0:
            raise PotholeDetectorError('refine_radius must be >= 0')
        if self.smoothing_window < 1 or self.smoothing_window % 2 == 0:
            raise PotholeDetectorError('smoothing_window must be a positive odd number')
        if self.refine_tolerance < 0 or self.min_depth < 0:
            raise PotholeDetectorError('refine_tolerance and min_depth must be >= 0')

    @staticmethod
    def field_types():
        """
        :return: field name to python type of that field
        :rtype: dict
        """
        return {f.name: f.type for f in dataclasses.fields(PipelineConfig)}

    @classmethod
    def from_file(cls, path, **overrides):
        """
        Loads configuration from a flat ``key=value`` text file.
        Blank lines and lines starting with ``#`` are ignored.

        :param path: path to configuration file
        :type path: str
        :param overrides: values that take precedence over the file
        :raises PotholeDetectorError: if file is missing, a line is
                                      malformed or a key is unknown
        :return: validated configuration
        :rtype: :py:class:`PipelineConfig`
        """
        if path is None or not os.path.isfile(path):
            raise PotholeDetectorError('Config file not found: ' + str(path))
        values = {}
        with open(path, 'r') as f:
            for lineno, line in enumerate(f, start=1):
                line = line.strip()
                if line == '' or line.startswith('#'):
                    continue
                if '=' not in line:
                    raise PotholeDetectorError('Malformed line ' + str(lineno) +
                                               ' in ' + path + ': ' + line)
                key, value = line.split('=', 1)
                values[key.strip()] = value.strip()
        values.update({k: v for k, v in overrides.items() if v is not None})
        logger.debug('Loaded ' + str(len(values)) + ' config values from ' + path)
        return cls.from_dict(values)

    @classmethod
    def from_dict(cls, values):
        """
        Builds configuration from a dict whose values may be strings

        :param values: field name to value
        :type values: dict
        :rtype: :py:class:`PipelineConfig`
        """
        types = cls.field_types()
        kwargs = {}
        for key, value in values.items():
            if key not in types:
                raise PotholeDetectorError('Unknown config key: ' + str(key))
            try:
                kwargs[key] = types[key](value)
            except ValueError as ve:
                raise PotholeDetectorError('Invalid value for ' + key + ': ' +
                                           str(ve))
        return cls(**kwargs)

    def updated(self, **overrides):
        """
        Gets a copy with the non ``None`` **overrides** applied

        :rtype: :py:class:`PipelineConfig`
        """
        values = self.to_dict()
        values.update({k: v for k, v in overrides.items() if v is not None})
        return PipelineConfig.from_dict(values)

    def to_dict(self):
        return dataclasses.asdict(self)

    def stereo_rig(self, width, height):
        """
        Builds the stereo rig, a negative principal point coordinate
        means the image centre

        :param width: image width in pixels
        :type width: int
        :param height: image height in pixels
        :type height: int
        :rtype: :py:class:`StereoRig`
        """
        cu = self.cu if self.cu >= 0 else (width - 1) / 2.0
        cv = self.cv if self.cv >= 0 else (height - 1) / 2.0
        return StereoRig(focal=self.focal, baseline=self.baseline,
                         cu=cu, cv=cv)
