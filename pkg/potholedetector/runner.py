#! /usr/bin/env python

import os
import sys
import glob
import json
import time
import logging
from multiprocessing import Pool

import numpy as np
import pandas as pd
from tqdm import tqdm
from cellmaps_utils import logutils

import potholedetector
from potholedetector.exceptions import PotholeDetectorError
from potholedetector.exceptions import DegenerateFitError
from potholedetector.config import PipelineConfig
from potholedetector import fileio
from potholedetector import synth
from potholedetector.pipeline import StageTimer
from potholedetector.pipeline import detect_frame
from potholedetector.pipeline import detect
from potholedetector.geometry import roll_energy_profile
from potholedetector.geometry import sample_observations
from potholedetector.geometry import reproject_mask
from potholedetector.geometry import merge_clouds
from potholedetector.geometry import PointCloud
from potholedetector.evaluation import frame_metrics
from potholedetector.evaluation import aggregate_metrics
from potholedetector.evaluation import pixel_metrics

logger = logging.getLogger(__name__)

D1_FILE = 'd1.png'
D2_FILE = 'd2.png'
LABELS_FILE = 'labels.png'
OVERLAY_FILE = 'overlay.png'
MANIFEST_FILE = 'manifest.json'
ROLL_ENERGY_FILE = 'roll_energy.csv'
POTHOLE_CLOUD_PREFIX = 'potholes_'
METRICS_FILE = 'metrics.jsonl'
METRICS_TABLE = 'metrics.csv'
TUNE_TABLE = 'delta_pd_sweep.csv'

DEFAULT_EPS = (1.0, 2.0, 3.0)

ROLL_PROFILE_STEP_DEGREES = 0.1


def _save_d2(d2, path):
    """
    Saves the transformed disparity map, clamped values of ``0`` are
    written as the smallest encodable disparity so they stay valid
    """
    values = d2.values.copy()
    values[d2.valid_mask] = np.maximum(values[d2.valid_mask], 1.0 / fileio.DISPARITY_SCALE)
    fileio.save_disparity(type(d2)(values), path)


def write_frame_outputs(result, left, outdir, config):
    """
    Writes disparity maps, labels, overlay, pothole point clouds and the
    roll energy profile of **result** to **outdir**

    :param result: processed frame
    :type result: :py:class:`~potholedetector.pipeline.FrameResult`
    :param left: left image used for the overlay
    :type left: :py:class:`~potholedetector.raster.GrayImage`
    :param outdir: destination directory
    :type outdir: str
    :param config: pipeline configuration
    :type config: :py:class:`~potholedetector.config.PipelineConfig`
    :return: paths written
    :rtype: list
    """
    outputs = []
    d1_file = os.path.join(outdir, D1_FILE)
    fileio.save_disparity(result.d1, d1_file)
    outputs.append(d1_file)

    d2_file = os.path.join(outdir, D2_FILE)
    _save_d2(result.d2, d2_file)
    outputs.append(d2_file)

    labels_file = os.path.join(outdir, LABELS_FILE)
    fileio.save_labels(result.labels, labels_file)
    outputs.append(labels_file)

    overlay_file = os.path.join(outdir, OVERLAY_FILE)
    fileio.save_overlay(left, result.labels, overlay_file)
    outputs.append(overlay_file)

    for label, cloud in result.clouds:
        cloud_file = os.path.join(outdir, POTHOLE_CLOUD_PREFIX + str(label) + '.ply')
        fileio.save_point_cloud(cloud, cloud_file)
        outputs.append(cloud_file)

    limit = config.roll_bracket
    degrees = np.arange(-limit, limit + ROLL_PROFILE_STEP_DEGREES / 2.0,
                        ROLL_PROFILE_STEP_DEGREES)
    energy = roll_energy_profile(sample_observations(result.d1), np.radians(degrees))
    roll_file = os.path.join(outdir, ROLL_ENERGY_FILE)
    pd.DataFrame({'phi_degrees': degrees, 'e0min': energy}).to_csv(roll_file, index=False)
    outputs.append(roll_file)
    return outputs


def process_frame(task):
    """
    Detects potholes in one stereo pair and writes its outputs and
    ``manifest.json``

    .. note::

        Default function used by :py:class:`MultiProcessFrameProcessor`
        for detection and benchmarking

    :param task: ``(frame name, left path, right path, output directory,
                 configuration dict)``
    :type task: tuple
    :return: manifest, ``status`` is ``0`` on success and ``2`` when the
             road fit was degenerate
    :rtype: dict
    """
    name, left_file, right_file, outdir, config_dict = task
    config = PipelineConfig.from_dict(config_dict)
    os.makedirs(outdir, mode=0o755, exist_ok=True)
    manifest_file = os.path.join(outdir, MANIFEST_FILE)
    manifest = {'frame': name,
                'inputs': {'left': left_file, 'right': right_file},
                'config': config.to_dict(),
                'stage_ms': {},
                'outputs': [],
                'warnings': [],
                'status': 0}
    start = time.perf_counter()
    load_times = {}
    timer = StageTimer(load_times)
    left = fileio.load_gray_image(left_file)
    right = fileio.load_gray_image(right_file)
    timer.lap('load')

    try:
        result = detect_frame(left, right, config)
    except DegenerateFitError as de:
        logger.error('Degenerate road fit for ' + name + ': ' + str(de))
        manifest['status'] = 2
        manifest['error'] = 'degenerate fit: ' + str(de)
        manifest['stage_ms'] = load_times
        manifest['total_ms'] = (time.perf_counter() - start) * 1000.0
        manifest['outputs'] = [manifest_file]
        _write_manifest(manifest, manifest_file)
        return manifest

    write_times = {}
    timer = StageTimer(write_times)
    outputs = write_frame_outputs(result, left, outdir, config)
    timer.lap('write')

    stage_ms = dict(load_times)
    stage_ms.update(result.stage_times)
    stage_ms.update(write_times)
    manifest['stage_ms'] = stage_ms
    manifest['total_ms'] = (time.perf_counter() - start) * 1000.0
    manifest['runtime_ms'] = result.runtime_ms
    manifest['road_model'] = {'a0': result.model.a0, 'a1': result.model.a1,
                              'phi': result.model.phi}
    manifest['threshold'] = {'t_r': result.threshold.t_r, 't_s': result.threshold.t_s,
                             'mu1': result.threshold.mu1, 'mu2': result.threshold.mu2,
                             'excluded_fraction': result.threshold.excluded_fraction,
                             'degenerate': result.threshold.degenerate}
    manifest['clamped'] = result.clamped
    manifest['potholes'] = len(result.clouds)
    manifest['regions'] = [{'label': r.label, 'road': r.road, 'level': r.level,
                            'depth': r.depth, 'area': r.area} for r in result.regions]
    manifest['warnings'] = list(result.warnings)
    manifest['outputs'] = outputs + [manifest_file]
    _write_manifest(manifest, manifest_file)
    return manifest


def _write_manifest(manifest, path):
    with open(path, 'w') as f:
        f.write(json.dumps(manifest) + '\n')


def sweep_frame(task):
    """
    Runs the pipeline once on a frame and repeats only the detection step
    for every pothole tolerance

    :param task: ``(frame name, scene directory, configuration dict,
                 list of delta_pd)``
    :type task: tuple
    :return: one dict per tolerance with ``frame``, ``delta_pd``,
             ``accuracy`` and ``fscore``, empty if the road fit was degenerate
    :rtype: list
    """
    name, scene_dir, config_dict, deltas = task
    config = PipelineConfig.from_dict(config_dict)
    truth = synth.read_scene(scene_dir)
    try:
        result = detect_frame(truth.left, truth.right, config)
    except DegenerateFitError as de:
        logger.error('Skipping ' + name + ', degenerate road fit: ' + str(de))
        return []
    rows = []
    for delta_pd in deltas:
        report = pixel_metrics(detect(result, config, delta_pd=delta_pd), truth.gt_mask)
        rows.append({'frame': name, 'delta_pd': float(delta_pd),
                     'accuracy': report.accuracy, 'fscore': report.fscore})
    return rows


class FrameProcessor(object):
    """
    Abstract class that defines interface for classes that run a
    function over frames
    """

    def __init__(self):
        """

        """
        pass

    def process(self, func, tasks):
        """
        Subclasses should implement

        :param func: function taking one task
        :param tasks: tasks to run
        :type tasks: list
        :return: results of **func**
        :rtype: list
        """
        raise PotholeDetectorError('Subclasses should implement this')


class MultiProcessFrameProcessor(FrameProcessor):
    """
    Uses multiprocess package to process frames in parallel, or in this
    process when pool size is ``1`` or less
    """
    POOL_SIZE = 1

    def __init__(self, poolsize=POOL_SIZE, desc='Frames'):
        """
        Constructor

        :param poolsize: Number of concurrent worker processes
        :type poolsize: int
        :param desc: label of the progress bar
        :type desc: str
        """
        super().__init__()
        self._poolsize = poolsize
        self._desc = desc

    def process(self, func, tasks):
        """
        Runs **func** on every task returning the results in completion
        order

        .. code-block::

            from potholedetector.runner import MultiProcessFrameProcessor
            from potholedetector.runner import process_frame

            processor = MultiProcessFrameProcessor(poolsize=2)
            manifests = processor.process(process_frame, tasks)

        :param func: module level function taking one task
        :param tasks: tasks to run
        :type tasks: list
        :rtype: list
        """
        logger.debug('Poolsize for frame processor set to: ' +
                     str(self._poolsize))
        logger.info(str(len(tasks)) + ' frames to process')
        results = []
        t = tqdm(total=len(tasks), desc=self._desc, unit='frames')
        if self._poolsize is None or self._poolsize <= 1:
            for entry in tasks:
                results.append(func(entry))
                t.update()
        else:
            with Pool(processes=self._poolsize) as pool:
                for res in pool.imap_unordered(func, tasks):
                    results.append(res)
                    t.update()
        t.close()
        return results


def list_scene_dirs(dataset_dir, required=(synth.LEFT_IMAGE, synth.RIGHT_IMAGE)):
    """
    Gets sorted names of the subdirectories of **dataset_dir** that
    contain every file in **required**

    :param dataset_dir: directory holding one subdirectory per frame
    :type dataset_dir: str
    :raises PotholeDetectorError: if **dataset_dir** is not a directory
    :rtype: list
    """
    if dataset_dir is None or not os.path.isdir(dataset_dir):
        raise PotholeDetectorError('Directory not found: ' + str(dataset_dir))
    names = []
    for entry in sorted(os.listdir(dataset_dir)):
        path = os.path.join(dataset_dir, entry)
        if not os.path.isdir(path):
            continue
        if all(os.path.isfile(os.path.join(path, r)) for r in required):
            names.append(entry)
    return names


class PotholeDetectorRunner(object):
    """
    Base of the runners that write into an output directory. Handles
    directory creation, file logging, ``README.txt`` and the task
    start and finish json files
    """

    def __init__(self, outdir=None, skip_logging=True, input_data_dict=None):
        """
        Constructor

        :param outdir: directory where results are written
        :type outdir: str
        :param skip_logging: If ``True`` skip logging, if ``None`` or ``False`` do NOT skip logging
        :type skip_logging: bool
        :param input_data_dict: command line arguments recorded in task start json
        :type input_data_dict: dict
        """
        if outdir is None:
            raise PotholeDetectorError('outdir is None')
        self._outdir = os.path.abspath(outdir)
        self._start_time = int(time.time())
        self._end_time = -1
        if skip_logging is None:
            self._skip_logging = False
        else:
            self._skip_logging = skip_logging
        self._input_data_dict = input_data_dict

    def get_outdir(self):
        return self._outdir

    def _create_output_directory(self):
        """
        Creates output directory if it does not already exist
        """
        if not os.path.isdir(self._outdir):
            logger.debug('Creating directory: ' + self._outdir)
            os.makedirs(self._outdir, mode=0o755)

    def _write_task_start_json(self):
        """
        Writes task_start.json file with information about
        what is to be run
        """
        data = {'runner': type(self).__name__}
        if self._input_data_dict is not None:
            data.update({'commandlineargs': self._input_data_dict})
        logutils.write_task_start_json(outdir=self._outdir,
                                       start_time=self._start_time,
                                       version=potholedetector.__version__,
                                       data=data)

    def generate_readme(self):
        description = getattr(potholedetector, '__description__', 'No description provided.')
        version = getattr(potholedetector, '__version__', '0.0.0')

        with open(os.path.join(os.path.dirname(__file__), 'readme_outputs.txt'), 'r') as f:
            readme_outputs = f.read()

        readme = readme_outputs.format(DESCRIPTION=description, VERSION=version)
        with open(os.path.join(self._outdir, 'README.txt'), 'w') as f:
            f.write(readme)

    def _run(self):
        """
        Subclasses should implement

        :return: exit code
        :rtype: int
        """
        raise PotholeDetectorError('Subclasses should implement this')

    def run(self):
        """
        Runs the task, writing task start and finish json around it

        :raises PotholeDetectorError: If there is an error
        :return: 0 upon success, otherwise failure
        """
        exitcode = 99
        try:
            self._create_output_directory()
            if self._skip_logging is False:
                logutils.setup_filelogger(outdir=self._outdir,
                                          handlerprefix='potholedetector')
            self._write_task_start_json()
            self.generate_readme()
            exitcode = self._run()
            return exitcode
        finally:
            self._end_time = int(time.time())
            # write a task finish file
            logutils.write_task_finish_json(outdir=self._outdir,
                                            start_time=self._start_time,
                                            end_time=self._end_time,
                                            status=exitcode)


class PotholeDetectionRunner(PotholeDetectorRunner):
    """
    Detects potholes in a single rectified stereo pair
    """

    def __init__(self, outdir=None, left=None, right=None,
                 config=None, skip_logging=True, input_data_dict=None):
        """
        Constructor

        :param outdir: directory where results are written
        :type outdir: str
        :param left: path to left image
        :type left: str
        :param right: path to right image
        :type right: str
        :param config: pipeline configuration, defaults if ``None``
        :type config: :py:class:`~potholedetector.config.PipelineConfig`
        """
        super().__init__(outdir=outdir, skip_logging=skip_logging,
                         input_data_dict=input_data_dict)
        self._left = left
        self._right = right
        self._config = config if config is not None else PipelineConfig()
        self._manifest = None

    def get_manifest(self):
        """
        :return: manifest of the last run or ``None``
        :rtype: dict
        """
        return self._manifest

    def _run(self):
        for path in (self._left, self._right):
            if path is None or not os.path.isfile(path):
                raise PotholeDetectorError('Input image not found: ' + str(path))
        name = os.path.basename(self._outdir)
        self._manifest = process_frame((name, os.path.abspath(self._left),
                                        os.path.abspath(self._right),
                                        self._outdir, self._config.to_dict()))
        for warning in self._manifest['warnings']:
            logger.warning(warning)
        return self._manifest['status']


class SceneSynthesisRunner(PotholeDetectorRunner):
    """
    Writes a batch of synthetic stereo road scenes, one subdirectory per
    scene named ``scene_<index>``
    """

    def __init__(self, outdir=None, count=1, seed=0, ranges=None,
                 skip_logging=True, input_data_dict=None):
        """
        Constructor

        :param count: number of scenes
        :type count: int
        :param seed: seed of the first scene
        :type seed: int
        :param ranges: randomisation ranges
        :type ranges: :py:class:`~potholedetector.synth.SceneRanges`
        """
        if count is None or count < 1:
            raise PotholeDetectorError('count must be >= 1, got ' + str(count))
        super().__init__(outdir=outdir, skip_logging=skip_logging,
                         input_data_dict=input_data_dict)
        self._count = count
        self._seed = seed
        self._ranges = ranges

    def _run(self):
        t = tqdm(total=self._count, desc='Synthesize', unit='scenes')
        scenes = synth.iter_scene_batch(self._count, base_seed=self._seed,
                                        ranges=self._ranges)
        for i, truth in enumerate(scenes):
            synth.write_scene(truth, os.path.join(self._outdir, 'scene_%04d' % i))
            t.update()
        t.close()
        return 0


class EvaluationRunner(object):
    """
    Scores detection outputs against ground truth. Frames are
    subdirectories paired by name, prediction frames hold ``d1.png``
    and ``labels.png``, ground truth frames ``disp_gt.png`` and
    ``mask_gt.png``. A directory holding those files directly is
    treated as a single frame
    """

    def __init__(self, pred_dir=None, gt_dir=None, eps_list=DEFAULT_EPS,
                 iou_min=0.5, outdir=None, stream=None, config=None):
        """
        Constructor

        :param pred_dir: directory of predictions
        :type pred_dir: str
        :param gt_dir: directory of ground truth
        :type gt_dir: str
        :param eps_list: error pixel tolerances
        :type eps_list: list
        :param iou_min: instance matching threshold
        :type iou_min: float
        :param outdir: if set, ``metrics.jsonl`` and ``metrics.csv`` are
                       written there
        :type outdir: str
        :param stream: where JSON lines are written, standard out if ``None``
        :param config: configuration whose stereo rig reprojects ground truth
                       potholes, defaults if ``None``
        :type config: :py:class:`~potholedetector.config.PipelineConfig`
        """
        self._pred_dir = pred_dir
        self._gt_dir = gt_dir
        self._eps_list = list(eps_list)
        self._iou_min = iou_min
        self._outdir = outdir
        self._stream = stream
        self._config = config if config is not None else PipelineConfig()

    def _get_frame_pairs(self):
        """
        :raises PotholeDetectorError: if no ground truth frame is found
        :return: list of (name, pred dir, gt dir)
        :rtype: list
        """
        gt_required = (synth.DISPARITY_GT, synth.MASK_GT)
        pred_required = (D1_FILE, LABELS_FILE)
        if self._gt_dir is not None and all(os.path.isfile(os.path.join(self._gt_dir, r))
                                            for r in gt_required):
            return [(os.path.basename(os.path.normpath(self._gt_dir)),
                     self._pred_dir, self._gt_dir)]
        gt_names = list_scene_dirs(self._gt_dir, required=gt_required)
        if len(gt_names) == 0:
            raise PotholeDetectorError('No ground truth frames found in ' + str(self._gt_dir))
        pred_names = set(list_scene_dirs(self._pred_dir, required=pred_required))
        pairs = []
        for name in gt_names:
            if name not in pred_names:
                logger.warning('No prediction for frame ' + name + ', skipping')
                continue
            pairs.append((name, os.path.join(self._pred_dir, name),
                          os.path.join(self._gt_dir, name)))
        for name in sorted(pred_names.difference(gt_names)):
            logger.warning('No ground truth for frame ' + name + ', skipping')
        if len(pairs) == 0:
            raise PotholeDetectorError('No paired frames between ' + str(self._pred_dir) +
                                       ' and ' + str(self._gt_dir))
        return pairs

    @staticmethod
    def _get_runtime(pred_dir):
        manifest_file = os.path.join(pred_dir, MANIFEST_FILE)
        if not os.path.isfile(manifest_file):
            return None
        with open(manifest_file, 'r') as f:
            return json.loads(f.readline()).get('total_ms')

    @staticmethod
    def _load_pothole_clouds(pred_dir):
        """
        :return: every ``potholes_<label>.ply`` cloud of **pred_dir** merged
        :rtype: :py:class:`~potholedetector.geometry.PointCloud`
        """
        paths = sorted(glob.glob(os.path.join(pred_dir, POTHOLE_CLOUD_PREFIX + '*.ply')))
        return merge_clouds([PointCloud(fileio.load_point_cloud(p)) for p in paths])

    def evaluate_frame(self, name, pred_dir, gt_dir):
        """
        :return: metrics of one frame with its name under key ``frame``
        :rtype: dict
        """
        gt_disp = fileio.load_disparity(os.path.join(gt_dir, synth.DISPARITY_GT))
        gt_mask = fileio.load_labels(os.path.join(gt_dir, synth.MASK_GT))
        rig = self._config.stereo_rig(gt_disp.width, gt_disp.height)
        row = {'frame': name}
        row.update(frame_metrics(fileio.load_disparity(os.path.join(pred_dir, D1_FILE)),
                                 gt_disp,
                                 fileio.load_labels(os.path.join(pred_dir, LABELS_FILE)),
                                 gt_mask,
                                 eps_list=self._eps_list, iou_min=self._iou_min,
                                 runtime_ms=self._get_runtime(pred_dir),
                                 est_cloud=self._load_pothole_clouds(pred_dir),
                                 gt_cloud=reproject_mask(gt_disp, gt_mask, rig)))
        return row

    def evaluate(self):
        """
        :return: (per frame rows, aggregate row)
        :rtype: tuple
        """
        rows = [self.evaluate_frame(*pair) for pair in self._get_frame_pairs()]
        aggregate = {'frame': 'aggregate'}
        aggregate.update(aggregate_metrics([{k: v for k, v in r.items() if k != 'frame'}
                                            for r in rows]))
        return rows, aggregate

    def run(self):
        """
        Writes one JSON line per frame then the aggregate line

        :return: 0 upon success
        :rtype: int
        """
        rows, aggregate = self.evaluate()
        self.write_results(rows, aggregate)
        return 0

    def write_results(self, rows, aggregate):
        """
        Writes **rows** and **aggregate** as JSON lines to the stream and,
        when an output directory is set, to ``metrics.jsonl`` and
        ``metrics.csv``
        """
        lines = [json.dumps(r) for r in rows + [aggregate]]
        stream = self._stream if self._stream is not None else sys.stdout
        for line in lines:
            stream.write(line + '\n')
        if self._outdir is not None:
            os.makedirs(self._outdir, mode=0o755, exist_ok=True)
            with open(os.path.join(self._outdir, METRICS_FILE), 'w') as f:
                f.write('\n'.join(lines) + '\n')
            pd.DataFrame(rows + [aggregate]).to_csv(os.path.join(self._outdir, METRICS_TABLE),
                                                    index=False)


class BenchmarkRunner(PotholeDetectorRunner):
    """
    Runs detection and evaluation over every scene of a dataset
    directory, reporting mean stage runtimes and the aggregate metrics
    """

    def __init__(self, outdir=None, dataset_dir=None, config=None,
                 eps_list=DEFAULT_EPS, processor=None, stream=None,
                 skip_logging=True, input_data_dict=None):
        """
        Constructor

        :param dataset_dir: directory of scenes as written by
                            :py:class:`SceneSynthesisRunner`
        :type dataset_dir: str
        :param processor: runs frames, sequential if ``None``
        :type processor: :py:class:`FrameProcessor`
        """
        super().__init__(outdir=outdir, skip_logging=skip_logging,
                         input_data_dict=input_data_dict)
        self._dataset_dir = dataset_dir
        self._config = config if config is not None else PipelineConfig()
        self._eps_list = list(eps_list)
        self._processor = processor if processor is not None else MultiProcessFrameProcessor()
        self._stream = stream

    def _run(self):
        names = list_scene_dirs(self._dataset_dir)
        if len(names) == 0:
            raise PotholeDetectorError('No scenes found in ' + str(self._dataset_dir))
        tasks = [(name, os.path.join(self._dataset_dir, name, synth.LEFT_IMAGE),
                  os.path.join(self._dataset_dir, name, synth.RIGHT_IMAGE),
                  os.path.join(self._outdir, name), self._config.to_dict())
                 for name in names]
        manifests = sorted(self._processor.process(process_frame, tasks),
                           key=lambda m: m['frame'])
        degenerate = [m['frame'] for m in manifests if m['status'] != 0]
        for name in degenerate:
            logger.warning('Degenerate road fit, frame ' + name + ' not evaluated')
        if len(degenerate) == len(manifests):
            raise DegenerateFitError('Road fit degenerate on every frame')

        stages = pd.DataFrame([m['stage_ms'] for m in manifests if m['status'] == 0])
        stage_means = {k: float(v) for k, v in stages.mean().items()}

        evaluator = EvaluationRunner(pred_dir=self._outdir, gt_dir=self._dataset_dir,
                                     eps_list=self._eps_list,
                                     iou_min=self._config.iou_min,
                                     outdir=self._outdir, stream=self._stream,
                                     config=self._config)
        rows, aggregate = evaluator.evaluate()
        evaluator.write_results(rows, aggregate)
        summary = {'stage_ms_mean': stage_means, 'aggregate': aggregate,
                   'degenerate_frames': degenerate}
        stream = self._stream if self._stream is not None else sys.stdout
        stream.write(json.dumps(summary) + '\n')
        with open(os.path.join(self._outdir, 'benchmark.json'), 'w') as f:
            f.write(json.dumps(summary) + '\n')
        return 0


class DeltaPdTuner(PotholeDetectorRunner):
    """
    Brute force search of the pothole tolerance ``delta_pd`` over a
    dataset of synthetic scenes, keeping the value with the highest
    mean F-score (ties broken by accuracy)
    """

    DELTA_MIN = 0.2
    DELTA_MAX = 3.0
    DELTA_STEP = 0.02

    def __init__(self, outdir=None, dataset_dir=None, config=None,
                 delta_min=DELTA_MIN, delta_max=DELTA_MAX, delta_step=DELTA_STEP,
                 processor=None, stream=None, skip_logging=True,
                 input_data_dict=None):
        super().__init__(outdir=outdir, skip_logging=skip_logging,
                         input_data_dict=input_data_dict)
        if not delta_step > 0 or delta_max < delta_min:
            raise PotholeDetectorError('Invalid delta_pd range ' + str(delta_min) + ' to ' +
                                       str(delta_max) + ' step ' + str(delta_step))
        self._dataset_dir = dataset_dir
        self._config = config if config is not None else PipelineConfig()
        count = int(np.floor((delta_max - delta_min) / delta_step + 1e-9)) + 1
        self._deltas = [round(delta_min + i * delta_step, 10) for i in range(count)]
        self._processor = processor if processor is not None else MultiProcessFrameProcessor()
        self._stream = stream
        self._best = None

    def get_best(self):
        """
        :return: best row with ``delta_pd``, ``accuracy`` and ``fscore``
                 of the last run
        :rtype: dict
        """
        return self._best

    def _run(self):
        names = list_scene_dirs(self._dataset_dir,
                                required=(synth.LEFT_IMAGE, synth.RIGHT_IMAGE,
                                          synth.MASK_GT, synth.SCENE_SPEC))
        if len(names) == 0:
            raise PotholeDetectorError('No scenes found in ' + str(self._dataset_dir))
        tasks = [(name, os.path.join(self._dataset_dir, name), self._config.to_dict(),
                  self._deltas) for name in names]
        rows = [row for frame in self._processor.process(sweep_frame, tasks) for row in frame]
        if len(rows) == 0:
            raise DegenerateFitError('Road fit degenerate on every frame')
        table = pd.DataFrame(rows).groupby('delta_pd', as_index=False)[
            ['accuracy', 'fscore']].mean()
        table.to_csv(os.path.join(self._outdir, TUNE_TABLE), index=False)
        best = table.sort_values(['fscore', 'accuracy', 'delta_pd'],
                                 ascending=[False, False, True]).iloc[0]
        self._best = {'delta_pd': float(best['delta_pd']),
                      'accuracy': float(best['accuracy']),
                      'fscore': float(best['fscore'])}
        stream = self._stream if self._stream is not None else sys.stdout
        stream.write(table.to_string(index=False) + '\n')
        stream.write(json.dumps({'best': self._best}) + '\n')
        return 0
