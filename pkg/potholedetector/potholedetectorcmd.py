#! /usr/bin/env python

import argparse
import sys
import logging
import logging.config

from cellmaps_utils import logutils
from cellmaps_utils import constants
import potholedetector
from potholedetector.exceptions import PotholeDetectorError
from potholedetector.exceptions import DegenerateFitError
from potholedetector.config import PipelineConfig
from potholedetector.runner import MultiProcessFrameProcessor
from potholedetector.runner import PotholeDetectionRunner
from potholedetector.runner import EvaluationRunner
from potholedetector.runner import SceneSynthesisRunner
from potholedetector.runner import BenchmarkRunner
from potholedetector.runner import DeltaPdTuner

logger = logging.getLogger(__name__)

DETECT_MODE = 'detect'
EVAL_MODE = 'eval'
SYNTH_MODE = 'synth'
BENCH_MODE = 'bench'
TUNE_MODE = 'tune'


def _eps_list(value):
    """
    Parses comma delimited list of tolerances

    :param value: for example ``1,2,3``
    :type value: str
    :rtype: list
    """
    try:
        eps = [float(x) for x in value.split(',') if x.strip() != '']
    except ValueError:
        raise argparse.ArgumentTypeError('Expected comma delimited numbers: ' + value)
    if len(eps) == 0:
        raise argparse.ArgumentTypeError('At least one tolerance is required')
    return eps


def _common_parser():
    """
    Gets parser holding the logging flags shared by every subcommand

    :rtype: :py:class:`argparse.ArgumentParser`
    """
    parser = argparse.ArgumentParser(add_help=False)
    parser.add_argument('--logconf', default=None,
                        help='Path to python logging configuration file in '
                             'this format: https://docs.python.org/3/library/'
                             'logging.config.html#logging-config-fileformat '
                             'Setting this overrides -v parameter which uses '
                             ' default logger. (default None)')
    parser.add_argument('--skip_logging', action='store_true',
                        help='If set, output.log, error.log '
                             'files will not be created')
    parser.add_argument('--verbose', '-v', action='count', default=1,
                        help='Increases verbosity of logger to standard '
                             'error for log messages in this module. Messages are '
                             'output at these python logging levels '
                             '-v = WARNING, -vv = INFO, '
                             '-vvv = DEBUG, -vvvv = NOTSET (default ERROR '
                             'logging)')
    return parser


def _add_config_arguments(parser):
    parser.add_argument('--config', default=None,
                        help='Path to configuration file of key=value lines, '
                             'flags below override values in this file')
    parser.add_argument('--delta_pd', type=float,
                        help='Pothole tolerance below the road disparity in pixels '
                             '(default ' + str(PipelineConfig.delta_pd) + ')')
    parser.add_argument('--delta_dt', type=float,
                        help='Offset added to transformed disparities '
                             '(default ' + str(PipelineConfig.delta_dt) + ')')
    parser.add_argument('--delta_pt', type=float,
                        help='Offset of the perspective transformation '
                             '(default ' + str(PipelineConfig.delta_pt) + ')')
    parser.add_argument('--d_max', type=int,
                        help='Largest disparity searched on the warped pair '
                             '(default ' + str(PipelineConfig.d_max) + ')')


def _add_workers_argument(parser):
    parser.add_argument('--workers', type=int,
                        default=MultiProcessFrameProcessor.POOL_SIZE,
                        help='Number of frames processed in parallel, '
                             '1 or less processes frames in this process')


def _parse_arguments(desc, args):
    """
    Parses command line arguments

    :param desc: description to display on command line
    :type desc: str
    :param args: command line arguments usually :py:func:`sys.argv[1:]`
    :type args: list
    :return: arguments parsed by :py:mod:`argparse`
    :rtype: :py:class:`argparse.Namespace`
    """
    parser = argparse.ArgumentParser(description=desc,
                                     formatter_class=constants.ArgParseFormatter)
    parser.add_argument('--version', action='version',
                        version=('%(prog)s ' +
                                 potholedetector.__version__))
    common = _common_parser()
    subparsers = parser.add_subparsers(dest='command',
                                       help='Command to run. '
                                            'Type <command> -h for more help')
    subparsers.required = True

    detect = subparsers.add_parser(DETECT_MODE, parents=[common],
                                   help='Detects potholes in a rectified '
                                        'stereo pair',
                                   formatter_class=constants.ArgParseFormatter)
    detect.add_argument('left', help='Left image, PNG or PGM')
    detect.add_argument('right', help='Right image, PNG or PGM')
    detect.add_argument('--out', required=True,
                        help='Directory to write results to')
    _add_config_arguments(detect)

    evaluate = subparsers.add_parser(EVAL_MODE, parents=[common],
                                     help='Scores detection outputs against '
                                          'ground truth',
                                     formatter_class=constants.ArgParseFormatter)
    evaluate.add_argument('pred_dir', help='Directory of detection outputs')
    evaluate.add_argument('gt_dir', help='Directory of ground truth')
    evaluate.add_argument('--eps', type=_eps_list, default=[1.0, 2.0, 3.0],
                          help='Comma delimited error pixel tolerances')
    evaluate.add_argument('--iou_min', type=float, default=PipelineConfig.iou_min,
                          help='Smallest IoU for an instance to count as correct')
    evaluate.add_argument('--out', default=None,
                          help='If set, metrics.jsonl and metrics.csv are '
                               'written to this directory')
    evaluate.add_argument('--config', default=None,
                          help='Configuration file whose focal, baseline, cu '
                               'and cv reproject ground truth potholes for the '
                               'closest distance error')

    synthesize = subparsers.add_parser(SYNTH_MODE, parents=[common],
                                       help='Writes synthetic stereo road '
                                            'scenes with ground truth',
                                       formatter_class=constants.ArgParseFormatter)
    synthesize.add_argument('--out', required=True,
                            help='Directory to write scenes to')
    synthesize.add_argument('--count', type=int, default=1,
                            help='Number of scenes')
    synthesize.add_argument('--seed', type=int, default=0,
                            help='Seed of the first scene, scene i uses seed + i')

    bench = subparsers.add_parser(BENCH_MODE, parents=[common],
                                  help='Runs detection and evaluation over '
                                       'a dataset of scenes',
                                  formatter_class=constants.ArgParseFormatter)
    bench.add_argument('dataset_dir', help='Directory of scene directories')
    bench.add_argument('--out', required=True,
                       help='Directory to write results to')
    bench.add_argument('--eps', type=_eps_list, default=[1.0, 2.0, 3.0],
                       help='Comma delimited error pixel tolerances')
    _add_config_arguments(bench)
    _add_workers_argument(bench)

    tune = subparsers.add_parser(TUNE_MODE, parents=[common],
                                 help='Searches the pothole tolerance giving '
                                      'the best F-score over synthetic scenes',
                                 formatter_class=constants.ArgParseFormatter)
    tune.add_argument('dataset_dir', help='Directory of scene directories')
    tune.add_argument('--out', required=True,
                      help='Directory to write results to')
    tune.add_argument('--delta_min', type=float, default=DeltaPdTuner.DELTA_MIN,
                      help='Smallest tolerance tried')
    tune.add_argument('--delta_max', type=float, default=DeltaPdTuner.DELTA_MAX,
                      help='Largest tolerance tried')
    tune.add_argument('--delta_step', type=float, default=DeltaPdTuner.DELTA_STEP,
                      help='Step between tolerances')
    _add_config_arguments(tune)
    _add_workers_argument(tune)

    return parser.parse_args(args)


def _load_config(theargs):
    """
    Builds configuration from ``--config`` file, if any, with the
    override flags applied

    :rtype: :py:class:`~potholedetector.config.PipelineConfig`
    """
    overrides = {'delta_pd': theargs.delta_pd, 'delta_dt': theargs.delta_dt,
                 'delta_pt': theargs.delta_pt, 'd_max': theargs.d_max}
    if theargs.config is not None:
        return PipelineConfig.from_file(theargs.config, **overrides)
    return PipelineConfig().updated(**overrides)


def _get_runner(theargs):
    """
    Gets runner for the subcommand in **theargs**

    :return: object with a ``run()`` method
    """
    if theargs.command == EVAL_MODE:
        config = (PipelineConfig.from_file(theargs.config) if theargs.config is not None
                  else PipelineConfig())
        return EvaluationRunner(pred_dir=theargs.pred_dir, gt_dir=theargs.gt_dir,
                                eps_list=theargs.eps, iou_min=theargs.iou_min,
                                outdir=theargs.out, config=config)
    if theargs.command == SYNTH_MODE:
        return SceneSynthesisRunner(outdir=theargs.out, count=theargs.count,
                                    seed=theargs.seed,
                                    skip_logging=theargs.skip_logging,
                                    input_data_dict=theargs.__dict__)
    config = _load_config(theargs)
    if theargs.command == DETECT_MODE:
        return PotholeDetectionRunner(outdir=theargs.out, left=theargs.left,
                                      right=theargs.right, config=config,
                                      skip_logging=theargs.skip_logging,
                                      input_data_dict=theargs.__dict__)
    processor = MultiProcessFrameProcessor(poolsize=theargs.workers)
    if theargs.command == BENCH_MODE:
        return BenchmarkRunner(outdir=theargs.out, dataset_dir=theargs.dataset_dir,
                               config=config, eps_list=theargs.eps,
                               processor=processor,
                               skip_logging=theargs.skip_logging,
                               input_data_dict=theargs.__dict__)
    if theargs.command == TUNE_MODE:
        return DeltaPdTuner(outdir=theargs.out, dataset_dir=theargs.dataset_dir,
                            config=config, delta_min=theargs.delta_min,
                            delta_max=theargs.delta_max,
                            delta_step=theargs.delta_step,
                            processor=processor,
                            skip_logging=theargs.skip_logging,
                            input_data_dict=theargs.__dict__)
    raise PotholeDetectorError('Unknown command: ' + str(theargs.command))


def main(args):
    """
    Main entry point for program

    :param args: arguments passed to command line usually :py:func:`sys.argv[1:]`
    :type args: list

    :return: return value of the ``run()`` method of the runner, ``1`` on
             usage, input or output errors and ``2`` if the road model
             could not be fitted
    :rtype: int
    """
    desc = """
Version {version}

Detects potholes in rectified stereo road images.

The {detect} command matches the left and right image with semi-global
matching after warping the right image by the road model, fits the road
disparity model and its roll angle, transforms the disparities so the
road is flat, clusters them in superpixels and labels the regions
lying below the road. Outputs are written to the --out directory.

The {evaluate} command scores a directory of {detect} outputs against
ground truth. Frames are subdirectories paired by name, ground truth
frames hold disp_gt.png and mask_gt.png. One JSON line is printed per
frame followed by the aggregate line.

The {synth} command writes synthetic scenes (left.png, right.png,
disp_gt.png, mask_gt.png, spec.txt) into scene_<index> subdirectories.

The {bench} command runs {detect} and {evaluate} over a directory of
scenes and prints mean stage runtimes and aggregate metrics.

The {tune} command sweeps the pothole tolerance over a directory of
synthetic scenes and reports the value with the highest F-score.

Exit codes: 0 success, 1 usage, input or output error, 2 degenerate
road model fit.
    """.format(version=potholedetector.__version__,
               detect=DETECT_MODE, evaluate=EVAL_MODE, synth=SYNTH_MODE,
               bench=BENCH_MODE, tune=TUNE_MODE)
    try:
        theargs = _parse_arguments(desc, args[1:])
    except SystemExit as se:
        return 0 if se.code in (0, None) else 1
    theargs.program = args[0]
    theargs.version = potholedetector.__version__

    try:
        logutils.setup_cmd_logging(theargs)
        return _get_runner(theargs).run()
    except DegenerateFitError as de:
        logger.exception('Degenerate road model fit: ' + str(de))
        return 2
    except Exception as e:
        logger.exception('Caught exception: ' + str(e))
        return 1
    finally:
        logging.shutdown()


if __name__ == '__main__':  # pragma: no cover
    sys.exit(main(sys.argv))
