import os
import re
import logging

import numpy as np
from PIL import Image

from potholedetector.exceptions import PotholeDetectorError
from potholedetector.exceptions import RasterFormatError
from potholedetector.raster import GrayImage
from potholedetector.raster import DisparityMap
from potholedetector.raster import LabelMap
from potholedetector.raster import INVALID_DISPARITY
from potholedetector.raster import check_same_shape

logger = logging.getLogger(__name__)

DISPARITY_SCALE = 256.0
"""
Stored 16-bit value = round(disparity * 256), stored 0 means invalid
"""

MAX_STORED = 65535

LUMINANCE_WEIGHTS = (0.299, 0.587, 0.114)

OVERLAY_PALETTE = [(255, 255, 255), (230, 25, 75), (60, 180, 75),
                   (255, 225, 25), (0, 130, 200), (245, 130, 48),
                   (145, 30, 180), (70, 240, 240), (240, 50, 230),
                   (210, 245, 60), (250, 190, 190), (0, 128, 128)]
"""
Twelve tint colors, label ``k`` uses entry ``k % 12``
"""

OVERLAY_ALPHA = 0.5

_PGM_HEADER = re.compile(rb'^P5\s+(?:#[^\n]*\n\s*)*(\d+)\s+(?:#[^\n]*\n\s*)*(\d+)'
                         rb'\s+(?:#[^\n]*\n\s*)*(\d+)\s')


def _check_exists(path):
    if path is None or not os.path.isfile(path):
        raise PotholeDetectorError('File not found: ' + str(path))


def _is_pgm(path):
    return str(path).lower().endswith('.pgm')


def _check_writable_suffix(path):
    lower = str(path).lower()
    if not (lower.endswith('.png') or lower.endswith('.pgm')):
        raise RasterFormatError('Unsupported raster file suffix: ' + str(path))


def read_pgm(path):
    """
    Reads a binary ``P5`` PGM file

    :param path: path to PGM file
    :type path: str
    :raises RasterFormatError: if header is invalid or data is truncated
    :return: (pixel array ``uint8`` or ``uint16``, maxval)
    :rtype: tuple
    """
    with open(path, 'rb') as f:
        data = f.read()
    match = _PGM_HEADER.match(data)
    if match is None:
        raise RasterFormatError('Invalid PGM header in ' + str(path))
    width, height, maxval = (int(x) for x in match.groups())
    if maxval < 1 or maxval > MAX_STORED:
        raise RasterFormatError('Unsupported PGM maxval ' + str(maxval))
    dtype = np.dtype('u1') if maxval < 256 else np.dtype('>u2')
    expected = width * height * dtype.itemsize
    raster = data[match.end():match.end() + expected]
    if len(raster) != expected:
        raise RasterFormatError('Truncated PGM data in ' + str(path))
    arr = np.frombuffer(raster, dtype=dtype).reshape(height, width)
    return arr.astype(np.uint8 if maxval < 256 else np.uint16), maxval


def write_pgm(arr, path):
    """
    Writes **arr** as a canonical binary PGM. ``uint16`` arrays are
    written big-endian with maxval ``65535``

    :param arr: 2D ``uint8`` or ``uint16`` array
    :type arr: :py:class:`numpy.ndarray`
    :param path: destination path
    :type path: str
    """
    if arr.dtype == np.uint8:
        maxval = 255
        raster = arr.tobytes()
    else:
        maxval = MAX_STORED
        raster = arr.astype('>u2').tobytes()
    header = 'P5\n' + str(arr.shape[1]) + ' ' + str(arr.shape[0]) + '\n' + str(maxval) + '\n'
    with open(path, 'wb') as f:
        f.write(header.encode('ascii'))
        f.write(raster)


def _read_png(path):
    try:
        with Image.open(path) as img:
            img.load()
            return img.mode, img
    except (OSError, ValueError) as e:
        raise RasterFormatError('Unable to read ' + str(path) + ': ' + str(e))


def _to_luminance(rgb):
    rgb = np.asarray(rgb, dtype=np.float64)
    return (LUMINANCE_WEIGHTS[0] * rgb[:, :, 0] +
            LUMINANCE_WEIGHTS[1] * rgb[:, :, 1] +
            LUMINANCE_WEIGHTS[2] * rgb[:, :, 2])


def load_gray_image(path):
    """
    Loads an 8-bit grayscale or RGB PNG, or an 8-bit PGM, as a
    :py:class:`~potholedetector.raster.GrayImage`. RGB input is
    converted with luminance weights ``0.299, 0.587, 0.114``

    :param path: path to image
    :type path: str
    :raises PotholeDetectorError: if file is not found
    :raises RasterFormatError: for unsupported bit depths or too small images
    :rtype: :py:class:`~potholedetector.raster.GrayImage`
    """
    _check_exists(path)
    if _is_pgm(path):
        arr, maxval = read_pgm(path)
        if maxval > 255:
            raise RasterFormatError('Unsupported bit depth: 16-bit PGM given for ' +
                                    'a grayscale image ' + str(path))
        return GrayImage(arr.astype(np.float64))

    mode, img = _read_png(path)
    if mode == 'L':
        pixels = np.asarray(img, dtype=np.float64)
    elif mode in ('RGB', 'RGBA', 'P', 'LA'):
        pixels = _to_luminance(np.asarray(img.convert('RGB')))
    else:
        raise RasterFormatError('Unsupported bit depth (mode ' + mode + ') in ' + str(path))
    logger.debug('Loaded ' + str(path) + ' mode ' + mode + ' shape ' + str(pixels.shape))
    return GrayImage(pixels)


def save_gray_image(image, path):
    """
    Saves **image** as 8-bit PNG or canonical PGM, intensities rounded
    and clipped to ``[0, 255]``

    :param image: image to save
    :type image: :py:class:`~potholedetector.raster.GrayImage`
    :param path: destination ending in ``.png`` or ``.pgm``
    :type path: str
    """
    _check_writable_suffix(path)
    arr = np.clip(np.rint(image.pixels), 0, 255).astype(np.uint8)
    if _is_pgm(path):
        write_pgm(arr, path)
    else:
        Image.fromarray(arr).save(path)


def _load_uint16(path, what):
    _check_exists(path)
    if _is_pgm(path):
        arr, maxval = read_pgm(path)
        if maxval < 256:
            raise RasterFormatError('8-bit ' + what + ' input rejected, 16-bit required: ' +
                                    str(path))
        return arr
    mode, img = _read_png(path)
    if mode in ('L', 'P', 'RGB', 'RGBA', 'LA', '1'):
        raise RasterFormatError('8-bit ' + what + ' input rejected, 16-bit required: ' +
                                str(path))
    if not mode.startswith('I'):
        raise RasterFormatError('Unsupported ' + what + ' mode ' + mode + ' in ' + str(path))
    arr = np.asarray(img).astype(np.int64)
    if arr.min() < 0 or arr.max() > MAX_STORED:
        raise RasterFormatError('Unsupported bit depth in ' + str(path))
    return arr.astype(np.uint16)


def _save_uint16(arr, path):
    _check_writable_suffix(path)
    arr = np.ascontiguousarray(arr, dtype=np.uint16)
    if _is_pgm(path):
        write_pgm(arr, path)
    else:
        Image.fromarray(arr).save(path)


def load_disparity(path):
    """
    Loads a 16-bit disparity raster stored as ``round(d * 256)``,
    stored ``0`` decodes to invalid

    :param path: path to 16-bit PNG or PGM
    :type path: str
    :raises RasterFormatError: if the file is 8-bit
    :rtype: :py:class:`~potholedetector.raster.DisparityMap`
    """
    stored = _load_uint16(path, 'disparity')
    values = stored.astype(np.float64) / DISPARITY_SCALE
    values[stored == 0] = INVALID_DISPARITY
    return DisparityMap(values)


def save_disparity(dmap, path):
    """
    Saves **dmap** as 16-bit ``round(d * 256)``, invalid pixels as ``0``

    :param dmap: disparity map
    :type dmap: :py:class:`~potholedetector.raster.DisparityMap`
    :param path: destination ending in ``.png`` or ``.pgm``
    :type path: str
    :raises RasterFormatError: if a disparity exceeds the encoding range
    """
    valid = dmap.valid_mask
    stored = np.zeros(dmap.values.shape, dtype=np.int64)
    stored[valid] = np.rint(dmap.values[valid] * DISPARITY_SCALE).astype(np.int64)
    if stored.size > 0 and stored.max() > MAX_STORED:
        raise RasterFormatError('disparity exceeds encoding range: max ' +
                                str(float(dmap.values[valid].max())))
    try:
        _save_uint16(stored, path)
    except OSError as e:
        raise PotholeDetectorError('Unable to write ' + str(path) + ': ' + str(e))


def load_labels(path):
    """
    Loads a 16-bit label raster

    :param path: path to 16-bit PNG or PGM
    :type path: str
    :rtype: :py:class:`~potholedetector.raster.LabelMap`
    """
    return LabelMap(_load_uint16(path, 'label').astype(np.int64))


def save_labels(labels, path):
    """
    Saves **labels** as 16-bit raster, stored value equals label

    :param labels: label map
    :type labels: :py:class:`~potholedetector.raster.LabelMap`
    :param path: destination ending in ``.png`` or ``.pgm``
    :type path: str
    """
    if labels.labels.size > 0 and labels.labels.max() > MAX_STORED:
        raise RasterFormatError('label exceeds 16-bit range: ' + str(labels.labels.max()))
    _save_uint16(labels.labels, path)


def overlay_rgb(image, labels):
    """
    Builds the RGB overlay array, see :py:func:`save_overlay`

    :rtype: :py:class:`numpy.ndarray`
    """
    check_same_shape(image, labels, 'image and labels')
    gray = np.clip(np.rint(image.pixels), 0, 255)
    rgb = np.repeat(gray[:, :, np.newaxis], 3, axis=2)
    palette = np.asarray(OVERLAY_PALETTE, dtype=np.float64)
    lab = labels.labels
    fg = lab != 0
    colors = palette[lab[fg] % len(OVERLAY_PALETTE)]
    rgb[fg] = np.rint((1.0 - OVERLAY_ALPHA) * rgb[fg] + OVERLAY_ALPHA * colors)
    return rgb.astype(np.uint8)


def save_overlay(image, labels, path):
    """
    Writes an RGB PNG where background keeps the gray value and
    label ``k`` is tinted with palette color ``k % 12``

    :param image: grayscale image
    :type image: :py:class:`~potholedetector.raster.GrayImage`
    :param labels: label map of same dimensions
    :type labels: :py:class:`~potholedetector.raster.LabelMap`
    :param path: destination PNG path
    :type path: str
    :raises DimensionMismatchError: if dimensions differ
    """
    Image.fromarray(overlay_rgb(image, labels)).save(path)


def save_point_cloud(cloud, path):
    """
    Writes **cloud** as ASCII PLY with float ``x``, ``y``, ``z``
    vertex properties

    :param cloud: point cloud
    :type cloud: :py:class:`~potholedetector.geometry.PointCloud`
    :param path: destination path
    :type path: str
    """
    ply_header = ('ply\n'
                  'format ascii 1.0\n'
                  'element vertex %(vert_num)d\n'
                  'property float x\n'
                  'property float y\n'
                  'property float z\n'
                  'end_header\n')
    verts = np.asarray(cloud.points, dtype=np.float32).reshape(-1, 3)
    with open(path, 'w') as f:
        f.write(ply_header % dict(vert_num=len(verts)))
        np.savetxt(f, verts, '%.6f %.6f %.6f')


def load_point_cloud(path):
    """
    Reads an ASCII PLY written by :py:func:`save_point_cloud`

    :param path: path to PLY file
    :type path: str
    :return: ``N x 3`` float array
    :rtype: :py:class:`numpy.ndarray`
    """
    _check_exists(path)
    with open(path, 'r') as f:
        count = None
        for line in f:
            line = line.strip()
            if line.startswith('element vertex'):
                count = int(line.split()[-1])
            if line == 'end_header':
                break
        if count is None:
            raise RasterFormatError('No vertex element in ' + str(path))
        if count == 0:
            return np.zeros((0, 3), dtype=np.float64)
        return np.loadtxt(f, dtype=np.float64, max_rows=count).reshape(-1, 3)
