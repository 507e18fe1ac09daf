"""Plate-patch contrasting, character splitting and glyph normalization.

Works on dark-ink-on-light patches.  The splitter binarizes at Otsu's
threshold, discards ink that is connected to the patch border (the crop
around a detected plate usually drags in a frame of darker background),
and cuts the remaining ink at empty valleys of the column projection
profile.  Each cut is trimmed to its ink rows and resampled into a fixed
square raster for the classifier.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

__all__ = [
    "Glyph",
    "contrast_stretch",
    "otsu_threshold",
    "segment_characters",
    "normalize_glyph",
]

_EIGHT_CONNECTED = np.ones((3, 3), dtype=int)


@dataclass
class Glyph:
    """Square grayscale patch holding one segmented character.

    ``source_bbox`` is the inclusive (x_min, y_min, x_max, y_max) box the
    glyph was cut from, in the coordinates of the originating image.
    """

    size: int
    pixels: np.ndarray = field(repr=False)
    source_bbox: tuple = (0, 0, 0, 0)


def _check_patch(patch):
    arr = np.asarray(patch, dtype=float)
    if arr.ndim != 2 or arr.size == 0:
        raise ValueError("patch must be a non-empty 2D array")
    if not np.all(np.isfinite(arr)):
        raise ValueError("patch contains non-finite values")
    return arr


def contrast_stretch(patch, low_percentile=2.0, high_percentile=98.0):
    """Map the low percentile to 0 and the high percentile to 1, clamped.

    Constant patches map to all zeros.
    """
    arr = _check_patch(patch)
    lo = np.percentile(arr, low_percentile)
    hi = np.percentile(arr, high_percentile)
    if hi <= lo:
        return np.zeros_like(arr)
    return np.clip((arr - lo) / (hi - lo), 0.0, 1.0)


def otsu_threshold(values, bins=256):
    """Otsu's threshold of values in [0, 1] via inter-class variance."""
    arr = np.asarray(values, dtype=float).ravel()
    hist, edges = np.histogram(arr, bins=bins, range=(0.0, 1.0))
    total = hist.sum()
    if total == 0:
        return 0.5
    centers = 0.5 * (edges[:-1] + edges[1:])
    weight = hist / total
    w0 = np.cumsum(weight)
    w1 = 1.0 - w0
    mean_cum = np.cumsum(weight * centers)
    mean_all = mean_cum[-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        mu0 = mean_cum / w0
        mu1 = (mean_all - mean_cum) / w1
        between = w0 * w1 * (mu0 - mu1) ** 2
    between[~np.isfinite(between)] = 0.0
    best = int(np.argmax(between))
    return float(edges[best + 1])


def _drop_border_ink(ink):
    """Remove ink components that touch the patch border.

    A crop around a detected plate is expanded a little, so darker
    background (and sometimes the plate frame) rings the patch; real
    characters sit inside the light plate and never touch the border.
    """
    labels, count = ndimage.label(ink, structure=_EIGHT_CONNECTED)
    if count == 0:
        return ink
    edge_labels = np.unique(
        np.concatenate(
            [labels[0, :], labels[-1, :], labels[:, 0], labels[:, -1]]
        )
    )
    edge_labels = edge_labels[edge_labels > 0]
    if edge_labels.size == 0:
        return ink
    return ink & ~np.isin(labels, edge_labels)


def _runs(mask):
    """Maximal runs of True as a list of (start, stop) with stop exclusive."""
    padded = np.concatenate([[False], mask, [False]])
    changes = np.flatnonzero(padded[1:] != padded[:-1])
    return list(zip(changes[::2], changes[1::2]))


def segment_characters(
    patch,
    expected_min=1,
    expected_max=9,
    glyph_size=16,
    valley_fraction=0.05,
    drop_border=True,
):
    """Split a contrast-stretched patch into left-to-right character glyphs.

    Binarizes at Otsu's threshold (dark = ink), optionally strips
    border-connected ink, then cuts at maximal runs of columns whose ink
    count is below ``valley_fraction`` of the peak column.  Segments are
    trimmed to their ink rows and normalized to ``glyph_size``.  Returns
    the empty list when the patch carries no ink or when the number of
    cuts falls outside [expected_min, expected_max].
    """
    if not (1 <= expected_min <= expected_max):
        raise ValueError("need 1 <= expected_min <= expected_max")
    arr = _check_patch(patch)
    if arr.max() <= arr.min():
        return []
    ink = arr < otsu_threshold(arr)
    if drop_border:
        ink = _drop_border_ink(ink)
    profile = ink.sum(axis=0)
    peak = profile.max()
    if peak == 0:
        return []
    glyphs = []
    for col_lo, col_hi in _runs(profile >= valley_fraction * peak):
        rows = np.flatnonzero(ink[:, col_lo:col_hi].any(axis=1))
        if rows.size == 0:
            continue
        row_lo, row_hi = int(rows[0]), int(rows[-1])
        segment = arr[row_lo : row_hi + 1, col_lo:col_hi]
        glyphs.append(
            normalize_glyph(
                segment,
                glyph_size,
                source_bbox=(int(col_lo), row_lo, int(col_hi) - 1, row_hi),
            )
        )
    if not (expected_min <= len(glyphs) <= expected_max):
        return []
    return glyphs


def _resize_bilinear(img, out_h, out_w):
    """Bilinear resample with half-pixel centers and edge clamping."""
    in_h, in_w = img.shape
    ys = np.clip((np.arange(out_h) + 0.5) * (in_h / out_h) - 0.5, 0.0, in_h - 1.0)
    xs = np.clip((np.arange(out_w) + 0.5) * (in_w / out_w) - 0.5, 0.0, in_w - 1.0)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, in_h - 1)
    x1 = np.minimum(x0 + 1, in_w - 1)
    wy = (ys - y0)[:, None]
    wx = (xs - x0)[None, :]
    return (
        img[np.ix_(y0, x0)] * (1.0 - wy) * (1.0 - wx)
        + img[np.ix_(y0, x1)] * (1.0 - wy) * wx
        + img[np.ix_(y1, x0)] * wy * (1.0 - wx)
        + img[np.ix_(y1, x1)] * wy * wx
    )


def normalize_glyph(segment, size=16, source_bbox=None):
    """Resample a segment into a size x size raster, preserving aspect.

    The scaled segment is centered on a canvas padded with the segment's
    brightest value (the background of a dark-on-light glyph), so padding
    is invisible for constant inputs.  A size x size input passes through
    unchanged.
    """
    arr = np.asarray(segment, dtype=float)
    if arr.ndim != 2 or arr.size == 0:
        raise ValueError("segment must be a non-empty 2D array")
    if not np.all(np.isfinite(arr)):
        raise ValueError("segment contains non-finite values")
    if size < 1:
        raise ValueError("size must be positive")
    in_h, in_w = arr.shape
    scale = size / max(in_h, in_w)
    out_h = max(1, int(round(in_h * scale)))
    out_w = max(1, int(round(in_w * scale)))
    resized = _resize_bilinear(arr, out_h, out_w)
    canvas = np.full((size, size), float(arr.max()))
    top = (size - out_h) // 2
    left = (size - out_w) // 2
    canvas[top : top + out_h, left : left + out_w] = resized
    if source_bbox is None:
        source_bbox = (0, 0, in_w - 1, in_h - 1)
    return Glyph(size=size, pixels=np.clip(canvas, 0.0, 1.0), source_bbox=source_bbox)
