"""Binarization, survival cellular automaton and region extraction.

The wavelet magnitude image is turned into a boolean grid by keeping a
fixed fraction of the brightest pixels white.  A synchronous cellular
automaton then erodes the grid: a white cell stays white only if enough
of its eight neighbours are white, so isolated specks die out while the
solid cluster over the plate survives.  Connected-component labeling and
a couple of bounding-box heuristics pick the plate region out of the
surviving clusters.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

__all__ = [
    "CaRule",
    "PlateConstraints",
    "Region",
    "binarize_percentile",
    "ca_step",
    "ca_run",
    "connected_components",
    "select_plate_region",
]

_EIGHT_CONNECTED = np.ones((3, 3), dtype=int)


@dataclass
class CaRule:
    """Survival rule of the erosion automaton.

    A white cell survives a step iff at least ``survival_min`` of its 8
    neighbours are white; there is no birth rule, so the white set only
    shrinks and the automaton always reaches a fixpoint.
    """

    survival_min: int = 4
    max_iterations: int = 16

    def __post_init__(self):
        if not (0 <= self.survival_min <= 8):
            raise ValueError(f"survival_min must be in [0, 8], got {self.survival_min}")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")


@dataclass
class PlateConstraints:
    """Bounding-box filters used to pick the plate among surviving regions."""

    min_aspect: float = 2.0
    max_aspect: float = 8.0
    min_area_fraction: float = 0.002

    def __post_init__(self):
        if not (0 < self.min_aspect < self.max_aspect):
            raise ValueError("need 0 < min_aspect < max_aspect")
        if not (0 < self.min_area_fraction < 1):
            raise ValueError("min_area_fraction must be in (0, 1)")


@dataclass
class Region:
    """8-connected set of white cells with its inclusive bounding box.

    ``bbox`` is (x_min, y_min, x_max, y_max); ``pixels`` is an (n, 2)
    array of (x, y) coordinates.
    """

    pixel_count: int
    bbox: tuple
    pixels: np.ndarray = field(repr=False)

    @property
    def width(self):
        return self.bbox[2] - self.bbox[0] + 1

    @property
    def height(self):
        return self.bbox[3] - self.bbox[1] + 1


def _check_grid(grid):
    arr = np.asarray(grid)
    if arr.ndim != 2 or arr.dtype != np.bool_:
        raise ValueError("grid must be a 2D boolean array")
    return arr


def binarize_percentile(img, white_fraction=0.30):
    """Whiten exactly round(white_fraction * N) of the brightest pixels.

    Ties at the threshold value are broken by row-major index (the lower
    index wins whiteness), which makes the white count exact and the
    result reproducible on heavily quantized inputs.
    """
    if not (0.0 < white_fraction < 1.0):
        raise ValueError(f"white_fraction must be in (0, 1), got {white_fraction}")
    arr = np.asarray(img, dtype=float)
    if arr.ndim != 2:
        raise ValueError("image must be a 2D array")
    if not np.all(np.isfinite(arr)):
        raise ValueError("image contains non-finite values")
    n = arr.size
    k = int(np.floor(white_fraction * n + 0.5))
    grid = np.zeros(n, dtype=bool)
    if k > 0:
        # stable sort on the negated values keeps row-major order inside ties
        order = np.argsort(-arr.ravel(), kind="stable")
        grid[order[:k]] = True
    return grid.reshape(arr.shape)


def _neighbor_counts(grid):
    padded = np.pad(grid.astype(np.uint8), 1)
    counts = (
        padded[:-2, :-2] + padded[:-2, 1:-1] + padded[:-2, 2:]
        + padded[1:-1, :-2] + padded[1:-1, 2:]
        + padded[2:, :-2] + padded[2:, 1:-1] + padded[2:, 2:]
    )
    return counts


def ca_step(grid, rule=None):
    """One synchronous survival step; cells outside the grid count as black."""
    rule = rule if rule is not None else CaRule()
    arr = _check_grid(grid)
    return arr & (_neighbor_counts(arr) >= rule.survival_min)


def ca_run(grid, rule=None):
    """Iterate ``ca_step`` until a fixpoint or ``max_iterations`` steps.

    Because the rule only erodes, the white set is non-increasing and a
    fixpoint always exists.
    """
    rule = rule if rule is not None else CaRule()
    current = _check_grid(grid)
    for _ in range(rule.max_iterations):
        nxt = ca_step(current, rule)
        if np.array_equal(nxt, current):
            return nxt
        current = nxt
    return current


def connected_components(grid):
    """Partition white cells into maximal 8-connected regions.

    The list is sorted by pixel count descending; ties are ordered by
    bounding-box (y_min, x_min).
    """
    arr = _check_grid(grid)
    labels, count = ndimage.label(arr, structure=_EIGHT_CONNECTED)
    if count == 0:
        return []
    ys, xs = np.nonzero(labels)
    owner = labels[ys, xs]
    order = np.argsort(owner, kind="stable")
    ys, xs, owner = ys[order], xs[order], owner[order]
    bounds = np.searchsorted(owner, np.arange(1, count + 2))
    regions = []
    for i in range(count):
        lo, hi = bounds[i - 1] if i else 0, bounds[i]
        rx, ry = xs[lo:hi], ys[lo:hi]
        regions.append(
            Region(
                pixel_count=int(hi - lo),
                bbox=(int(rx.min()), int(ry.min()), int(rx.max()), int(ry.max())),
                pixels=np.column_stack([rx, ry]),
            )
        )
    regions.sort(key=lambda r: (-r.pixel_count, r.bbox[1], r.bbox[0]))
    return regions


def select_plate_region(regions, constraints=None, image_dims=None):
    """Pick the biggest region whose bbox looks like a plate, or None.

    ``image_dims`` is (width, height) of the originating image and is
    required for the relative-area test.
    """
    constraints = constraints if constraints is not None else PlateConstraints()
    if image_dims is None:
        raise ValueError("image_dims (width, height) is required")
    img_w, img_h = image_dims
    image_area = float(img_w) * float(img_h)
    for region in regions:
        aspect = region.width / region.height
        area = region.width * region.height
        if (
            constraints.min_aspect <= aspect <= constraints.max_aspect
            and area >= constraints.min_area_fraction * image_area
        ):
            return region
    return None
