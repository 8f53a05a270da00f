"""Backward warp construction, image warping, and magnification analysis.

A warp is represented purely by its backward map: for every output pixel,
the normalized source coordinate it samples.  Backward maps are built
from saliency by a kernel-weighted coordinate mean: every saliency cell
attracts output samples toward itself with a force proportional to its
saliency times a Gaussian distance kernel.  The separable form applies
this independently per axis (two 1D profiles), which keeps axis-aligned
boxes axis-aligned in the warped image; the nonseparable form takes a
full 2D grid.

Anti-crop regularization mirrors the saliency about each canvas edge
(half-sample symmetric, i.e. reflection about the boundary between
samples, with no edge duplication).  Mirrored cells carry coordinates
continuing the linear ramp past the canvas (negative on the left, > 1 on
the right), so the weighted mean at a canvas edge is exactly that edge:
corners are fixed points, no source content is ever cropped, and a
uniform profile yields an exact identity.  Only this reflection
convention has both properties, which is why it is hard-coded.

Maps are computed in two stages: evaluated at saliency-grid resolution
(cell centers plus the two canvas endpoints), then linearly interpolated
to one entry per output pixel center.  Linear interpolation preserves
monotonicity, and the endpoint evaluations mean no extrapolation is ever
needed.  Construction and application are pure functions; per-row
parallel application would be bit-identical to sequential execution since
each output pixel is independent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import ImageBuffer, _freeze, pixel_centers, resample_points, resample_separable
from .saliency import SaliencyGrid2D, SaliencyProfile1D

# Default kernel width in grid-cell units for the standard 31x51 grid,
# about 17.8% of the vertical grid length.
DEFAULT_KERNEL_SIGMA = 5.5
SIGMA_CELL_FRACTION = 0.178

# Anti-crop guarantees backward coordinates in [0, 1] mathematically;
# anything further out than this is a bug, closer is float dust to clip.
_ANTICROP_SLACK = 1e-9

# Taps sitting exactly on the truncation boundary must not drop out to
# float dust in the distance computation; the lattice fast path keeps
# them by construction.
_TAP_TOL = 1e-9


@dataclass(frozen=True)
class AttractionKernel:
    """Gaussian distance kernel in saliency-grid cell units.

    Truncated at ``radius`` cells (3 sigma by default); the support size
    ``2 * radius + 1`` is also what the saliency floor is derived from.
    """

    sigma: float
    radius: int | None = None

    def __post_init__(self):
        if not (np.isfinite(self.sigma) and self.sigma > 0):
            raise ValueError(f"kernel sigma must be positive, got {self.sigma}")
        radius = self.radius if self.radius is not None else math.ceil(3.0 * self.sigma)
        if radius < 1:
            raise ValueError(f"kernel radius must be >= 1, got {radius}")
        object.__setattr__(self, "radius", int(radius))

    @classmethod
    def for_grid(cls, cells: int) -> "AttractionKernel":
        return cls(sigma=SIGMA_CELL_FRACTION * cells)

    @property
    def support(self) -> int:
        return 2 * self.radius + 1

    def taps(self) -> np.ndarray:
        """Discrete kernel at integer cell offsets, renormalized to sum 1."""
        offsets = np.arange(-self.radius, self.radius + 1, dtype=np.float64)
        w = np.exp(-(offsets**2) / (2.0 * self.sigma**2))
        return w / w.sum()

    def weights_at(self, distances: np.ndarray) -> np.ndarray:
        """Unnormalized kernel values at arbitrary cell distances."""
        return np.exp(-(np.asarray(distances, dtype=np.float64) ** 2) / (2.0 * self.sigma**2))


def axis_positions(size: int) -> np.ndarray:
    """Domain samples of a stored axis map: canvas edges plus pixel centers."""
    return np.concatenate(([0.0], pixel_centers(size), [1.0]))


@dataclass(frozen=True)
class SeparableWarp:
    """Sampled per-axis backward maps.

    ``tinv_x`` holds the normalized source x for the left canvas edge,
    each output pixel center, and the right canvas edge (out_w + 2
    entries); ``tinv_y`` likewise.  The backward x of output pixel (i, j)
    is independent of j by construction, which is what keeps axis-aligned
    boxes axis-aligned.
    """

    tinv_x: np.ndarray
    tinv_y: np.ndarray
    src_w: int
    src_h: int
    out_w: int
    out_h: int

    def __post_init__(self):
        tinv_x = np.asarray(self.tinv_x, dtype=np.float64)
        tinv_y = np.asarray(self.tinv_y, dtype=np.float64)
        if tinv_x.shape != (self.out_w + 2,) or tinv_y.shape != (self.out_h + 2,):
            raise ValueError(
                f"axis map lengths {tinv_x.shape[0]}/{tinv_y.shape[0]} do not match "
                f"output {self.out_w}x{self.out_h} plus edge anchors"
            )
        for name, arr in (("tinv_x", tinv_x), ("tinv_y", tinv_y)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite values")
            if arr.min() < 0.0 or arr.max() > 1.0:
                raise ValueError(f"{name} has entries outside [0, 1]")
        object.__setattr__(self, "tinv_x", _freeze(tinv_x))
        object.__setattr__(self, "tinv_y", _freeze(tinv_y))

    @property
    def x_positions(self) -> np.ndarray:
        return axis_positions(self.out_w)

    @property
    def y_positions(self) -> np.ndarray:
        return axis_positions(self.out_h)

    @property
    def pixel_tinv_x(self) -> np.ndarray:
        """Backward x at output pixel centers only."""
        return self.tinv_x[1:-1]

    @property
    def pixel_tinv_y(self) -> np.ndarray:
        return self.tinv_y[1:-1]


@dataclass(frozen=True)
class NonseparableWarp:
    """Dense per-pixel backward map plus the lattice it was upsampled from.

    ``lattice_x``/``lattice_y`` hold the map at saliency-grid resolution
    augmented with the canvas edges ((rows + 2) x (cols + 2)); the corner
    entries are the backward images of the canvas corners.
    """

    backward_x: np.ndarray
    backward_y: np.ndarray
    lattice_x: np.ndarray
    lattice_y: np.ndarray
    src_w: int
    src_h: int
    out_w: int
    out_h: int

    def __post_init__(self):
        bx = np.asarray(self.backward_x, dtype=np.float64)
        by = np.asarray(self.backward_y, dtype=np.float64)
        if bx.shape != (self.out_h, self.out_w) or by.shape != (self.out_h, self.out_w):
            raise ValueError(
                f"backward grids {bx.shape}/{by.shape} do not match output "
                f"{self.out_w}x{self.out_h}"
            )
        for name, arr in (("backward_x", bx), ("backward_y", by)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite values")
            if arr.min() < 0.0 or arr.max() > 1.0:
                raise ValueError(f"{name} has entries outside [0, 1]")
        object.__setattr__(self, "backward_x", _freeze(bx))
        object.__setattr__(self, "backward_y", _freeze(by))
        object.__setattr__(self, "lattice_x", _freeze(np.asarray(self.lattice_x, dtype=np.float64)))
        object.__setattr__(self, "lattice_y", _freeze(np.asarray(self.lattice_y, dtype=np.float64)))

    def corner_backward(self) -> dict[tuple[int, int], tuple[float, float]]:
        """Backward image of each canvas corner, keyed by (x, y) in {0, 1}."""
        return {
            (0, 0): (float(self.lattice_x[0, 0]), float(self.lattice_y[0, 0])),
            (1, 0): (float(self.lattice_x[0, -1]), float(self.lattice_y[0, -1])),
            (0, 1): (float(self.lattice_x[-1, 0]), float(self.lattice_y[-1, 0])),
            (1, 1): (float(self.lattice_x[-1, -1]), float(self.lattice_y[-1, -1])),
        }


@dataclass(frozen=True)
class MagnificationMap:
    """Per-output-pixel local area scale: output pixels per source pixel."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2 or values.size == 0:
            raise ValueError(f"magnification map must be 2D, got shape {values.shape}")
        if not np.all(np.isfinite(values)) or values.min() <= 0:
            raise ValueError("magnification map must be strictly positive and finite")
        object.__setattr__(self, "values", _freeze(values))


@dataclass(frozen=True)
class FoldoverReport:
    """Monotonicity report: violations are (axis, index, delta) triples."""

    monotone: bool
    violations: tuple[tuple[str, int, float], ...]


def reflect_index(idx, length: int):
    """Half-sample symmetric index reflection, valid for any radius."""
    period = 2 * length
    m = np.mod(idx, period)
    return np.where(m < length, m, period - 1 - m)


def reflect_pad_profile(s: SaliencyProfile1D, radius: int) -> SaliencyProfile1D:
    """Extend a profile by ``radius`` mirrored cells on each side.

    Reflection is about the boundary between samples (edge values are not
    duplicated about the edge position): [1, 2, 3] with radius 2 becomes
    [2, 1, 1, 2, 3, 3, 2].  Radii beyond the profile length keep
    reflecting back and forth.
    """
    if radius < 1:
        raise ValueError(f"pad radius must be >= 1, got {radius}")
    n = len(s)
    idx = reflect_index(np.arange(-radius, n + radius), n)
    return SaliencyProfile1D(s.values[idx])


def _padded_profile(values: np.ndarray, radius: int, anti_crop: bool):
    """Saliency and cell-center coordinates over the padded index range.

    Mirrored cells carry coordinates continuing the linear ramp beyond
    the canvas; without anti-crop the padding is zero saliency (those
    cells simply never contribute).
    """
    n = values.shape[0]
    idx = np.arange(-radius, n + radius)
    coords = (idx + 0.5) / n
    if anti_crop:
        padded = values[reflect_index(idx, n)]
    else:
        padded = np.where((idx >= 0) & (idx < n), values[np.clip(idx, 0, n - 1)], 0.0)
    return padded, coords


def evaluate_backward_map_1d(
    profile: SaliencyProfile1D,
    kernel: AttractionKernel,
    eval_norm: np.ndarray,
    anti_crop: bool = True,
) -> np.ndarray:
    """Backward map at arbitrary normalized positions.

    Each evaluation point takes the kernel-weighted mean of the (padded)
    cell-center coordinates, weighted by saliency; the kernel is truncated
    at its radius in cell units.  Scaling the profile by any positive
    constant leaves the result unchanged (ratio form).
    """
    values = profile.values
    n = values.shape[0]
    padded, coords = _padded_profile(values, kernel.radius, anti_crop)
    eval_norm = np.asarray(eval_norm, dtype=np.float64)
    dist = eval_norm[:, np.newaxis] * n - (coords[np.newaxis, :] * n)
    w = kernel.weights_at(dist)
    w[np.abs(dist) > kernel.radius + _TAP_TOL] = 0.0
    w = w * padded[np.newaxis, :]
    den = w.sum(axis=1)
    if np.any(den <= 0.0):
        bad = int(np.argmin(den))
        raise ValueError(
            f"degenerate saliency: no attraction mass within kernel reach of "
            f"position {eval_norm[bad]:.6f}"
        )
    return (w @ coords) / den


def lattice_backward_map_1d(
    profile: SaliencyProfile1D, kernel: AttractionKernel, anti_crop: bool = True
) -> np.ndarray:
    """Backward map at all cell centers via the convolution form.

    At cell centers the kernel taps sit at integer offsets, so numerator
    and denominator are plain 1D convolutions over the padded profile.
    This is the fast path the builders use; it agrees with
    :func:`evaluate_backward_map_1d` at the same positions.
    """
    padded, coords = _padded_profile(profile.values, kernel.radius, anti_crop)
    taps = kernel.taps()
    den = np.convolve(padded, taps, mode="valid")
    num = np.convolve(padded * coords, taps, mode="valid")
    if np.any(den <= 0.0):
        bad = int(np.argmin(den))
        raise ValueError(
            f"degenerate saliency: no attraction mass within kernel reach of cell {bad}"
        )
    return num / den


def _axis_backward_map(
    profile: SaliencyProfile1D,
    kernel: AttractionKernel,
    out_size: int,
    anti_crop: bool,
) -> np.ndarray:
    """Full stored axis map: edge anchors plus per-pixel-center samples."""
    n = len(profile)
    cell_centers = (np.arange(n, dtype=np.float64) + 0.5) / n
    lattice = lattice_backward_map_1d(profile, kernel, anti_crop)
    ends = evaluate_backward_map_1d(profile, kernel, np.array([0.0, 1.0]), anti_crop)
    domain = np.concatenate(([0.0], cell_centers, [1.0]))
    samples = np.concatenate(([ends[0]], lattice, [ends[1]]))
    pix = np.interp(pixel_centers(out_size), domain, samples)
    full = np.concatenate(([samples[0]], pix, [samples[-1]]))
    if anti_crop:
        if full.min() < -_ANTICROP_SLACK or full.max() > 1.0 + _ANTICROP_SLACK:
            raise AssertionError(
                "anti-crop guarantee violated: backward coordinates outside [0, 1] "
                f"(min {full.min()}, max {full.max()})"
            )
        full = np.clip(full, 0.0, 1.0)
    return full


def build_separable_backward_map(
    s_x: SaliencyProfile1D,
    s_y: SaliencyProfile1D,
    kernel: AttractionKernel,
    out_w: int,
    out_h: int,
    src_w: int,
    src_h: int,
    anti_crop: bool = True,
) -> SeparableWarp:
    """Build per-axis backward maps from two 1D saliency profiles."""
    if min(out_w, out_h, src_w, src_h) < 1:
        raise ValueError("warp dimensions must be positive")
    return SeparableWarp(
        tinv_x=_axis_backward_map(s_x, kernel, out_w, anti_crop),
        tinv_y=_axis_backward_map(s_y, kernel, out_h, anti_crop),
        src_w=src_w,
        src_h=src_h,
        out_w=out_w,
        out_h=out_h,
    )


def _convolve_rows_valid(arr: np.ndarray, taps: np.ndarray) -> np.ndarray:
    return np.stack([np.convolve(row, taps, mode="valid") for row in arr])


def _padded_grid(values: np.ndarray, radius: int, anti_crop: bool):
    rows, cols = values.shape
    ridx = np.arange(-radius, rows + radius)
    cidx = np.arange(-radius, cols + radius)
    y_coords = (ridx + 0.5) / rows
    x_coords = (cidx + 0.5) / cols
    if anti_crop:
        padded = values[np.ix_(reflect_index(ridx, rows), reflect_index(cidx, cols))]
    else:
        padded = np.zeros((ridx.size, cidx.size))
        padded[radius : radius + rows, radius : radius + cols] = values
    return padded, x_coords, y_coords


def evaluate_backward_map_2d(
    grid: SaliencyGrid2D,
    kernel: AttractionKernel,
    points_norm: np.ndarray,
    anti_crop: bool = True,
) -> np.ndarray:
    """Backward map at arbitrary normalized (x, y) points, shape (M, 2).

    The 2D kernel is the product of the per-axis Gaussians, truncated on
    a square support (|dx| <= radius and |dy| <= radius in cell units),
    so product saliency factorizes exactly into the separable form.
    """
    rows, cols = grid.rows, grid.cols
    padded, x_coords, y_coords = _padded_grid(grid.values, kernel.radius, anti_crop)
    points_norm = np.asarray(points_norm, dtype=np.float64)
    out = np.empty((points_norm.shape[0], 2))
    for i, (px, py) in enumerate(points_norm):
        dx = px * cols - x_coords * cols
        dy = py * rows - y_coords * rows
        wx = kernel.weights_at(dx)
        wx[np.abs(dx) > kernel.radius + _TAP_TOL] = 0.0
        wy = kernel.weights_at(dy)
        wy[np.abs(dy) > kernel.radius + _TAP_TOL] = 0.0
        w = padded * np.outer(wy, wx)
        den = w.sum()
        if den <= 0.0:
            raise ValueError(
                f"degenerate saliency: no attraction mass within kernel reach of "
                f"point ({px:.6f}, {py:.6f})"
            )
        out[i, 0] = (w.sum(axis=0) @ x_coords) / den
        out[i, 1] = (w.sum(axis=1) @ y_coords) / den
    return out


def _interp_columns(values: np.ndarray, positions: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Linear interpolation of (N, W) values along axis 0 at ``targets``."""
    idx = np.clip(np.searchsorted(positions, targets, side="right") - 1, 0, positions.size - 2)
    t = (targets - positions[idx]) / (positions[idx + 1] - positions[idx])
    return values[idx] * (1.0 - t)[:, np.newaxis] + values[idx + 1] * t[:, np.newaxis]


def build_nonseparable_backward_map(
    grid: SaliencyGrid2D,
    kernel: AttractionKernel,
    out_w: int,
    out_h: int,
    src_w: int,
    src_h: int,
    anti_crop: bool = True,
) -> NonseparableWarp:
    """Build a dense 2D backward map from a full saliency grid.

    Cell-center values come from the separable convolution form of the
    product kernel; the canvas-edge ring is evaluated directly.  The
    augmented lattice is then bilinearly upsampled to output pixel
    centers.
    """
    if min(out_w, out_h, src_w, src_h) < 1:
        raise ValueError("warp dimensions must be positive")
    rows, cols = grid.rows, grid.cols
    padded, x_coords, y_coords = _padded_grid(grid.values, kernel.radius, anti_crop)
    taps = kernel.taps()

    def conv2(a: np.ndarray) -> np.ndarray:
        return _convolve_rows_valid(_convolve_rows_valid(a, taps).T, taps).T

    den = conv2(padded)
    if np.any(den <= 0.0):
        r, c = np.unravel_index(int(np.argmin(den)), den.shape)
        raise ValueError(
            f"degenerate saliency: no attraction mass within kernel reach of cell ({r}, {c})"
        )
    center_x = conv2(padded * x_coords[np.newaxis, :]) / den
    center_y = conv2(padded * y_coords[:, np.newaxis]) / den

    # ring of canvas-edge evaluation points around the cell-center lattice
    cx = (np.arange(cols, dtype=np.float64) + 0.5) / cols
    cy = (np.arange(rows, dtype=np.float64) + 0.5) / rows
    lat_x_pos = np.concatenate(([0.0], cx, [1.0]))
    lat_y_pos = np.concatenate(([0.0], cy, [1.0]))
    ring = []
    for y in lat_y_pos:
        for x in lat_x_pos:
            if y in (0.0, 1.0) or x in (0.0, 1.0):
                ring.append((x, y))
    ring_vals = evaluate_backward_map_2d(grid, kernel, np.asarray(ring), anti_crop)

    lattice_x = np.empty((rows + 2, cols + 2))
    lattice_y = np.empty((rows + 2, cols + 2))
    lattice_x[1:-1, 1:-1] = center_x
    lattice_y[1:-1, 1:-1] = center_y
    k = 0
    for r, y in enumerate(lat_y_pos):
        for c, x in enumerate(lat_x_pos):
            if y in (0.0, 1.0) or x in (0.0, 1.0):
                lattice_x[r, c] = ring_vals[k, 0]
                lattice_y[r, c] = ring_vals[k, 1]
                k += 1

    if anti_crop:
        for name, lat in (("x", lattice_x), ("y", lattice_y)):
            if lat.min() < -_ANTICROP_SLACK or lat.max() > 1.0 + _ANTICROP_SLACK:
                raise AssertionError(
                    f"anti-crop guarantee violated on lattice {name}: "
                    f"min {lat.min()}, max {lat.max()}"
                )
        lattice_x = np.clip(lattice_x, 0.0, 1.0)
        lattice_y = np.clip(lattice_y, 0.0, 1.0)

    px = pixel_centers(out_w)
    py = pixel_centers(out_h)

    def upsample(lat: np.ndarray) -> np.ndarray:
        horiz = np.stack([np.interp(px, lat_x_pos, row) for row in lat])
        return _interp_columns(horiz, lat_y_pos, py)

    return NonseparableWarp(
        backward_x=upsample(lattice_x),
        backward_y=upsample(lattice_y),
        lattice_x=lattice_x,
        lattice_y=lattice_y,
        src_w=src_w,
        src_h=src_h,
        out_w=out_w,
        out_h=out_h,
    )


def warp_image(img: ImageBuffer, warp: SeparableWarp | NonseparableWarp) -> ImageBuffer:
    """Render the warped image by sampling the source at the backward map."""
    if img.width != warp.src_w or img.height != warp.src_h:
        raise ValueError(
            f"warp expects a {warp.src_w}x{warp.src_h} source, got {img.width}x{img.height}"
        )
    if isinstance(warp, SeparableWarp):
        return resample_separable(img, warp.pixel_tinv_x, warp.pixel_tinv_y)
    return resample_points(img, warp.backward_x, warp.backward_y)


def _axis_magnification(
    tinv: np.ndarray, positions: np.ndarray, src_size: int, out_size: int, axis: str
) -> np.ndarray:
    """Per-pixel 1D magnification (output pixels per source pixel)."""
    deriv = (tinv[2:] - tinv[:-2]) / (positions[2:] - positions[:-2])
    if np.any(deriv <= 0.0):
        bad = int(np.argmax(deriv <= 0.0))
        raise ValueError(
            f"non-increasing backward map along {axis} at output index {bad} "
            f"(derivative {deriv[bad]:.3e}); run check_foldover for details"
        )
    return out_size / (src_size * deriv)


def compute_magnification_map(warp: SeparableWarp | NonseparableWarp) -> MagnificationMap:
    """Local area scale of the warp from finite differences of the map.

    Values are output pixels per source pixel (area ratio); an identity
    warp at half resolution is 0.25 everywhere.  Summing the reciprocal
    over all output pixels recovers the source pixel count.
    """
    if isinstance(warp, SeparableWarp):
        mag_x = _axis_magnification(warp.tinv_x, warp.x_positions, warp.src_w, warp.out_w, "x")
        mag_y = _axis_magnification(warp.tinv_y, warp.y_positions, warp.src_h, warp.out_h, "y")
        return MagnificationMap(np.outer(mag_y, mag_x))
    dxdy, dxdx = np.gradient(warp.backward_x, 1.0 / warp.out_h, 1.0 / warp.out_w)
    dydy, dydx = np.gradient(warp.backward_y, 1.0 / warp.out_h, 1.0 / warp.out_w)
    det = dxdx * dydy - dxdy * dydx
    if np.any(det <= 0.0):
        bad = int(np.argmax(det <= 0.0))
        raise ValueError(
            f"non-positive jacobian at output index {bad} (row {bad // warp.out_w}, "
            f"col {bad % warp.out_w}); run check_foldover for details"
        )
    area_ratio = det * (warp.src_w * warp.src_h) / (warp.out_w * warp.out_h)
    return MagnificationMap(1.0 / area_ratio)


def check_foldover(warp: SeparableWarp | NonseparableWarp) -> FoldoverReport:
    """Report every non-increasing step of the backward map.

    For separable warps, indexes refer to the stored axis arrays; for
    nonseparable warps, to the flattened per-pixel grid (first element of
    the violating pair).  A foldover means source content would be
    sampled out of order; callers should reject such warps rather than
    render them.
    """
    violations: list[tuple[str, int, float]] = []
    if isinstance(warp, SeparableWarp):
        for axis, arr in (("x", warp.tinv_x), ("y", warp.tinv_y)):
            deltas = np.diff(arr)
            for i in np.nonzero(deltas <= 0.0)[0]:
                violations.append((axis, int(i), float(deltas[i])))
    else:
        dx = np.diff(warp.backward_x, axis=1)
        for r, c in zip(*np.nonzero(dx <= 0.0)):
            violations.append(("x", int(r * warp.out_w + c), float(dx[r, c])))
        dy = np.diff(warp.backward_y, axis=0)
        for r, c in zip(*np.nonzero(dy <= 0.0)):
            violations.append(("y", int(r * warp.out_w + c), float(dy[r, c])))
    return FoldoverReport(monotone=not violations, violations=tuple(violations))
