"""Light field containers, ingestion, color handling and view patterns.

Array layout is ``(u, v, w, h, c)``: ``u``/``v`` index the view row/column
and ``w``/``h`` index the pixel row/column inside a view, so view ``(r, c)``
is ``data[r, c]``, a plain ``(rows, cols, channels)`` image.  Angular rows
pair with pixel rows and angular columns with pixel columns throughout
(disparity, augmentation, EPIs).
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .core import ShapeError

COLORSPACES = ("rgb", "ycbcr", "y_only")

TASKS = {
    "2x2to8x8": ((8, 8), (0, 7)),
    "3x3to9x9": ((9, 9), (0, 4, 8)),
}

class DataError(ValueError):
    pass


@dataclass
class LightField:
    data: np.ndarray  # (u, v, w, h, c)
    colorspace: str = "rgb"

    def __post_init__(self):
        if self.data.ndim != 5:
            raise ShapeError(f"light field must be 5D (u, v, w, h, c), got {self.data.shape}")
        if min(self.data.shape) < 1:
            raise ShapeError(f"light field extents must be positive, got {self.data.shape}")
        if self.colorspace not in COLORSPACES:
            raise DataError(f"unknown colorspace {self.colorspace!r}")

    @property
    def shape(self):
        return self.data.shape

    @property
    def grid(self) -> tuple[int, int]:
        return self.data.shape[:2]

    def view(self, r: int, c: int) -> np.ndarray:
        return self.data[r, c]

    def luminance(self) -> np.ndarray:
        """``(u, v, w, h)`` luminance plane."""
        if self.colorspace == "rgb":
            return rgb_to_ycbcr(self).data[..., 0]
        return self.data[..., 0]


@dataclass(frozen=True)
class ViewPattern:
    grid: tuple[int, int]
    input_positions: tuple[tuple[int, int], ...]
    output_positions: tuple[tuple[int, int], ...]

    def __post_init__(self):
        cells = {(r, c) for r in range(self.grid[0]) for c in range(self.grid[1])}
        ins, outs = set(self.input_positions), set(self.output_positions)
        if ins & outs or ins | outs != cells or len(ins) + len(outs) != len(cells):
            raise DataError("input and output positions must partition the grid")

    @property
    def n_out(self) -> int:
        return len(self.output_positions)

    @property
    def input_rows(self) -> tuple[int, ...]:
        return tuple(sorted({r for r, _ in self.input_positions}))

    @property
    def input_cols(self) -> tuple[int, ...]:
        return tuple(sorted({c for _, c in self.input_positions}))

    @property
    def input_grid(self) -> tuple[int, int]:
        return len(self.input_rows), len(self.input_cols)

    @property
    def task(self) -> str | None:
        for name in TASKS:
            if make_pattern(name) == self:
                return name
        return None


def lattice_pattern(grid: tuple[int, int], rows, cols) -> ViewPattern:
    inputs = tuple((r, c) for r in rows for c in cols)
    taken = set(inputs)
    outputs = tuple((r, c) for r in range(grid[0]) for c in range(grid[1]) if (r, c) not in taken)
    return ViewPattern(tuple(grid), inputs, outputs)


def make_pattern(task: str) -> ViewPattern:
    """``2x2to8x8``: corner inputs, 60 outputs.  ``3x3to9x9``: {0,4,8}^2, 72 outputs."""
    try:
        grid, lattice = TASKS[task]
    except KeyError:
        raise DataError(f"unknown task {task!r}; choose from {sorted(TASKS)}") from None
    return lattice_pattern(grid, lattice, lattice)


def pattern_for(u0: int, v0: int, n_out: int) -> ViewPattern:
    """Find the built-in task whose input grid and output count match."""
    for name in TASKS:
        p = make_pattern(name)
        if p.input_grid == (u0, v0) and p.n_out == n_out:
            return p
    raise DataError(f"no task with a {u0}x{v0} input grid and {n_out} outputs")


# ---------------------------------------------------------------------------
# Sparse / dense
# ---------------------------------------------------------------------------


def extract_sparse(lf: LightField, pattern: ViewPattern) -> tuple[LightField, np.ndarray]:
    """Split into the input light field ``(u0, v0, w, h, c)`` and the target
    stack ``(n_out, w, h, c)``, ordered as ``pattern.output_positions``."""
    if lf.grid != pattern.grid:
        raise ShapeError(f"light field grid {lf.grid} does not match pattern grid {pattern.grid}")
    rows, cols = pattern.input_rows, pattern.input_cols
    if len(rows) * len(cols) != len(pattern.input_positions):
        raise DataError("input positions must form a lattice")
    inputs = lf.data[np.ix_(rows, cols)]
    targets = np.stack([lf.data[r, c] for r, c in pattern.output_positions])
    return LightField(inputs, lf.colorspace), targets


def assemble_dense(inputs: LightField, predictions: np.ndarray, pattern: ViewPattern) -> LightField:
    """Interleave input views and predicted views back into the full grid."""
    if predictions.shape[0] != pattern.n_out:
        raise ShapeError(f"{predictions.shape[0]} predictions for {pattern.n_out} outputs")
    if inputs.grid != pattern.input_grid:
        raise ShapeError(f"input grid {inputs.grid} does not match pattern {pattern.input_grid}")
    if predictions.shape[1:] != inputs.shape[2:]:
        raise ShapeError(f"prediction extents {predictions.shape[1:]} vs inputs {inputs.shape[2:]}")
    out = np.empty(pattern.grid + inputs.shape[2:], dtype=np.result_type(inputs.data, predictions))
    for i, r in enumerate(pattern.input_rows):
        for j, c in enumerate(pattern.input_cols):
            out[r, c] = inputs.data[i, j]
    for n, (r, c) in enumerate(pattern.output_positions):
        out[r, c] = predictions[n]
    return LightField(out, inputs.colorspace)


# ---------------------------------------------------------------------------
# Color
# ---------------------------------------------------------------------------

_RGB2YCC = np.array([
    [0.299, 0.587, 0.114],
    [-0.168736, -0.331264, 0.5],
    [0.5, -0.418688, -0.081312],
])
_YCC_OFFSET = np.array([0.0, 0.5, 0.5])
_YCC2RGB = np.linalg.inv(_RGB2YCC)


def rgb_to_ycbcr(lf: LightField) -> LightField:
    """Full-range BT.601."""
    if lf.colorspace != "rgb":
        raise DataError(f"expected an rgb light field, got {lf.colorspace}")
    return LightField(lf.data @ _RGB2YCC.T + _YCC_OFFSET, "ycbcr")


def ycbcr_to_rgb(lf: LightField) -> LightField:
    if lf.colorspace != "ycbcr":
        raise DataError(f"expected a ycbcr light field, got {lf.colorspace}")
    return LightField((lf.data - _YCC_OFFSET) @ _YCC2RGB.T, "rgb")


# ---------------------------------------------------------------------------
# Files
# ---------------------------------------------------------------------------


def read_meta(path) -> dict:
    meta = {}
    try:
        text = Path(path).read_text()
    except FileNotFoundError:
        raise DataError(f"{path}: not found") from None
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise DataError(f"{path}: malformed line {line!r}")
        meta[key.strip()] = value.strip()
    for key in ("rows", "cols", "width", "height"):
        if key not in meta:
            raise DataError(f"{path}: missing {key}=")
        try:
            meta[key] = int(meta[key])
        except ValueError:
            raise DataError(f"{path}: {key} must be an integer") from None
    meta.setdefault("colorspace", "rgb")
    if meta["colorspace"] not in ("rgb", "y_only"):
        raise DataError(f"{path}: colorspace must be rgb or y_only")
    return meta


def load_view_directory(path) -> LightField:
    """Load ``meta.txt`` plus ``view_r{row}_c{col}.png`` files, scaled to [0, 1]."""
    path = Path(path)
    if not path.is_dir():
        raise DataError(f"{path}: not a directory")
    meta = read_meta(path / "meta.txt")
    rows, cols, width, height = meta["rows"], meta["cols"], meta["width"], meta["height"]
    channels = 3 if meta["colorspace"] == "rgb" else 1
    mode = "RGB" if channels == 3 else "L"
    out = np.empty((rows, cols, height, width, channels), dtype=np.float64)
    for r in range(rows):
        for c in range(cols):
            f = path / f"view_r{r}_c{c}.png"
            if not f.exists():
                raise DataError(f"{path}: missing view (row={r}, col={c})")
            with Image.open(f) as im:
                arr = np.asarray(im.convert(mode), dtype=np.float64)
            if arr.shape[:2] != (height, width):
                raise DataError(f"{f}: size {arr.shape[1]}x{arr.shape[0]} differs from meta {width}x{height}")
            out[r, c] = arr.reshape(height, width, channels) / 255.0
    return LightField(out, meta["colorspace"])


def quantize(x: np.ndarray) -> np.ndarray:
    """[0, 1] floats to uint8, clamped, rounding halves up."""
    return np.floor(np.clip(x, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def save_view_directory(lf: LightField, path) -> None:
    if lf.colorspace == "ycbcr":
        lf = ycbcr_to_rgb(lf)
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    rows, cols, height, width, channels = lf.shape
    colorspace = "rgb" if channels == 3 else "y_only"
    (path / "meta.txt").write_text(
        f"rows={rows}\ncols={cols}\nwidth={width}\nheight={height}\ncolorspace={colorspace}\n"
    )
    for r in range(rows):
        for c in range(cols):
            img = quantize(lf.data[r, c])
            img = img[..., 0] if channels == 1 else img
            Image.fromarray(img).save(path / f"view_r{r}_c{c}.png")


def decode_sai_grid(image: np.ndarray, rows: int, cols: int, layout: str = "tiled") -> LightField:
    """Split one image holding all views into a light field.

    ``tiled``: view ``(r, c)`` is the ``(r, c)`` tile.  ``interleaved``
    (lenslet): pixel ``(y, x)`` of view ``(r, c)`` is ``image[y*rows + r, x*cols + c]``.
    """
    image = np.asarray(image)
    if image.ndim == 2:
        image = image[..., None]
    ih, iw, ch = image.shape
    if ih % rows or iw % cols:
        raise ShapeError(f"image {ih}x{iw} is not divisible into a {rows}x{cols} grid")
    vh, vw = ih // rows, iw // cols
    if layout == "tiled":
        arr = np.moveaxis(image.reshape(rows, vh, cols, vw, ch), 2, 1)
    elif layout == "interleaved":
        arr = np.moveaxis(image.reshape(vh, rows, vw, cols, ch), (1, 3), (0, 1))
    else:
        raise DataError(f"unknown layout {layout!r}")
    return LightField(np.ascontiguousarray(arr), "rgb" if ch == 3 else "y_only")


def encode_sai_grid(lf: LightField, layout: str = "tiled") -> np.ndarray:
    """Inverse of :func:`decode_sai_grid`; returns a ``(H, W, C)`` image."""
    rows, cols, vh, vw, ch = lf.shape
    if layout == "tiled":
        return np.moveaxis(lf.data, 1, 2).reshape(rows * vh, cols * vw, ch)
    if layout == "interleaved":
        return np.moveaxis(lf.data, (0, 1), (1, 3)).reshape(vh * rows, vw * cols, ch)
    raise DataError(f"unknown layout {layout!r}")


# ---------------------------------------------------------------------------
# Evaluation crops
# ---------------------------------------------------------------------------


def prepare_eval_views(lf: LightField, size: int = 8) -> LightField:
    """Central ``size x size`` angular crop."""
    u, v = lf.grid
    if u < size or v < size:
        raise ShapeError(f"grid {u}x{v} smaller than {size}x{size}")
    r0, c0 = (u - size) // 2, (v - size) // 2
    return LightField(lf.data[r0:r0 + size, c0:c0 + size], lf.colorspace)


def shave_borders(lf: LightField, border: int = 22) -> LightField:
    _, _, w, h, _ = lf.shape
    if w <= 2 * border or h <= 2 * border:
        raise ShapeError(f"spatial extent {w}x{h} too small to shave {border} px")
    return LightField(lf.data[:, :, border:w - border, border:h - border], lf.colorspace)


# ---------------------------------------------------------------------------
# Chroma
# ---------------------------------------------------------------------------


def _catmull_rom_matrix(n_ctrl: int, positions: np.ndarray) -> np.ndarray:
    """Weights mapping ``n_ctrl`` uniform control values to ``positions``
    (given in control-index units).

    Phantom end points are linear extrapolations, ``p[-1] = 2 p[0] - p[1]``,
    so linear data is reproduced exactly.
    """
    basis = np.eye(n_ctrl)
    ext = np.vstack([2 * basis[0] - basis[1], basis, 2 * basis[-1] - basis[-2]])
    out = np.zeros((len(positions), n_ctrl))
    for i, t in enumerate(positions):
        k = min(int(np.floor(t)), n_ctrl - 2)
        s = t - k
        p0, p1, p2, p3 = ext[k], ext[k + 1], ext[k + 2], ext[k + 3]
        out[i] = 0.5 * (
            2 * p1
            + (-p0 + p2) * s
            + (2 * p0 - 5 * p1 + 4 * p2 - p3) * s ** 2
            + (-p0 + 3 * p1 - 3 * p2 + p3) * s ** 3
        )
    return out


def _axis_weights(lattice, size):
    lattice = list(lattice)
    if len(lattice) < 2:
        raise DataError("chroma interpolation needs at least 2 control points per axis")
    steps = np.diff(lattice)
    if np.any(steps != steps[0]):
        raise DataError("control points must be evenly spaced")
    pos = (np.arange(size) - lattice[0]) / steps[0]
    if pos.min() < 0 or pos.max() > len(lattice) - 1:
        raise DataError("control lattice must span the grid")
    return _catmull_rom_matrix(len(lattice), pos)


def chroma_angular_upsample(planes: np.ndarray, pattern: ViewPattern) -> np.ndarray:
    """Interpolate ``(u0, v0, w, h, ...)`` planes known at the input lattice to
    the full ``(u, v, w, h, ...)`` grid with separable Catmull-Rom weights."""
    if planes.shape[:2] != pattern.input_grid:
        raise ShapeError(f"planes grid {planes.shape[:2]} vs pattern inputs {pattern.input_grid}")
    wr = _axis_weights(pattern.input_rows, pattern.grid[0])
    wc = _axis_weights(pattern.input_cols, pattern.grid[1])
    out = np.tensordot(wr, planes, axes=(1, 0))
    out = np.tensordot(wc, out, axes=(1, 1))  # (v, u, ...)
    out = np.swapaxes(out, 0, 1)
    # exact at the nodes
    for i, r in enumerate(pattern.input_rows):
        for j, c in enumerate(pattern.input_cols):
            out[r, c] = planes[i, j]
    return out


# ---------------------------------------------------------------------------
# Synthetic scenes
# ---------------------------------------------------------------------------


def _shift_crop(texture: np.ndarray, origin: float, length: int, axis: int) -> np.ndarray:
    near = round(origin)
    if abs(origin - near) < 1e-9:
        i0 = int(near)
        return np.take(texture, np.arange(i0, i0 + length), axis=axis)
    i0 = int(np.floor(origin))
    f = origin - i0
    a = np.take(texture, np.arange(i0, i0 + length), axis=axis)
    b = np.take(texture, np.arange(i0 + 1, i0 + 1 + length), axis=axis)
    return (1 - f) * a + f * b


def required_texture_size(d: float, rows: int, cols: int, w: int, h: int) -> tuple[int, int]:
    return int(np.ceil(w + abs(d) * (rows - 1))), int(np.ceil(h + abs(d) * (cols - 1)))


def synth_lf(texture: np.ndarray, d: float, rows: int, cols: int, w: int, h: int) -> LightField:
    """Constant-disparity light field cut from ``texture`` (rows x cols image).

    View ``(r, c)`` is the ``w x h`` crop whose origin sits ``d * (r - r_ctr,
    c - c_ctr)`` pixels from the centred crop; fractional origins are
    sampled bilinearly.
    """
    texture = np.asarray(texture, dtype=np.float64)
    tex = texture[..., None] if texture.ndim == 2 else texture
    need = required_texture_size(d, rows, cols, w, h)
    if tex.shape[0] < need[0] or tex.shape[1] < need[1]:
        raise DataError(
            f"texture {tex.shape[0]}x{tex.shape[1]} too small; need at least {need[0]}x{need[1]} "
            f"for disparity {d} on a {rows}x{cols} grid of {w}x{h} views"
        )
    base_r, base_c = (tex.shape[0] - w) / 2, (tex.shape[1] - h) / 2
    r_ctr, c_ctr = (rows - 1) / 2, (cols - 1) / 2
    out = np.empty((rows, cols, w, h, tex.shape[2]))
    for r in range(rows):
        strip = _shift_crop(tex, base_r + d * (r - r_ctr), w, 0)
        for c in range(cols):
            out[r, c] = _shift_crop(strip, base_c + d * (c - c_ctr), h, 1)
    return LightField(out, "y_only" if texture.ndim == 2 else "rgb")
