"""Reconstruction quality metrics and visual diagnostics."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import ShapeError
from .data import LightField, ViewPattern, rgb_to_ycbcr

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def _check_shapes(a, b):
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch: {a.shape} vs {b.shape}")


def psnr(a: np.ndarray, b: np.ndarray, peak: float = 1.0) -> float:
    """``10 log10(peak^2 / MSE)`` with the MSE taken over every element.

    Identical inputs give ``math.inf``.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _check_shapes(a, b)
    if peak <= 0:
        raise ValueError("peak must be positive")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    x = np.arange(size) - (size - 1) / 2
    g = np.exp(-(x ** 2) / (2 * sigma ** 2))
    return g / g.sum()


def _filter_valid(img: np.ndarray, g: np.ndarray) -> np.ndarray:
    k = len(g)
    rows = np.lib.stride_tricks.sliding_window_view(img, k, axis=0) @ g
    return np.lib.stride_tricks.sliding_window_view(rows, k, axis=1) @ g


def ssim(a: np.ndarray, b: np.ndarray, data_range: float = 1.0) -> float:
    """Mean SSIM over valid 11x11 Gaussian windows (sigma 1.5).

    2D inputs are single channel; for ``(h, w, c)`` inputs the per-channel
    values are averaged.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _check_shapes(a, b)
    if a.ndim == 3:
        return float(np.mean([ssim(a[..., i], b[..., i], data_range) for i in range(a.shape[2])]))
    if a.ndim != 2:
        raise ShapeError(f"ssim expects 2D or 3D images, got {a.ndim}D")
    if a.shape[0] < SSIM_WINDOW or a.shape[1] < SSIM_WINDOW:
        raise ShapeError(f"image {a.shape} smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window")
    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2
    g = gaussian_window()
    mu_a = _filter_valid(a, g)
    mu_b = _filter_valid(b, g)
    var_a = _filter_valid(a * a, g) - mu_a * mu_a
    var_b = _filter_valid(b * b, g) - mu_b * mu_b
    cov = _filter_valid(a * b, g) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


# ---------------------------------------------------------------------------
# Heat maps
# ---------------------------------------------------------------------------


def _heat_colormap() -> np.ndarray:
    """256 x 3 uint8 table: black -> red -> yellow -> white, each channel
    non-decreasing in the index."""
    i = np.arange(256)
    r = np.minimum(255, i * 3)
    g = np.clip(i * 3 - 255, 0, 255)
    b = np.clip(i * 3 - 510, 0, 255)
    return np.stack([r, g, b], axis=1).astype(np.uint8)


HEAT_COLORMAP = _heat_colormap()


def heatmap_indices(a: np.ndarray, b: np.ndarray, scale_max: float) -> np.ndarray:
    """Colormap index per pixel: ``floor(255 * min(|a-b| / scale_max, 1))``.

    Multi-channel inputs use the largest channel error.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _check_shapes(a, b)
    if scale_max <= 0:
        raise ValueError("scale_max must be positive")
    err = np.abs(a - b)
    if err.ndim == 3:
        err = err.max(axis=2)
    return np.floor(np.minimum(err / scale_max, 1.0) * 255.0).astype(np.uint8)


def error_heatmap(a: np.ndarray, b: np.ndarray, scale_max: float = 0.1) -> np.ndarray:
    """RGB uint8 visualisation of the absolute error between two images."""
    return HEAT_COLORMAP[heatmap_indices(a, b, scale_max)]


# ---------------------------------------------------------------------------
# EPI
# ---------------------------------------------------------------------------


def epi_slice(lf: LightField | np.ndarray, axis: str, fixed_view_index: int, fixed_spatial_index: int) -> np.ndarray:
    """Epipolar-plane image.

    ``horizontal`` fixes the view row and pixel row, giving a
    ``(view cols, pixel cols)`` image; ``vertical`` fixes the view column and
    pixel column, giving ``(view rows, pixel rows)``.
    """
    data = lf.data if isinstance(lf, LightField) else np.asarray(lf)
    u, v, w, h = data.shape[:4]
    if axis == "horizontal":
        if not (0 <= fixed_view_index < u and 0 <= fixed_spatial_index < w):
            raise IndexError(f"indices ({fixed_view_index}, {fixed_spatial_index}) out of range for u={u}, w={w}")
        return data[fixed_view_index, :, fixed_spatial_index, :]
    if axis == "vertical":
        if not (0 <= fixed_view_index < v and 0 <= fixed_spatial_index < h):
            raise IndexError(f"indices ({fixed_view_index}, {fixed_spatial_index}) out of range for v={v}, h={h}")
        return data[:, fixed_view_index, :, fixed_spatial_index]
    raise ValueError(f"axis must be horizontal or vertical, got {axis!r}")


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


@dataclass
class MetricReport:
    space: str  # "rgb" or "y_only"
    view_set: str  # "novel" or "all"
    per_view: dict = field(default_factory=dict)  # (r, c) -> (psnr, ssim)
    pooled_psnr: float = math.nan

    @property
    def views(self) -> list[tuple[int, int]]:
        return list(self.per_view)

    @property
    def mean_psnr(self) -> float:
        return float(np.mean([p for p, _ in self.per_view.values()]))

    @property
    def mean_ssim(self) -> float:
        return float(np.mean([s for _, s in self.per_view.values()]))

    def lines(self) -> list[str]:
        return [f"view_{r},{c}\t{p:.4f}\t{s:.6f}" for (r, c), (p, s) in self.per_view.items()]

    def table(self) -> str:
        out = [f"space: {self.space}", f"views: {self.view_set} ({len(self.per_view)})",
               f"{'view':>8}  {'PSNR/dB':>9}  {'SSIM':>8}"]
        for (r, c), (p, s) in self.per_view.items():
            out.append(f"{f'({r},{c})':>8}  {p:9.4f}  {s:8.6f}")
        out.append(f"{'mean':>8}  {self.mean_psnr:9.4f}  {self.mean_ssim:8.6f}")
        out.append(f"{'pooled':>8}  {self.pooled_psnr:9.4f}")
        return "\n".join(out)


def evaluate(recon: LightField, truth: LightField, space: str = "rgb", view_set: str = "novel",
             pattern: ViewPattern | None = None) -> MetricReport:
    """Per-view PSNR/SSIM of ``recon`` against ``truth``.

    ``space="y_only"`` evaluates luminance only.  ``view_set="novel"`` skips
    the pattern's input positions.
    """
    if recon.shape != truth.shape:
        raise ShapeError(f"grid mismatch: {recon.shape} vs {truth.shape}")
    if space not in ("rgb", "y_only"):
        raise ValueError(f"space must be rgb or y_only, got {space!r}")
    a, b = _in_space(recon, space), _in_space(truth, space)
    if view_set == "novel":
        if pattern is None:
            raise ValueError("novel-view evaluation needs a view pattern")
        if pattern.grid != recon.grid:
            raise ShapeError(f"pattern grid {pattern.grid} vs light field grid {recon.grid}")
        views = list(pattern.output_positions)
    elif view_set == "all":
        views = [(r, c) for r in range(recon.grid[0]) for c in range(recon.grid[1])]
    else:
        raise ValueError(f"view_set must be novel or all, got {view_set!r}")
    report = MetricReport(space, view_set)
    sq = 0.0
    for r, c in views:
        report.per_view[(r, c)] = (psnr(a[r, c], b[r, c]), ssim(a[r, c], b[r, c]))
        sq += float(np.mean((a[r, c] - b[r, c]) ** 2))
    mse = sq / len(views)
    report.pooled_psnr = math.inf if mse == 0 else 10 * math.log10(1.0 / mse)
    return report


def _in_space(lf: LightField, space: str) -> np.ndarray:
    if space == "rgb":
        if lf.colorspace != "rgb":
            raise ValueError(f"rgb evaluation of a {lf.colorspace} light field")
        return lf.data
    if lf.colorspace == "rgb":
        return rgb_to_ycbcr(lf).data[..., :1]
    return lf.data[..., :1]
