"""Saliency-guided reweighting of visual feature grids.

Pure tensor-to-tensor kernel: average the final-layer self-attention over
heads, pull a per-spatial-token saliency vector from it, reshape to the
token grid, upsample to the feature grid's spatial extents, squash through
a sigmoid, and scale every feature vector by its position's weight. One
frame per call; batching over frames is the caller's loop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .tensor_store import AttentionTensor, FeatureGrid

SALIENCY_MODES = ("cls_row", "query_sum")
INTERP_MODES = ("bilinear", "nearest")


class ShapeError(ValueError):
    """Grid extents and token counts do not line up."""


class HealStageError(RuntimeError):
    """A pipeline stage failed; the stage name prefixes the message."""


@dataclass(frozen=True)
class HealConfig:
    saliency_mode: str = "cls_row"
    interp: str = "bilinear"

    def __post_init__(self) -> None:
        if self.saliency_mode not in SALIENCY_MODES:
            raise ValueError(f"saliency_mode must be one of {SALIENCY_MODES}")
        if self.interp not in INTERP_MODES:
            raise ValueError(f"interp must be one of {INTERP_MODES}")


def head_average(attention: AttentionTensor) -> np.ndarray:
    """Elementwise mean of the per-head attention maps, shape (L, L)."""
    return np.asarray(attention.values).mean(axis=0)


def extract_saliency(matrix: np.ndarray, mode: str = "cls_row") -> np.ndarray:
    """Per-spatial-token saliency from an averaged (L, L) attention map.

    ``cls_row``: the [CLS] token's attention over the spatial tokens.
    ``query_sum``: each spatial column summed over all query rows.
    """
    matrix = np.asarray(matrix)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ShapeError(f"expected a square attention matrix, got shape {matrix.shape}")
    if matrix.shape[0] < 2:
        raise ShapeError("attention matrix needs the [CLS] token plus spatial tokens")
    if mode == "cls_row":
        return matrix[0, 1:].copy()
    if mode == "query_sum":
        return matrix[:, 1:].sum(axis=0)
    raise ValueError(f"unknown saliency mode {mode!r}")


def to_grid(saliency: np.ndarray, height: int, width: int) -> np.ndarray:
    """Row-major reshape of a saliency vector onto the token grid."""
    saliency = np.asarray(saliency)
    if saliency.ndim != 1:
        raise ShapeError(f"saliency must be a vector, got shape {saliency.shape}")
    if height * width != saliency.shape[0]:
        raise ShapeError(
            f"grid {height}x{width} does not hold {saliency.shape[0]} saliency values"
        )
    return saliency.reshape(height, width)


def to_vector(grid: np.ndarray) -> np.ndarray:
    """Row-major flatten; inverse of :func:`to_grid`."""
    return np.asarray(grid).reshape(-1)


def _source_coords(dst: int, src: int) -> np.ndarray:
    # Center-aligned sampling with edge clamping.
    coords = (np.arange(dst, dtype=np.float64) + 0.5) * (src / dst) - 0.5
    return np.clip(coords, 0.0, src - 1.0)


def upsample(grid: np.ndarray, out_height: int, out_width: int, interp: str = "bilinear") -> np.ndarray:
    """Resize a 2-D grid to (out_height, out_width).

    Bilinear uses center-aligned source coordinates, separable per axis;
    nearest rounds the same coordinate (half rounds up). A same-size call
    returns a value-identical grid.
    """
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 2:
        raise ShapeError(f"expected a 2-D grid, got shape {grid.shape}")
    if out_height < 1 or out_width < 1:
        raise ShapeError(f"target extents must be >= 1, got {out_height}x{out_width}")
    src_h, src_w = grid.shape
    ys = _source_coords(out_height, src_h)
    xs = _source_coords(out_width, src_w)
    if interp == "nearest":
        yi = np.floor(ys + 0.5).astype(np.intp)
        xi = np.floor(xs + 0.5).astype(np.intp)
        return grid[np.ix_(yi, xi)].copy()
    if interp != "bilinear":
        raise ValueError(f"unknown interpolation mode {interp!r}")
    y0 = np.floor(ys).astype(np.intp)
    x0 = np.floor(xs).astype(np.intp)
    y1 = np.minimum(y0 + 1, src_h - 1)
    x1 = np.minimum(x0 + 1, src_w - 1)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]
    top = grid[np.ix_(y0, x0)] * (1.0 - fx) + grid[np.ix_(y0, x1)] * fx
    bottom = grid[np.ix_(y1, x0)] * (1.0 - fx) + grid[np.ix_(y1, x1)] * fx
    return top * (1.0 - fy) + bottom * fy


def normalize(grid: np.ndarray) -> np.ndarray:
    """Row-major flatten then elementwise logistic sigmoid."""
    flat = np.asarray(grid, dtype=np.float64).reshape(-1)
    out = np.empty_like(flat)
    pos = flat >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-flat[pos]))
    ex = np.exp(flat[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def reweight(features: FeatureGrid, saliency_norm: np.ndarray) -> FeatureGrid:
    """Scale every channel at spatial position p by ``saliency_norm[p]``."""
    saliency_norm = np.asarray(saliency_norm)
    h, w = features.height, features.width
    if saliency_norm.ndim != 1 or saliency_norm.shape[0] != h * w:
        raise ShapeError(
            f"saliency length {saliency_norm.shape} does not cover a {h}x{w} feature grid"
        )
    weights = saliency_norm.reshape(h, w, 1)
    return FeatureGrid(values=np.asarray(features.values) * weights)


def infer_grid(token_count: int) -> tuple[int, int]:
    """Square-root fallback for the token grid when extents are not given."""
    root = math.isqrt(token_count)
    if root * root != token_count:
        raise ShapeError(
            f"{token_count} spatial tokens is not a perfect square; "
            "pass the token grid extents explicitly"
        )
    return root, root


def heal(
    features: FeatureGrid,
    attention: AttentionTensor,
    cfg: HealConfig = HealConfig(),
    grid_hw: tuple[int, int] | None = None,
) -> FeatureGrid:
    """Full pipeline: head average -> saliency -> grid -> upsample ->
    sigmoid -> reweight. Pure; inputs are never mutated."""
    spatial = attention.seq_len - 1

    def stage(name, fn, *args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except Exception as exc:
            raise HealStageError(f"{name}: {exc}") from exc

    if grid_hw is None:
        grid_h, grid_w = stage("grid_inference", infer_grid, spatial)
    else:
        grid_h, grid_w = grid_hw
        if grid_h * grid_w != spatial:
            raise HealStageError(
                f"grid_inference: token grid {grid_h}x{grid_w} does not hold "
                f"{spatial} spatial tokens"
            )
    averaged = stage("head_average", head_average, attention)
    saliency = stage("extract_saliency", extract_saliency, averaged, cfg.saliency_mode)
    grid = stage("to_grid", to_grid, saliency, grid_h, grid_w)
    upsampled = stage("upsample", upsample, grid, features.height, features.width, cfg.interp)
    weights = stage("normalize", normalize, upsampled)
    return stage("reweight", reweight, features, weights)
