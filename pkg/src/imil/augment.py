"""Image/label augmentations: MixUp, CutMix, CutOut, and grid blackout.

All functions are pure given an explicit numpy Generator. Images are numpy
arrays shaped (H, W) or (H, W, C) with values in [0, 1]; labels are length-2
vectors summing to 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import ValidationError

Rect = tuple[int, int, int, int]  # (row0, col0, row1, col1), half-open


@dataclass(frozen=True)
class GridGeometry:
    """A rows x cols grid tiling an image; remainder pixels go to the last
    row/column. Cells are numbered row-major from 0 at the top-left."""

    rows: int
    cols: int
    image_height: int
    image_width: int

    def __post_init__(self) -> None:
        if self.rows < 1 or self.cols < 1:
            raise ValidationError(f"grid must be at least 1x1, got {self.rows}x{self.cols}")
        if self.image_height < self.rows or self.image_width < self.cols:
            raise ValidationError(
                f"image {self.image_height}x{self.image_width} too small for "
                f"{self.rows}x{self.cols} grid"
            )

    @property
    def n_cells(self) -> int:
        return self.rows * self.cols


@dataclass(frozen=True)
class GridSelection:
    geometry: GridGeometry
    selected: frozenset[int]

    def __post_init__(self) -> None:
        if not self.selected:
            raise ValidationError("at least one region must be selected")
        bad = [c for c in self.selected if not 0 <= c < self.geometry.n_cells]
        if bad:
            raise ValidationError(
                f"cell indices {sorted(bad)} out of range [0, {self.geometry.n_cells})"
            )
        object.__setattr__(self, "selected", frozenset(int(c) for c in self.selected))


@dataclass(frozen=True)
class MixPair:
    """One MixUp input pair: two images with one-hot labels and a blend weight."""

    x_i: np.ndarray
    x_j: np.ndarray
    y_i: np.ndarray
    y_j: np.ndarray
    lam: float

    def __post_init__(self) -> None:
        if self.x_i.shape != self.x_j.shape:
            raise ValidationError(
                f"image shapes differ: {self.x_i.shape} vs {self.x_j.shape}"
            )
        for name, y in (("y_i", self.y_i), ("y_j", self.y_j)):
            y = np.asarray(y, dtype=float)
            if y.shape != (2,) or not np.isclose(y.sum(), 1.0):
                raise ValidationError(f"{name} must be a length-2 vector summing to 1")
        if not 0.0 <= self.lam <= 1.0:
            raise ValidationError(f"lambda must be in [0, 1], got {self.lam}")


@dataclass(frozen=True)
class CutMixMask:
    """Realized CutMix rectangle plus the label weight it induces.

    The implied binary mask is 1 outside the box and 0 inside; mu is the
    un-swapped area fraction unless explicitly overridden.
    """

    box: Rect
    mu: float
    image_shape: tuple[int, int]

    def mask(self) -> np.ndarray:
        m = np.ones(self.image_shape, dtype=float)
        r0, c0, r1, c1 = self.box
        m[r0:r1, c0:c1] = 0.0
        return m


def cell_bounds(geometry: GridGeometry, cell: int) -> Rect:
    """Half-open pixel bounds of one grid cell.

    Cells have floor(dim / count) pixels per axis; the last row/column absorbs
    the remainder.
    """
    if not 0 <= cell < geometry.n_cells:
        raise ValidationError(f"cell {cell} out of range [0, {geometry.n_cells})")
    r, c = divmod(cell, geometry.cols)
    ch = geometry.image_height // geometry.rows
    cw = geometry.image_width // geometry.cols
    row0 = r * ch
    col0 = c * cw
    row1 = geometry.image_height if r == geometry.rows - 1 else (r + 1) * ch
    col1 = geometry.image_width if c == geometry.cols - 1 else (c + 1) * cw
    return (row0, col0, row1, col1)


def sample_lambda(alpha: float, rng: np.random.Generator) -> float:
    """Draw one Beta(alpha, alpha) blend weight in [0, 1]."""
    if alpha <= 0:
        raise ValidationError(f"alpha must be positive, got {alpha}")
    return float(rng.beta(alpha, alpha))


def mixup(pair: MixPair) -> tuple[np.ndarray, np.ndarray]:
    """Convex blend of two images and their labels with weight lam."""
    lam = pair.lam
    x = lam * pair.x_i + (1.0 - lam) * pair.x_j
    y = lam * np.asarray(pair.y_i, dtype=float) + (1.0 - lam) * np.asarray(pair.y_j, dtype=float)
    return x, y


def _spatial_shape(x: np.ndarray) -> tuple[int, int]:
    if x.ndim not in (2, 3):
        raise ValidationError(f"expected a 2D or 3D image array, got ndim={x.ndim}")
    return int(x.shape[0]), int(x.shape[1])


def _place_box(h: int, w: int, box_h: int, box_w: int, rng: np.random.Generator) -> Rect:
    # Center sampled uniformly over the image; the box is then shifted to lie
    # fully inside bounds so its area never shrinks at the borders.
    cy = int(rng.integers(0, h))
    cx = int(rng.integers(0, w))
    row0 = min(max(cy - box_h // 2, 0), h - box_h)
    col0 = min(max(cx - box_w // 2, 0), w - box_w)
    return (row0, col0, row0 + box_h, col0 + box_w)


def cutmix(
    x_i: np.ndarray,
    y_i: np.ndarray,
    x_j: np.ndarray,
    y_j: np.ndarray,
    lam: float,
    rng: np.random.Generator,
    mu: float | None = None,
) -> tuple[np.ndarray, np.ndarray, CutMixMask]:
    """Swap a random rectangle of area fraction (1 - lam) from x_j into x_i.

    The label weight mu defaults to the realized un-swapped area fraction;
    pass mu explicitly to decouple it from the mask.
    """
    if x_i.shape != x_j.shape:
        raise ValidationError(f"image shapes differ: {x_i.shape} vs {x_j.shape}")
    if not 0.0 <= lam <= 1.0:
        raise ValidationError(f"lambda must be in [0, 1], got {lam}")
    h, w = _spatial_shape(x_i)
    cut = float(np.sqrt(1.0 - lam))
    box_h = int(round(h * cut))
    box_w = int(round(w * cut))
    if box_h == 0 or box_w == 0:
        box: Rect = (0, 0, 0, 0)
    else:
        box = _place_box(h, w, box_h, box_w, rng)
    r0, c0, r1, c1 = box
    area = (r1 - r0) * (c1 - c0)
    if mu is None:
        mu = 1.0 - area / (h * w)
    x = x_i.copy()
    x[r0:r1, c0:c1] = x_j[r0:r1, c0:c1]
    y = mu * np.asarray(y_i, dtype=float) + (1.0 - mu) * np.asarray(y_j, dtype=float)
    return x, y, CutMixMask(box=box, mu=float(mu), image_shape=(h, w))


def cutout(x: np.ndarray, mask_h: int, mask_w: int, rng: np.random.Generator) -> np.ndarray:
    """Zero one randomly placed mask_h x mask_w rectangle; label passes through."""
    h, w = _spatial_shape(x)
    if mask_h > h or mask_w > w:
        raise ValidationError(
            f"mask {mask_h}x{mask_w} larger than image {h}x{w}"
        )
    if mask_h < 1 or mask_w < 1:
        raise ValidationError("mask dimensions must be positive")
    r0, c0, r1, c1 = _place_box(h, w, mask_h, mask_w, rng)
    out = x.copy()
    out[r0:r1, c0:c1] = 0.0
    return out


def blackout(x: np.ndarray, selection: GridSelection) -> np.ndarray:
    """Keep pixels inside the selected grid cells; zero everything else."""
    h, w = _spatial_shape(x)
    geo = selection.geometry
    if (geo.image_height, geo.image_width) != (h, w):
        raise ValidationError(
            f"grid geometry {geo.image_height}x{geo.image_width} does not match "
            f"image {h}x{w}"
        )
    keep = np.zeros((h, w), dtype=bool)
    for cell in selection.selected:
        r0, c0, r1, c1 = cell_bounds(geo, cell)
        keep[r0:r1, c0:c1] = True
    out = np.zeros_like(x)
    out[keep] = x[keep]
    return out
