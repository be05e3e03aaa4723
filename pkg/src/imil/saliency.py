"""Class-activation heatmaps from a backend's saliency tap, plus overlay
rendering for human review."""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from matplotlib import colormaps
from PIL import Image

from .exceptions import CapabilityError, ValidationError
from .model import BackendContract


@dataclass(frozen=True)
class Heatmap:
    """2D saliency map at image resolution, values in [0,1]; all-zero means
    no positive evidence for the explained class."""

    values: np.ndarray
    class_index: int
    source_layer: str


def bilinear_upsample(values: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resize with half-pixel centers and edge clamping."""
    in_h, in_w = values.shape
    if (in_h, in_w) == (out_h, out_w):
        return values.astype(np.float64).copy()
    # source coordinate of each output pixel center
    ys = (np.arange(out_h) + 0.5) * (in_h / out_h) - 0.5
    xs = (np.arange(out_w) + 0.5) * (in_w / out_w) - 0.5
    y0 = np.clip(np.floor(ys).astype(int), 0, in_h - 1)
    x0 = np.clip(np.floor(xs).astype(int), 0, in_w - 1)
    y1 = np.minimum(y0 + 1, in_h - 1)
    x1 = np.minimum(x0 + 1, in_w - 1)
    wy = np.clip(ys - y0, 0.0, 1.0)[:, None]
    wx = np.clip(xs - x0, 0.0, 1.0)[None, :]
    v = values.astype(np.float64)
    top = v[np.ix_(y0, x0)] * (1 - wx) + v[np.ix_(y0, x1)] * wx
    bot = v[np.ix_(y1, x0)] * (1 - wx) + v[np.ix_(y1, x1)] * wx
    return top * (1 - wy) + bot * wy


def grad_cam(backend: BackendContract, image: np.ndarray,
             class_index: int) -> Heatmap:
    """Weighted-activation saliency map for one class.

    Channel weights are the spatial means of the class-score gradients;
    the rectified weighted sum is upsampled to image resolution and
    normalized by its max (all zeros when nothing is positive).
    """
    if class_index not in (0, 1):
        raise ValidationError(f"class_index must be 0 or 1, got {class_index}")
    if not hasattr(backend, "saliency_tap"):
        raise CapabilityError("backend does not expose a saliency tap")
    image = np.asarray(image, dtype=np.float64)
    h, w = image.shape[0], image.shape[1]
    acts, grads = backend.saliency_tap(image, class_index)
    alpha = grads.mean(axis=(1, 2))
    raw = np.maximum(np.tensordot(alpha, acts, axes=1), 0.0)
    up = bilinear_upsample(raw, h, w)
    peak = up.max()
    values = up / peak if peak > 0 else np.zeros_like(up)
    layer = getattr(backend, "SALIENCY_LAYER", "features")
    return Heatmap(values=values, class_index=class_index, source_layer=layer)


def overlay_filename(sample_id: str, epoch: int, class_index: int) -> str:
    return f"{sample_id}_epoch{epoch}_cls{class_index}.png"


def overlay_array(image: np.ndarray, heatmap: Heatmap) -> np.ndarray:
    """uint8 RGB blend: grayscale input and viridis heatmap at 50% opacity."""
    image = np.asarray(image, dtype=np.float64)
    gray = image if image.ndim == 2 else image.mean(axis=2)
    if gray.shape != heatmap.values.shape:
        raise ValidationError(
            f"image shape {gray.shape} does not match heatmap "
            f"shape {heatmap.values.shape}")
    cmap = colormaps["viridis"]
    colored = cmap(heatmap.values)[..., :3]
    blended = 0.5 * gray[..., None] + 0.5 * colored
    return np.round(np.clip(blended, 0.0, 1.0) * 255).astype(np.uint8)


def overlay_png_bytes(image: np.ndarray, heatmap: Heatmap) -> bytes:
    """PNG-encoded overlay; byte-deterministic for fixed inputs."""
    buf = io.BytesIO()
    Image.fromarray(overlay_array(image, heatmap), mode="RGB").save(
        buf, format="PNG")
    return buf.getvalue()


def render_overlay(image: np.ndarray, heatmap: Heatmap,
                   output_path: str | Path) -> Path:
    """Write the lossless overlay PNG to disk."""
    output_path = Path(output_path)
    output_path.parent.mkdir(parents=True, exist_ok=True)
    output_path.write_bytes(overlay_png_bytes(image, heatmap))
    return output_path
