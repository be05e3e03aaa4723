"""Dataset ingestion, deterministic splits, and the mutable training store.

Images are float64 arrays in [0, 1], shaped (H, W) for grayscale or (H, W, 3)
for color. Samples carry stable string ids so in-place replacement survives
epoch shuffling.
"""

from __future__ import annotations

import csv
import io
import threading
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .exceptions import LoadError, NotFoundError, ValidationError

Rect = tuple[int, int, int, int]

_GRAY_MODES = {"1", "L", "I", "I;16", "F"}


@dataclass
class LabeledImage:
    id: str
    pixels: np.ndarray
    label: int
    replaced: bool = False

    def __post_init__(self) -> None:
        if self.label not in (0, 1):
            raise ValidationError(f"label for {self.id!r} must be 0 or 1, got {self.label}")


class TrainingStore:
    """Ordered collection of labeled images with by-id replacement.

    Replacement only touches pixels and the replaced flag; id, label, and
    dimensions are preserved. `snapshot` returns a deep copy so readers in
    other threads never observe a partial replacement.
    """

    def __init__(self, samples: list[LabeledImage], split_tag: str = "train",
                 meta: dict | None = None):
        seen: set[str] = set()
        for s in samples:
            if s.id in seen:
                raise ValidationError(f"duplicate sample id {s.id!r}")
            seen.add(s.id)
        self._samples = list(samples)
        self._index = {s.id: i for i, s in enumerate(samples)}
        self.split_tag = split_tag
        self.meta = dict(meta or {})
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._samples)

    def __iter__(self):
        return iter(self._samples)

    def __contains__(self, sample_id: str) -> bool:
        return sample_id in self._index

    def ids(self) -> list[str]:
        return [s.id for s in self._samples]

    def get(self, sample_id: str) -> LabeledImage:
        try:
            return self._samples[self._index[sample_id]]
        except KeyError:
            raise NotFoundError(f"no sample with id {sample_id!r}") from None

    def labels(self) -> np.ndarray:
        return np.array([s.label for s in self._samples], dtype=int)

    def pixel_array(self) -> np.ndarray:
        return np.stack([s.pixels for s in self._samples])

    def replace(self, sample_id: str, new_pixels: np.ndarray) -> None:
        sample = self.get(sample_id)
        new_pixels = np.asarray(new_pixels, dtype=float)
        if new_pixels.shape != sample.pixels.shape:
            raise ValidationError(
                f"replacement for {sample_id!r} has shape {new_pixels.shape}, "
                f"expected {sample.pixels.shape}"
            )
        if new_pixels.min() < 0.0 or new_pixels.max() > 1.0:
            raise ValidationError(f"replacement pixels for {sample_id!r} fall outside [0, 1]")
        with self._lock:
            sample.pixels = new_pixels.copy()
            sample.replaced = True

    def snapshot(self) -> "TrainingStore":
        with self._lock:
            copies = [
                LabeledImage(id=s.id, pixels=s.pixels.copy(), label=s.label, replaced=s.replaced)
                for s in self._samples
            ]
        return TrainingStore(copies, split_tag=self.split_tag, meta=dict(self.meta))


def replace_sample(store: TrainingStore, sample_id: str, new_pixels: np.ndarray) -> TrainingStore:
    """Overwrite one sample's pixels in place and mark it replaced."""
    store.replace(sample_id, new_pixels)
    return store


def _decode_image(path: Path, image_size: int) -> np.ndarray:
    with Image.open(path) as img:
        img = img.convert("L" if img.mode in _GRAY_MODES else "RGB")
        if img.size != (image_size, image_size):
            img = img.resize((image_size, image_size), Image.BILINEAR)
        arr = np.asarray(img, dtype=np.float64)
    return arr / 255.0


def load_manifest(manifest_path: str | Path, image_root: str | Path,
                  image_size: int = 224) -> TrainingStore:
    """Load a CSV manifest (`id,filepath,label`) into a training store.

    Images are decoded, resized to image_size x image_size, and scaled to
    [0, 1]; store order matches manifest order.
    """
    manifest_path = Path(manifest_path)
    image_root = Path(image_root)
    if not manifest_path.exists():
        raise LoadError(f"manifest not found: {manifest_path}")
    samples: list[LabeledImage] = []
    seen: set[str] = set()
    with open(manifest_path, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        required = {"id", "filepath", "label"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise ValidationError(
                f"manifest must have header id,filepath,label, got {reader.fieldnames}"
            )
        for row in reader:
            sample_id = row["id"]
            if sample_id in seen:
                raise ValidationError(f"duplicate sample id {sample_id!r} in manifest")
            seen.add(sample_id)
            try:
                label = int(row["label"])
            except (TypeError, ValueError):
                raise ValidationError(
                    f"label for {sample_id!r} must be an integer, got {row['label']!r}"
                ) from None
            if label not in (0, 1):
                raise ValidationError(f"label for {sample_id!r} must be 0 or 1, got {label}")
            path = image_root / row["filepath"]
            if not path.exists():
                raise LoadError(f"image file missing for id {sample_id!r}: {path}")
            try:
                pixels = _decode_image(path, image_size)
            except LoadError:
                raise
            except Exception as exc:
                raise LoadError(f"failed to decode image for id {sample_id!r}: {exc}") from exc
            samples.append(LabeledImage(id=sample_id, pixels=pixels, label=label))
    return TrainingStore(samples, split_tag="train")


def _stratified_counts(class_sizes: dict[int, int], fraction: float) -> dict[int, int]:
    # Largest-remainder rounding: per-class floors, then distribute so the
    # total equals round(n * fraction).
    total = sum(class_sizes.values())
    target = round(total * fraction)
    floors = {c: int(np.floor(n * fraction)) for c, n in class_sizes.items()}
    leftover = target - sum(floors.values())
    remainders = sorted(
        class_sizes,
        key=lambda c: (-(class_sizes[c] * fraction - floors[c]), c),
    )
    counts = dict(floors)
    for c in remainders[:leftover]:
        counts[c] += 1
    return counts


def split_dataset(store: TrainingStore, train_fraction: float,
                  seed: int) -> tuple[TrainingStore, TrainingStore]:
    """Deterministic stratified split into train/test stores."""
    if not 0.0 < train_fraction < 1.0:
        raise ValidationError(f"train_fraction must be in (0, 1), got {train_fraction}")
    by_class: dict[int, list[int]] = {0: [], 1: []}
    for i, s in enumerate(store):
        by_class[s.label].append(i)
    for c, idxs in by_class.items():
        if len(idxs) < 2:
            raise ValidationError(
                f"need at least 2 samples per class to split, class {c} has {len(idxs)}"
            )
    counts = _stratified_counts({c: len(v) for c, v in by_class.items()}, train_fraction)
    rng = np.random.default_rng(seed)
    train_idx: set[int] = set()
    for c in sorted(by_class):
        perm = rng.permutation(len(by_class[c]))
        train_idx.update(by_class[c][j] for j in perm[: counts[c]])

    def _sub(indices, tag):
        chosen = [store._samples[i] for i in sorted(indices)]
        copies = [
            LabeledImage(id=s.id, pixels=s.pixels.copy(), label=s.label, replaced=s.replaced)
            for s in chosen
        ]
        return TrainingStore(copies, split_tag=tag, meta=dict(store.meta))

    test_idx = set(range(len(store))) - train_idx
    return _sub(train_idx, "train"), _sub(test_idx, "test")


def _rects_overlap(a: Rect, b: Rect) -> bool:
    ar0, ac0, ar1, ac1 = a
    br0, bc0, br1, bc1 = b
    return ar0 < br1 and br0 < ar1 and ac0 < bc1 and bc0 < ac1


def _check_rect(rect: Rect, size: int, name: str) -> None:
    r0, c0, r1, c1 = rect
    if not (0 <= r0 < r1 <= size and 0 <= c0 < c1 <= size):
        raise ValidationError(f"{name} {rect} is not a valid rectangle within a {size}x{size} image")


@dataclass
class SyntheticSpec:
    """Parameters for the confounded two-class synthetic dataset.

    Class-1 images carry a bright block in signal_region; a high-contrast
    marker appears in spurious_region with probability `correlation` on
    class-1 samples and `1 - correlation` on class-0 samples, so correlation
    1.0 makes the marker a perfect shortcut and 0.0 reverses it.
    """

    n_per_class: int
    signal_region: Rect
    spurious_region: Rect
    spurious_train_correlation: float
    spurious_test_correlation: float
    seed: int
    image_size: int = 28
    noise_std: float = 0.0
    n_test_per_class: int | None = None
    background_value: float = 0.1
    signal_value: float = 0.6
    marker_value: float = 1.0

    def __post_init__(self) -> None:
        if self.n_per_class < 1:
            raise ValidationError("n_per_class must be at least 1")
        _check_rect(self.signal_region, self.image_size, "signal_region")
        _check_rect(self.spurious_region, self.image_size, "spurious_region")
        if _rects_overlap(self.signal_region, self.spurious_region):
            raise ValidationError("signal_region and spurious_region must not overlap")
        for name, c in (
            ("spurious_train_correlation", self.spurious_train_correlation),
            ("spurious_test_correlation", self.spurious_test_correlation),
        ):
            if not 0.0 <= c <= 1.0:
                raise ValidationError(f"{name} must be in [0, 1], got {c}")
        if self.noise_std < 0:
            raise ValidationError("noise_std must be non-negative")
        if self.n_test_per_class is None:
            self.n_test_per_class = max(1, self.n_per_class // 2)


def _fill(img: np.ndarray, rect: Rect, value: float) -> None:
    r0, c0, r1, c1 = rect
    img[r0:r1, c0:c1] = value


def generate_synthetic(spec: SyntheticSpec) -> tuple[TrainingStore, TrainingStore]:
    """Generate deterministic train/test stores per the synthetic spec."""
    rng = np.random.default_rng(spec.seed)
    size = spec.image_size

    def _make(split: str, n_per_class: int, correlation: float) -> TrainingStore:
        samples = []
        for label in (0, 1):
            p_marker = correlation if label == 1 else 1.0 - correlation
            for i in range(n_per_class):
                img = np.full((size, size), spec.background_value, dtype=np.float64)
                if label == 1:
                    _fill(img, spec.signal_region, spec.signal_value)
                if rng.random() < p_marker:
                    _fill(img, spec.spurious_region, spec.marker_value)
                if spec.noise_std > 0:
                    img = img + rng.normal(0.0, spec.noise_std, size=img.shape)
                # snap to the 8-bit lattice so PNG export/serve round-trips exactly
                img = np.round(np.clip(img, 0.0, 1.0) * 255.0) / 255.0
                samples.append(
                    LabeledImage(id=f"{split}-{label}-{i:04d}", pixels=img, label=label)
                )
        meta = {
            "signal_region": list(spec.signal_region),
            "spurious_region": list(spec.spurious_region),
        }
        return TrainingStore(samples, split_tag=split, meta=meta)

    train = _make("train", spec.n_per_class, spec.spurious_train_correlation)
    test = _make("test", spec.n_test_per_class, spec.spurious_test_correlation)
    return train, test


def to_png_image(pixels: np.ndarray) -> Image.Image:
    """8-bit PIL image (L or RGB) from a [0,1] float array."""
    arr = np.clip(np.round(np.asarray(pixels) * 255.0), 0, 255).astype(np.uint8)
    return Image.fromarray(arr, mode="L" if arr.ndim == 2 else "RGB")


def encode_png(pixels: np.ndarray) -> bytes:
    """Lossless PNG bytes for a [0,1] float array; byte-deterministic."""
    buf = io.BytesIO()
    to_png_image(pixels).save(buf, format="PNG")
    return buf.getvalue()


def save_store(store: TrainingStore, out_dir: str | Path) -> Path:
    """Export a store as manifest.csv plus one lossless PNG per sample."""
    out_dir = Path(out_dir)
    images_dir = out_dir / "images"
    images_dir.mkdir(parents=True, exist_ok=True)
    manifest = out_dir / "manifest.csv"
    with open(manifest, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["id", "filepath", "label"])
        for s in store:
            rel = f"images/{s.id}.png"
            to_png_image(s.pixels).save(out_dir / rel)
            writer.writerow([s.id, rel, s.label])
    return manifest
