"""Classifier backend contract and the small-CNN reference implementation.

The contract is what the training loop, saliency, and the feedback callback
rely on; any classifier exposing it (including a full-scale ResNet adapter)
can be dropped in. The reference backend is a two-stage convnet sized for
desk-scale experiments, run in double precision so gradient checks against
finite differences are meaningful.
"""

from __future__ import annotations

import io
import json
import zipfile
from pathlib import Path
from typing import Protocol, runtime_checkable

import numpy as np
import torch
import torch.nn.functional as F

from .exceptions import CapabilityError, ValidationError

CHECKPOINT_FORMAT_VERSION = 1


@runtime_checkable
class BackendContract(Protocol):
    """Capabilities a classifier backend must provide."""

    def forward(self, images: np.ndarray) -> np.ndarray:
        """Logits of shape (n, 2) for a batch of images."""
        ...

    def probabilities(self, images: np.ndarray) -> np.ndarray:
        """Row-wise softmax of the logits."""
        ...

    def loss(self, images: np.ndarray, soft_labels: np.ndarray) -> float:
        """Cross-entropy against soft label vectors, no parameter update."""
        ...

    def train_step(self, images: np.ndarray, soft_labels: np.ndarray,
                   learning_rate: float) -> float:
        """One optimizer step; returns the batch loss."""
        ...

    def saliency_tap(self, image: np.ndarray,
                     class_index: int) -> tuple[np.ndarray, np.ndarray]:
        """(activations, gradients) of the tapped feature map, both (K, h, w);
        gradients are of the class logit w.r.t. the activations."""
        ...

    def score_from_features(self, features: np.ndarray, class_index: int) -> float:
        """Class logit recomputed from a given tapped feature map."""
        ...

    def snapshot(self) -> dict:
        """Copy of all parameters (and optimizer state)."""
        ...

    def restore(self, state: dict) -> None:
        ...


def _to_nchw(images: np.ndarray, channels: int) -> torch.Tensor:
    arr = np.asarray(images, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[None, ...]
    if arr.ndim == 3 and channels == 1:
        arr = arr[:, None, :, :]
    elif arr.ndim == 3 and channels == 3:
        # single color image (H, W, 3)
        arr = arr.transpose(2, 0, 1)[None, ...]
    elif arr.ndim == 4:
        arr = arr.transpose(0, 3, 1, 2)
    return torch.from_numpy(np.ascontiguousarray(arr))


def _soft_cross_entropy(logits: torch.Tensor, targets: torch.Tensor) -> torch.Tensor:
    return -(targets * F.log_softmax(logits, dim=1)).sum(dim=1).mean()


class SmallCnnBackend:
    """Two conv stages, global average pooling, and a 2-logit head.

    The tapped feature map is the second stage's ReLU output, the last
    spatial map before pooling. Everything runs in float64 on CPU.
    """

    ARCHITECTURE_ID = "small-cnn-v1"

    def __init__(self, channels: int, image_size: int, seed: int,
                 conv_channels: tuple[int, int] = (8, 16),
                 optimizer: str = "sgd", momentum: float = 0.0):
        if image_size < 16:
            raise ValidationError(f"image_size must be at least 16, got {image_size}")
        if channels not in (1, 3):
            raise ValidationError(f"channels must be 1 or 3, got {channels}")
        if optimizer not in ("sgd", "adam"):
            raise ValidationError(f"optimizer must be 'sgd' or 'adam', got {optimizer!r}")
        self.channels = channels
        self.image_size = image_size
        self.seed = seed
        self.optimizer = optimizer
        self.momentum = momentum
        c1, c2 = conv_channels
        self.conv1 = torch.nn.Conv2d(channels, c1, 3, padding=1, dtype=torch.float64)
        self.conv2 = torch.nn.Conv2d(c1, c2, 3, padding=1, dtype=torch.float64)
        self.fc = torch.nn.Linear(c2, 2, dtype=torch.float64)
        self._modules = {"conv1": self.conv1, "conv2": self.conv2, "fc": self.fc}
        self._init_parameters(seed)
        self._momentum_buf: dict[str, torch.Tensor] = {}
        self._adam_state: dict[str, dict] = {}
        self._adam_t = 0

    def _init_parameters(self, seed: int) -> None:
        g = torch.Generator().manual_seed(seed)
        for module in self._modules.values():
            fan_in = module.weight[0].numel()
            bound = float(1.0 / np.sqrt(fan_in))
            with torch.no_grad():
                module.weight.uniform_(-bound, bound, generator=g)
                module.bias.uniform_(-bound, bound, generator=g)

    def _named_parameters(self):
        for mname, module in self._modules.items():
            yield f"{mname}.weight", module.weight
            yield f"{mname}.bias", module.bias

    def _features(self, x: torch.Tensor) -> torch.Tensor:
        """Tapped feature map: last spatial activations before global pooling."""
        x = F.max_pool2d(F.relu(self.conv1(x)), 2)
        return F.relu(self.conv2(x))

    def _logits_from_features(self, feats: torch.Tensor) -> torch.Tensor:
        return self.fc(feats.mean(dim=(2, 3)))

    def _forward_t(self, x: torch.Tensor) -> torch.Tensor:
        return self._logits_from_features(self._features(x))

    def forward(self, images: np.ndarray) -> np.ndarray:
        with torch.no_grad():
            return self._forward_t(_to_nchw(images, self.channels)).numpy()

    def probabilities(self, images: np.ndarray) -> np.ndarray:
        with torch.no_grad():
            logits = self._forward_t(_to_nchw(images, self.channels))
            return F.softmax(logits, dim=1).numpy()

    def loss(self, images: np.ndarray, soft_labels: np.ndarray) -> float:
        targets = torch.from_numpy(np.asarray(soft_labels, dtype=np.float64))
        with torch.no_grad():
            logits = self._forward_t(_to_nchw(images, self.channels))
            return float(_soft_cross_entropy(logits, targets))

    def train_step(self, images: np.ndarray, soft_labels: np.ndarray,
                   learning_rate: float) -> float:
        targets = torch.from_numpy(np.asarray(soft_labels, dtype=np.float64))
        logits = self._forward_t(_to_nchw(images, self.channels))
        loss = _soft_cross_entropy(logits, targets)
        params = dict(self._named_parameters())
        grads = torch.autograd.grad(loss, list(params.values()))
        with torch.no_grad():
            if self.optimizer == "sgd":
                self._sgd_update(params, grads, learning_rate)
            else:
                self._adam_update(params, grads, learning_rate)
        return float(loss.detach())

    def _sgd_update(self, params: dict[str, torch.Tensor], grads, lr: float) -> None:
        for (name, p), g in zip(params.items(), grads):
            if self.momentum > 0:
                buf = self._momentum_buf.get(name)
                buf = g.clone() if buf is None else buf.mul_(self.momentum).add_(g)
                self._momentum_buf[name] = buf
                g = buf
            p.add_(g, alpha=-lr)

    def _adam_update(self, params: dict[str, torch.Tensor], grads, lr: float,
                     beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> None:
        self._adam_t += 1
        t = self._adam_t
        for (name, p), g in zip(params.items(), grads):
            st = self._adam_state.setdefault(
                name, {"m": torch.zeros_like(p), "v": torch.zeros_like(p)}
            )
            st["m"].mul_(beta1).add_(g, alpha=1 - beta1)
            st["v"].mul_(beta2).addcmul_(g, g, value=1 - beta2)
            m_hat = st["m"] / (1 - beta1**t)
            v_hat = st["v"] / (1 - beta2**t)
            p.addcdiv_(m_hat, v_hat.sqrt().add_(eps), value=-lr)

    def saliency_tap(self, image: np.ndarray,
                     class_index: int) -> tuple[np.ndarray, np.ndarray]:
        if class_index not in (0, 1):
            raise ValidationError(f"class_index must be 0 or 1, got {class_index}")
        x = _to_nchw(image, self.channels)
        feats = self._features(x)
        feats.retain_grad()
        logits = self._logits_from_features(feats)
        (grad,) = torch.autograd.grad(logits[0, class_index], feats)
        return feats.detach()[0].numpy(), grad[0].numpy()

    def score_from_features(self, features: np.ndarray, class_index: int) -> float:
        feats = torch.from_numpy(np.asarray(features, dtype=np.float64))[None, ...]
        with torch.no_grad():
            return float(self._logits_from_features(feats)[0, class_index])

    def snapshot(self) -> dict:
        state = {name: p.detach().numpy().copy() for name, p in self._named_parameters()}
        state["_momentum"] = {k: v.numpy().copy() for k, v in self._momentum_buf.items()}
        state["_adam"] = {
            k: {"m": v["m"].numpy().copy(), "v": v["v"].numpy().copy()}
            for k, v in self._adam_state.items()
        }
        state["_adam_t"] = self._adam_t
        return state

    def restore(self, state: dict) -> None:
        params = dict(self._named_parameters())
        with torch.no_grad():
            for name, p in params.items():
                p.copy_(torch.from_numpy(state[name]))
        self._momentum_buf = {
            k: torch.from_numpy(v.copy()) for k, v in state.get("_momentum", {}).items()
        }
        self._adam_state = {
            k: {"m": torch.from_numpy(v["m"].copy()), "v": torch.from_numpy(v["v"].copy())}
            for k, v in state.get("_adam", {}).items()
        }
        self._adam_t = state.get("_adam_t", 0)


def reference_backend(channels: int, image_size: int, seed: int,
                      optimizer: str = "sgd", momentum: float = 0.0) -> SmallCnnBackend:
    """Deterministically initialized small-CNN backend."""
    return SmallCnnBackend(channels=channels, image_size=image_size, seed=seed,
                           optimizer=optimizer, momentum=momentum)


def save_checkpoint(backend: SmallCnnBackend, path: str | Path, epoch: int) -> None:
    """Versioned checkpoint: a zip of a JSON manifest plus the parameter blob."""
    manifest = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "architecture_id": backend.ARCHITECTURE_ID,
        "seed": backend.seed,
        "epoch": epoch,
        "channels": backend.channels,
        "image_size": backend.image_size,
        "optimizer": backend.optimizer,
        "momentum": backend.momentum,
    }
    state = backend.snapshot()
    flat: dict[str, np.ndarray] = {}
    for k, v in state.items():
        if isinstance(v, np.ndarray):
            flat[f"param/{k}"] = v
    for k, v in state["_momentum"].items():
        flat[f"momentum/{k}"] = v
    for k, v in state["_adam"].items():
        flat[f"adam_m/{k}"] = v["m"]
        flat[f"adam_v/{k}"] = v["v"]
    manifest["adam_t"] = state["_adam_t"]
    buf = io.BytesIO()
    np.savez(buf, **flat)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with zipfile.ZipFile(path, "w") as zf:
        zf.writestr("manifest.json", json.dumps(manifest, indent=2, sort_keys=True))
        zf.writestr("parameters.npz", buf.getvalue())


def load_checkpoint(path: str | Path) -> tuple[SmallCnnBackend, dict]:
    """Rebuild a backend from a checkpoint; returns (backend, manifest)."""
    with zipfile.ZipFile(path) as zf:
        manifest = json.loads(zf.read("manifest.json"))
        if manifest.get("format_version") != CHECKPOINT_FORMAT_VERSION:
            raise ValidationError(
                f"unsupported checkpoint format version {manifest.get('format_version')}"
            )
        if manifest.get("architecture_id") != SmallCnnBackend.ARCHITECTURE_ID:
            raise CapabilityError(
                f"unknown architecture id {manifest.get('architecture_id')!r}"
            )
        with zf.open("parameters.npz") as f:
            arrays = dict(np.load(io.BytesIO(f.read())))
    state: dict = {"_momentum": {}, "_adam": {}, "_adam_t": manifest.get("adam_t", 0)}
    for key, arr in arrays.items():
        kind, _, name = key.partition("/")
        if kind == "param":
            state[name] = arr
        elif kind == "momentum":
            state["_momentum"][name] = arr
        elif kind == "adam_m":
            state["_adam"].setdefault(name, {})["m"] = arr
        elif kind == "adam_v":
            state["_adam"].setdefault(name, {})["v"] = arr
    backend = SmallCnnBackend(
        channels=manifest["channels"],
        image_size=manifest["image_size"],
        seed=manifest["seed"],
        optimizer=manifest.get("optimizer", "sgd"),
        momentum=manifest.get("momentum", 0.0),
    )
    backend.restore(state)
    return backend, manifest
