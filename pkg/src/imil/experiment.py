"""Experiment runner: config parsing, run execution, artifact emission,
comparison tables, and resume of interrupted feedback sessions."""

from __future__ import annotations

import csv
import json
import logging
import threading
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import torch

from . import metrics
from .augment import GridSelection
from .callback import FeedbackSession, ImilCallback, ImilConfig, OutlierCase
from .datasets import (SyntheticSpec, TrainingStore, generate_synthetic,
                       load_manifest, save_store, split_dataset)
from .exceptions import ConfigError, StateError, UndefinedMetricError
from .feedback import (FeedbackProvider, OracleProvider, OracleSpec,
                       RandomProvider, ScriptedProvider)
from .model import load_checkpoint, reference_backend, save_checkpoint
from .saliency import grad_cam, overlay_filename, render_overlay
from .training import EpochStats, TrainRunConfig, predict_all, train

logger = logging.getLogger(__name__)


class ExperimentInterrupted(Exception):
    """Run stopped before completion; persisted state may allow --resume."""

    def __init__(self, message: str, resumable: bool):
        super().__init__(message)
        self.resumable = resumable


@dataclass
class FeedbackOptions:
    oracle_policy: str = "exact-cover"
    scripted_log: str | None = None
    scripted_strict: bool = False
    random_cells: int | None = None


@dataclass
class DatasetConfig:
    manifest: str | None = None
    image_root: str | None = None
    train_fraction: float = 0.8
    split_seed: int = 0
    synthetic: SyntheticSpec | None = None

    def validate(self) -> None:
        if (self.manifest is None) == (self.synthetic is None):
            raise ConfigError(
                "dataset: exactly one of 'manifest' or 'synthetic' is required")
        if not 0 < self.train_fraction < 1:
            raise ConfigError(
                f"dataset.train_fraction: must lie in (0,1), "
                f"got {self.train_fraction}")


@dataclass
class OutputConfig:
    overlay_samples: list[str] = field(default_factory=list)
    export_store: bool = False


@dataclass
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8000


@dataclass
class ExperimentConfig:
    run_name: str = "run"
    seed: int = 0
    training: TrainRunConfig = field(default_factory=TrainRunConfig)
    imil: ImilConfig = field(default_factory=ImilConfig)
    feedback: FeedbackOptions = field(default_factory=FeedbackOptions)
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    ece_bins: int = 15
    output: OutputConfig = field(default_factory=OutputConfig)
    service: ServiceConfig = field(default_factory=ServiceConfig)

    def validate(self) -> None:
        try:
            self.training.validate()
        except Exception as exc:
            raise ConfigError(f"training: {exc}") from exc
        self.dataset.validate()
        if self.ece_bins < 1:
            raise ConfigError(f"eval.ece_bins: must be >= 1, got {self.ece_bins}")
        if self.training.augmentation_mode == "imil":
            for epoch in self.imil.trigger_epochs:
                if epoch > self.training.epochs:
                    raise ConfigError(
                        f"imil.imil_epoch: {epoch} exceeds training.epochs "
                        f"{self.training.epochs}")
            if (self.imil.feedback_source == "scripted"
                    and self.feedback.scripted_log is None):
                raise ConfigError(
                    "feedback.scripted_log: required when feedback_source "
                    "is 'scripted'")
        if self.feedback.oracle_policy not in ("minimal-cover", "exact-cover"):
            raise ConfigError(
                f"feedback.oracle_policy: must be 'minimal-cover' or "
                f"'exact-cover', got {self.feedback.oracle_policy!r}")

    def to_resolved_dict(self) -> dict:
        synthetic = None
        if self.dataset.synthetic is not None:
            s = self.dataset.synthetic
            synthetic = {
                "n_per_class": s.n_per_class,
                "n_test_per_class": s.n_test_per_class,
                "image_size": s.image_size,
                "signal_region": list(s.signal_region),
                "spurious_region": list(s.spurious_region),
                "spurious_train_correlation": s.spurious_train_correlation,
                "spurious_test_correlation": s.spurious_test_correlation,
                "noise_std": s.noise_std,
                "seed": s.seed,
                "background_value": s.background_value,
                "signal_value": s.signal_value,
                "marker_value": s.marker_value,
            }
        t = self.training
        i = self.imil
        return {
            "run_name": self.run_name,
            "seed": self.seed,
            "training": {
                "epochs": t.epochs,
                "batch_size": t.batch_size,
                "learning_rate": t.learning_rate,
                "optimizer": t.optimizer,
                "momentum": t.momentum,
                "image_size": t.image_size,
                "augmentation_mode": t.augmentation_mode,
                "mixup_alpha": t.mixup_alpha,
                "cutmix_alpha": t.cutmix_alpha,
                "cutout_size": t.cutout_size,
                "independent_mu": t.independent_mu,
            },
            "imil": {
                "num_outliers": i.num_outliers,
                "imil_epoch": i.imil_epoch,
                "grid_size": i.grid_size,
                "feedback_source": i.feedback_source,
                "session_timeout": i.session_timeout,
                "imil_epochs": list(i.imil_epochs) if i.imil_epochs else None,
            },
            "feedback": {
                "oracle_policy": self.feedback.oracle_policy,
                "scripted_log": self.feedback.scripted_log,
                "scripted_strict": self.feedback.scripted_strict,
                "random_cells": self.feedback.random_cells,
            },
            "dataset": {
                "manifest": self.dataset.manifest,
                "image_root": self.dataset.image_root,
                "train_fraction": self.dataset.train_fraction,
                "split_seed": self.dataset.split_seed,
                "synthetic": synthetic,
            },
            "eval": {"ece_bins": self.ece_bins},
            "output": {
                "overlay_samples": list(self.output.overlay_samples),
                "export_store": self.output.export_store,
            },
            "service": {"host": self.service.host, "port": self.service.port},
        }


def _checked_section(raw: dict, name: str, allowed: set[str]) -> dict:
    if not isinstance(raw, dict):
        raise ConfigError(f"{name}: expected a table/object")
    unknown = set(raw) - allowed
    if unknown:
        raise ConfigError(
            f"{name}: unknown key(s) {sorted(unknown)}; "
            f"allowed: {sorted(allowed)}")
    return raw


def _resolve_path(value: str | None, base_dir: Path) -> str | None:
    if value is None:
        return None
    p = Path(value)
    return str(p if p.is_absolute() else (base_dir / p).resolve())


def parse_config(raw: dict, base_dir: Path) -> ExperimentConfig:
    """Build a validated config from a parsed TOML/JSON document.

    Unknown keys are rejected with the offending section named, so typos
    fail loudly instead of silently reverting to defaults.
    """
    top = _checked_section(raw, "config", {
        "run_name", "seed", "training", "imil", "feedback", "dataset",
        "eval", "output", "service"})
    try:
        training_raw = dict(_checked_section(top.get("training", {}), "training", {
            "epochs", "batch_size", "learning_rate", "optimizer", "momentum",
            "image_size", "augmentation_mode", "mixup_alpha", "cutmix_alpha",
            "cutout_size", "independent_mu"}))
        imil_raw = dict(_checked_section(top.get("imil", {}), "imil", {
            "num_outliers", "imil_epoch", "grid_size", "feedback_source",
            "session_timeout", "imil_epochs"}))
        feedback_raw = dict(_checked_section(top.get("feedback", {}), "feedback", {
            "oracle_policy", "scripted_log", "scripted_strict", "random_cells"}))
        dataset_raw = dict(_checked_section(top.get("dataset", {}), "dataset", {
            "manifest", "image_root", "train_fraction", "split_seed",
            "synthetic"}))
        eval_raw = dict(_checked_section(top.get("eval", {}), "eval", {"ece_bins"}))
        output_raw = dict(_checked_section(top.get("output", {}), "output", {
            "overlay_samples", "export_store"}))
        service_raw = dict(_checked_section(top.get("service", {}), "service", {
            "host", "port"}))

        synthetic = None
        synthetic_raw = dataset_raw.pop("synthetic", None)
        if synthetic_raw is not None:
            synthetic_raw = dict(_checked_section(
                synthetic_raw, "dataset.synthetic", {
                    "n_per_class", "n_test_per_class", "image_size",
                    "signal_region", "spurious_region",
                    "spurious_train_correlation", "spurious_test_correlation",
                    "noise_std", "seed", "background_value", "signal_value",
                    "marker_value"}))
            for key in ("signal_region", "spurious_region"):
                if key in synthetic_raw:
                    synthetic_raw[key] = tuple(int(v) for v in synthetic_raw[key])
            synthetic = SyntheticSpec(**synthetic_raw)
            if "image_size" in training_raw:
                if training_raw["image_size"] != synthetic.image_size:
                    raise ConfigError(
                        f"training.image_size {training_raw['image_size']} "
                        f"conflicts with dataset.synthetic.image_size "
                        f"{synthetic.image_size}")
            else:
                training_raw["image_size"] = synthetic.image_size

        seed = int(top.get("seed", 0))
        if "imil_epochs" in imil_raw and imil_raw["imil_epochs"] is not None:
            imil_raw["imil_epochs"] = tuple(int(e) for e in imil_raw["imil_epochs"])
        dataset_raw["manifest"] = _resolve_path(dataset_raw.get("manifest"), base_dir)
        dataset_raw["image_root"] = _resolve_path(dataset_raw.get("image_root"),
                                                  base_dir)
        feedback_raw["scripted_log"] = _resolve_path(
            feedback_raw.get("scripted_log"), base_dir)

        config = ExperimentConfig(
            run_name=str(top.get("run_name", "run")),
            seed=seed,
            training=TrainRunConfig(seed=seed, **training_raw),
            imil=ImilConfig(**imil_raw),
            feedback=FeedbackOptions(**feedback_raw),
            dataset=DatasetConfig(synthetic=synthetic, **dataset_raw),
            ece_bins=int(eval_raw.get("ece_bins", 15)),
            output=OutputConfig(**output_raw),
            service=ServiceConfig(**service_raw),
        )
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    except Exception as exc:
        # dataclass validators raise package errors; surface them as config
        raise ConfigError(str(exc)) from exc
    config.validate()
    return config


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    text = path.read_text(encoding="utf-8")
    if path.suffix in (".toml", ".tml"):
        try:
            import tomllib  # py311+
        except ModuleNotFoundError:
            import tomli as tomllib
        try:
            raw = tomllib.loads(text)
        except Exception as exc:
            raise ConfigError(f"cannot parse TOML config {path}: {exc}") from exc
    elif path.suffix == ".json":
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"cannot parse JSON config {path}: {exc}") from exc
    else:
        raise ConfigError(
            f"unsupported config extension {path.suffix!r} (use .toml or .json)")
    return parse_config(raw, path.parent.resolve())


def apply_overrides(config: ExperimentConfig, seed: int | None = None,
                    feedback: str | None = None,
                    port: int | None = None) -> ExperimentConfig:
    """CLI flag overrides; `feedback` accepts 'scripted:PATH' to set the log."""
    if seed is not None:
        config = replace(config, seed=seed,
                         training=replace(config.training, seed=seed))
    if feedback is not None:
        source, _, log_path = feedback.partition(":")
        config = replace(config, imil=replace(config.imil,
                                              feedback_source=source))
        if source == "scripted":
            if not log_path:
                raise ConfigError(
                    "--feedback scripted requires 'scripted:PATH'")
            config = replace(config, feedback=replace(
                config.feedback,
                scripted_log=str(Path(log_path).resolve())))
        config.validate()
    if port is not None:
        config = replace(config, service=replace(config.service, port=port))
    return config


def build_stores(config: ExperimentConfig) -> tuple[TrainingStore, TrainingStore]:
    ds = config.dataset
    if ds.synthetic is not None:
        return generate_synthetic(ds.synthetic)
    manifest = Path(ds.manifest)
    image_root = Path(ds.image_root) if ds.image_root else manifest.parent
    store = load_manifest(manifest, image_root,
                          image_size=config.training.image_size)
    return split_dataset(store, ds.train_fraction, ds.split_seed)


def _signal_region(store: TrainingStore) -> tuple[int, int, int, int] | None:
    meta = store.meta or {}
    region = meta.get("signal_region")
    return tuple(int(v) for v in region) if region else None


def make_provider(config: ExperimentConfig,
                  train_store: TrainingStore) -> tuple[FeedbackProvider, object]:
    """Provider per feedback_source; returns (provider, coordinator or None)."""
    source = config.imil.feedback_source
    if source == "scripted":
        return ScriptedProvider(config.feedback.scripted_log,
                                strict=config.feedback.scripted_strict), None
    if source == "oracle":
        region = _signal_region(train_store)
        if region is None:
            raise ConfigError(
                "feedback_source 'oracle' needs a dataset with a recorded "
                "signal region (synthetic data)")
        return OracleProvider(OracleSpec(region,
                                         policy=config.feedback.oracle_policy)), None
    if source == "random":
        region = _signal_region(train_store)
        if config.feedback.random_cells is not None:
            return RandomProvider(config.seed,
                                  n_cells=config.feedback.random_cells), None
        if region is not None:
            return RandomProvider(config.seed, match_oracle=OracleSpec(
                region, policy=config.feedback.oracle_policy)), None
        return RandomProvider(config.seed, n_cells=1), None
    # interactive
    from .service import InteractiveProvider, SessionCoordinator
    coordinator = SessionCoordinator()
    return InteractiveProvider(coordinator), coordinator


class ReplayFirstProvider:
    """Resolves cases from a prior session log first, deferring the rest to
    the wrapped provider. Used by --resume to finish a half-reviewed session."""

    def __init__(self, prior: dict[str, dict], inner: FeedbackProvider):
        self.prior = prior
        self.inner = inner

    def start(self, session: FeedbackSession) -> None:
        self.inner.start(session)

    def resolve(self, case: OutlierCase,
                timeout: float | None = None) -> GridSelection | None:
        entry = self.prior.get(case.sample_id)
        if entry is None:
            return self.inner.resolve(case, timeout)
        if entry.get("action") == "skip":
            return None
        return GridSelection(geometry=case.grid,
                             selected=frozenset(int(c) for c in entry["cells"]))

    def finish(self, session: FeedbackSession) -> None:
        self.inner.finish(session)


class _HistoryWriter:
    """Incremental history.csv so interrupted runs keep completed epochs."""

    def __init__(self, path: Path, start_epoch: int):
        self.path = path
        rows: list[list[str]] = []
        if start_epoch > 0 and path.exists():
            with open(path, newline="", encoding="utf-8") as f:
                reader = csv.reader(f)
                header = next(reader, None)
                for row in reader:
                    if row and int(row[0]) <= start_epoch:
                        rows.append(row)
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            writer.writerow(["epoch", "loss", "train_acc"])
            writer.writerows(rows)

    def __call__(self, stats: EpochStats) -> None:
        with open(self.path, "a", newline="", encoding="utf-8") as f:
            csv.writer(f).writerow(
                [stats.epoch, repr(stats.loss), repr(stats.train_acc)])


def _start_server(coordinator, host: str, port: int):
    import uvicorn

    from .service import create_app
    app = create_app(coordinator)
    server = uvicorn.Server(uvicorn.Config(app, host=host, port=port,
                                           log_level="warning"))
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    return server, thread


def _stop_server(server_ctx) -> None:
    if server_ctx is None:
        return
    server, thread = server_ctx
    server.should_exit = True
    thread.join(timeout=10)


def evaluate(backend, test_store: TrainingStore,
             ece_bins: int) -> metrics.EvalReport:
    records = predict_all(backend, test_store)
    acc = metrics.accuracy(records)
    scores = [r.probabilities[1] for r in records]
    labels = [r.true_label for r in records]
    confidences = [r.confidence for r in records]
    correct = [r.predicted_label == r.true_label for r in records]
    try:
        auroc_val = metrics.auroc(scores, labels)
        roc = metrics.roc_points(scores, labels)
    except UndefinedMetricError:
        auroc_val = None
        roc = []
    ece_val, bins = metrics.ece(confidences, correct, ece_bins)
    return metrics.EvalReport(accuracy=acc, auroc=auroc_val, ece=ece_val,
                              bins=bins, roc_points=roc)


def run_experiment(config: ExperimentConfig, out_dir: str | Path,
                   resume: bool = False) -> Path:
    """Execute one run end to end; returns the report.json path.

    Artifacts: config.resolved.json, history.csv, report.json,
    calibration_bins.csv, roc_points.csv, checkpoints, session logs and
    overlays where configured.
    """
    torch.set_num_threads(1)
    config.validate()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config.resolved.json").write_text(
        json.dumps(config.to_resolved_dict(), indent=2, sort_keys=True) + "\n",
        encoding="utf-8")

    train_store, test_store = build_stores(config)
    first = next(iter(train_store))
    channels = 1 if first.pixels.ndim == 2 else first.pixels.shape[2]
    image_size = first.pixels.shape[0]

    state_path = out_dir / "state.json"
    pause_checkpoint = out_dir / "checkpoint_pause.zip"
    start_epoch = 0
    pending_feedback_epoch: int | None = None
    if resume:
        if not state_path.exists():
            raise StateError(
                f"nothing to resume: {state_path} does not exist")
        state = json.loads(state_path.read_text(encoding="utf-8"))
        backend, _ = load_checkpoint(pause_checkpoint)
        start_epoch = int(state["completed_epochs"])
        if state.get("phase") == "awaiting_feedback":
            pending_feedback_epoch = start_epoch
    else:
        backend = reference_backend(channels, image_size, seed=config.seed,
                                    optimizer=config.training.optimizer,
                                    momentum=config.training.momentum)

    history_writer = _HistoryWriter(out_dir / "history.csv", start_epoch)
    hooks = []
    callback = None
    coordinator = None
    server_ctx = None
    if config.training.augmentation_mode == "imil":
        provider, coordinator = make_provider(config, train_store)
        if pending_feedback_epoch is not None:
            log_path = (out_dir /
                        f"session_{config.run_name}_{pending_feedback_epoch}.json")
            if log_path.exists():
                prior = json.loads(
                    log_path.read_text(encoding="utf-8")).get("resolutions", {})
                if prior:
                    provider = ReplayFirstProvider(prior, provider)

        def _on_pause(epoch: int, paused_backend) -> None:
            save_checkpoint(paused_backend, pause_checkpoint, epoch)
            state_path.write_text(json.dumps(
                {"phase": "awaiting_feedback", "completed_epochs": epoch,
                 "run_name": config.run_name}, indent=2) + "\n",
                encoding="utf-8")

        callback = ImilCallback(config.imil, provider,
                                run_name=config.run_name, log_dir=out_dir,
                                on_pause=_on_pause)
        hooks.append(callback)
        if coordinator is not None:
            server_ctx = _start_server(coordinator, config.service.host,
                                       config.service.port)
    try:
        train_cfg = replace(config.training, seed=config.seed,
                            start_epoch=start_epoch)
        if pending_feedback_epoch is not None and callback is not None:
            # finish the feedback round the interrupted run was waiting on
            callback.on_epoch_end(
                pending_feedback_epoch, backend, train_store,
                lambda: predict_all(backend, train_store))
        backend, _history = train(backend, train_store, train_cfg, hooks,
                                  stats_sink=history_writer)
    except KeyboardInterrupt:
        resumable = state_path.exists()
        raise ExperimentInterrupted(
            "interrupted during feedback session; resume with --resume"
            if resumable else
            "interrupted mid-epoch; no resumable state was written",
            resumable=resumable) from None
    finally:
        _stop_server(server_ctx)

    if state_path.exists():
        state_path.unlink()

    report = evaluate(backend, test_store, config.ece_bins)
    report_path = out_dir / "report.json"
    report_path.write_text(report.to_json() + "\n", encoding="utf-8")
    report.write_csv(out_dir / "calibration_bins.csv",
                     out_dir / "roc_points.csv")
    save_checkpoint(backend, out_dir / "checkpoint_final.zip",
                    epoch=config.training.epochs)
    if config.output.export_store:
        save_store(train_store, out_dir / "store")
    _render_overlays(config, backend, train_store, test_store, out_dir)
    return report_path


def _render_overlays(config: ExperimentConfig, backend,
                     train_store: TrainingStore, test_store: TrainingStore,
                     out_dir: Path) -> None:
    if not config.output.overlay_samples:
        return
    overlay_dir = out_dir / "overlays"
    for sample_id in config.output.overlay_samples:
        sample = None
        for store in (train_store, test_store):
            if sample_id in store:
                sample = store.get(sample_id)
                break
        if sample is None:
            logger.warning("overlay sample %r not found in any store; skipped",
                           sample_id)
            continue
        probs = backend.probabilities(sample.pixels[None, ...])[0]
        predicted = int(np.argmax(probs))
        heatmap = grad_cam(backend, sample.pixels, predicted)
        render_overlay(sample.pixels, heatmap, overlay_dir / overlay_filename(
            sample_id, config.training.epochs, predicted))


def _format_metric(value, delta=None) -> str:
    if value is None:
        return "n/a"
    text = f"{value:.3f}"
    if delta is not None:
        text += f" ({delta:+.3f})"
    return text


def compare_runs(run_dirs: list[str | Path],
                 csv_path: str | Path | None = None) -> str:
    """Comparison table over run directories; deltas against the first run.

    Returns the text table; optionally writes the same data as CSV.
    """
    if not run_dirs:
        raise ConfigError("compare needs at least one run directory")
    rows = []
    for run_dir in run_dirs:
        run_dir = Path(run_dir)
        report_path = run_dir / "report.json"
        if not report_path.exists():
            raise ConfigError(f"no report.json in {run_dir}")
        data = json.loads(report_path.read_text(encoding="utf-8"))
        rows.append((run_dir.name, data.get("accuracy"),
                     data.get("auroc"), data.get("ece")))

    base = rows[0]
    table_rows = []
    for idx, (name, acc, auroc_v, ece_v) in enumerate(rows):
        if idx == 0 or len(rows) == 1:
            cells = [_format_metric(acc), _format_metric(auroc_v),
                     _format_metric(ece_v)]
        else:
            cells = [
                _format_metric(acc, None if acc is None or base[1] is None
                               else acc - base[1]),
                _format_metric(auroc_v, None if auroc_v is None or base[2] is None
                               else auroc_v - base[2]),
                _format_metric(ece_v, None if ece_v is None or base[3] is None
                               else ece_v - base[3]),
            ]
        table_rows.append([name] + cells)

    headers = ["run", "accuracy", "auroc", "ece"]
    widths = [max(len(headers[i]), *(len(r[i]) for r in table_rows))
              for i in range(4)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(headers, widths))]
    lines.append("  ".join("-" * w for w in widths))
    for row in table_rows:
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)))
    text = "\n".join(lines)

    if csv_path is not None:
        with open(csv_path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            writer.writerow(["run", "accuracy", "accuracy_delta",
                             "auroc", "auroc_delta", "ece", "ece_delta"])
            for idx, (name, acc, auroc_v, ece_v) in enumerate(rows):
                if idx == 0:
                    writer.writerow([name, acc, "", auroc_v, "", ece_v, ""])
                else:
                    writer.writerow([
                        name,
                        acc, "" if acc is None or base[1] is None
                        else acc - base[1],
                        auroc_v, "" if auroc_v is None or base[2] is None
                        else auroc_v - base[2],
                        ece_v, "" if ece_v is None or base[3] is None
                        else ece_v - base[3],
                    ])
    return text


def synth_dataset(config: ExperimentConfig, out_dir: str | Path) -> Path:
    """Materialize the configured synthetic dataset as manifest+PNG trees."""
    if config.dataset.synthetic is None:
        raise ConfigError("synth requires a dataset.synthetic section")
    out_dir = Path(out_dir)
    train_store, test_store = generate_synthetic(config.dataset.synthetic)
    save_store(train_store, out_dir / "train")
    save_store(test_store, out_dir / "test")
    meta = {
        "signal_region": list(config.dataset.synthetic.signal_region),
        "spurious_region": list(config.dataset.synthetic.spurious_region),
        "train_size": len(train_store),
        "test_size": len(test_store),
    }
    (out_dir / "dataset.json").write_text(
        json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return out_dir
