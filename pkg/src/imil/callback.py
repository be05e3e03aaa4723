"""Mid-training feedback round: pick the highest-confidence mispredictions,
collect grid selections from a reviewer, black out everything they did not
select, and swap the results into the training store before training resumes.
"""

from __future__ import annotations

import enum
import json
import logging
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import TYPE_CHECKING, Callable, Sequence

import numpy as np

from .augment import GridGeometry, GridSelection, blackout
from .datasets import TrainingStore
from .exceptions import FeedbackTimeout, StateError, ValidationError
from .model import BackendContract
from .saliency import Heatmap, grad_cam
from .training import HookSignal, PredictionRecord

if TYPE_CHECKING:
    from .feedback import FeedbackProvider

logger = logging.getLogger(__name__)

FEEDBACK_SOURCES = ("interactive", "scripted", "oracle", "random")


@dataclass(frozen=True)
class ImilConfig:
    num_outliers: int = 20
    imil_epoch: int = 70
    grid_size: int = 4
    feedback_source: str = "interactive"
    session_timeout: float | None = None
    # optional extra trigger epochs; imil_epoch alone when unset
    imil_epochs: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.num_outliers < 1:
            raise ValidationError(
                f"num_outliers must be >= 1, got {self.num_outliers}")
        if self.imil_epoch < 1:
            raise ValidationError(
                f"imil_epoch must be >= 1, got {self.imil_epoch}")
        if self.grid_size < 2:
            raise ValidationError(
                f"grid_size must be >= 2, got {self.grid_size}")
        if self.feedback_source not in FEEDBACK_SOURCES:
            raise ValidationError(
                f"feedback_source must be one of {FEEDBACK_SOURCES}, "
                f"got {self.feedback_source!r}")
        if self.session_timeout is not None and self.session_timeout <= 0:
            raise ValidationError("session_timeout must be positive or none")
        if self.imil_epochs is not None:
            if not self.imil_epochs or any(e < 1 for e in self.imil_epochs):
                raise ValidationError("imil_epochs must be a nonempty list "
                                      "of epochs >= 1")

    @property
    def trigger_epochs(self) -> frozenset[int]:
        if self.imil_epochs is not None:
            return frozenset(self.imil_epochs)
        return frozenset({self.imil_epoch})


class CaseStatus(str, enum.Enum):
    PENDING = "pending"
    RESOLVED = "resolved"
    SKIPPED = "skipped"


@dataclass
class OutlierCase:
    """One misprediction packaged for review: pixel snapshot, heatmap for
    the predicted class, the prediction record, and the feedback grid."""

    rank: int
    record: PredictionRecord
    image: np.ndarray
    heatmap: Heatmap
    grid: GridGeometry
    status: CaseStatus = CaseStatus.PENDING

    @property
    def sample_id(self) -> str:
        return self.record.sample_id

    def to_dict(self) -> dict:
        return {
            "sample_id": self.sample_id,
            "rank": self.rank,
            "predicted_label": self.record.predicted_label,
            "confidence": self.record.confidence,
            "true_label": self.record.true_label,
            "grid": {"rows": self.grid.rows, "cols": self.grid.cols},
            "status": self.status.value,
        }


@dataclass
class FeedbackSession:
    session_id: str
    epoch: int
    cases: list[OutlierCase]
    run_name: str = "run"
    # sample_id -> {"action": "selection"|"skip", "cells": [...], "timestamp": ...}
    resolutions: dict[str, dict] = field(default_factory=dict)
    aborted: bool = False

    @property
    def total_cases(self) -> int:
        return len(self.cases)

    @property
    def resolved_count(self) -> int:
        return sum(1 for c in self.cases if c.status != CaseStatus.PENDING)

    @property
    def complete(self) -> bool:
        return self.resolved_count == self.total_cases

    def pending_case_ids(self) -> list[str]:
        return [c.sample_id for c in self.cases if c.status == CaseStatus.PENDING]

    def case_by_id(self, sample_id: str) -> OutlierCase:
        for case in self.cases:
            if case.sample_id == sample_id:
                return case
        raise KeyError(sample_id)

    def to_dict(self) -> dict:
        return {
            "session_id": self.session_id,
            "run_name": self.run_name,
            "epoch": self.epoch,
            "cases": [c.to_dict() for c in self.cases],
            "resolutions": self.resolutions,
            "aborted": self.aborted,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def select_outliers(records: Sequence[PredictionRecord],
                    n: int) -> list[PredictionRecord]:
    """Mispredictions ordered by confidence descending, ties by sample id;
    at most n, fewer when mispredictions are scarce."""
    if n < 1:
        raise ValidationError(f"n must be >= 1, got {n}")
    wrong = [r for r in records if r.predicted_label != r.true_label]
    wrong.sort(key=lambda r: (-r.confidence, r.sample_id))
    return wrong[:n]


def build_session(outliers: Sequence[PredictionRecord],
                  backend: BackendContract, store: TrainingStore,
                  grid_size: int, epoch: int,
                  run_name: str = "run") -> FeedbackSession:
    """Package outliers into pending cases: image snapshot, heatmap for the
    predicted class, and the selection grid. Ranks count from 1."""
    if not outliers:
        raise ValidationError("cannot build a session from zero outliers")
    cases = []
    for rank, record in enumerate(outliers, start=1):
        pixels = store.get(record.sample_id).pixels.copy()
        heatmap = grad_cam(backend, pixels, record.predicted_label)
        grid = GridGeometry(rows=grid_size, cols=grid_size,
                            image_height=pixels.shape[0],
                            image_width=pixels.shape[1])
        cases.append(OutlierCase(rank=rank, record=record, image=pixels,
                                 heatmap=heatmap, grid=grid))
    return FeedbackSession(session_id=f"{run_name}-epoch{epoch}",
                           epoch=epoch, cases=cases, run_name=run_name)


def apply_feedback(store: TrainingStore, case: OutlierCase,
                   selection: GridSelection) -> TrainingStore:
    """Blackout the case's snapshot outside the selected cells and replace
    the stored sample in place. A case resolves at most once."""
    if case.status != CaseStatus.PENDING:
        raise StateError(
            f"case {case.sample_id} already {case.status.value}")
    if selection.geometry != case.grid:
        raise ValidationError(
            f"selection geometry {selection.geometry} does not match "
            f"case grid {case.grid}")
    new_pixels = blackout(case.image, selection)
    store.replace(case.sample_id, new_pixels)
    case.status = CaseStatus.RESOLVED
    return store


def skip_case(case: OutlierCase) -> None:
    """Mark a pending case skipped; the stored sample stays untouched."""
    if case.status != CaseStatus.PENDING:
        raise StateError(
            f"case {case.sample_id} already {case.status.value}")
    case.status = CaseStatus.SKIPPED


def _timestamp() -> str:
    return datetime.now(timezone.utc).isoformat()


class ImilCallback:
    """Epoch hook that runs the feedback round at the configured epoch(s).

    The feedback path draws nothing from the training rng stream, so a run
    where every case is skipped matches the no-feedback baseline exactly.
    """

    def __init__(self, config: ImilConfig, provider: "FeedbackProvider",
                 run_name: str = "run",
                 log_dir: str | Path | None = None,
                 on_pause: Callable[[int, BackendContract], None] | None = None):
        self.config = config
        self.provider = provider
        self.run_name = run_name
        self.log_dir = Path(log_dir) if log_dir is not None else None
        # called right before the blocking feedback wait; the experiment
        # layer uses it to persist a resumable checkpoint
        self.on_pause = on_pause
        self.sessions: list[FeedbackSession] = []

    def session_log_path(self, epoch: int) -> Path | None:
        if self.log_dir is None:
            return None
        return self.log_dir / f"session_{self.run_name}_{epoch}.json"

    def _persist(self, session: FeedbackSession) -> None:
        path = self.session_log_path(session.epoch)
        if path is None:
            return
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(session.to_json(), encoding="utf-8")

    def on_epoch_end(self, epoch: int, backend: BackendContract,
                     store: TrainingStore,
                     predict: Callable[[], list[PredictionRecord]]) -> HookSignal:
        if epoch not in self.config.trigger_epochs:
            return HookSignal.PROCEED
        records = predict()
        outliers = select_outliers(records, self.config.num_outliers)
        if not outliers:
            logger.info("epoch %d: no mispredictions, skipping feedback round",
                        epoch)
            session = FeedbackSession(
                session_id=f"{self.run_name}-epoch{epoch}", epoch=epoch,
                cases=[], run_name=self.run_name)
            self.sessions.append(session)
            self._persist(session)
            return HookSignal.PROCEED
        session = build_session(outliers, backend, store,
                                self.config.grid_size, epoch, self.run_name)
        self.sessions.append(session)
        if self.on_pause is not None:
            self.on_pause(epoch, backend)
        try:
            self._run_session(session, store)
        except KeyboardInterrupt:
            # persist the partial session so --resume can finish it
            self._persist(session)
            raise
        self._persist(session)
        return HookSignal.PAUSE_FOR_FEEDBACK

    def _run_session(self, session: FeedbackSession,
                     store: TrainingStore) -> None:
        deadline = None
        if self.config.session_timeout is not None:
            deadline = time.monotonic() + self.config.session_timeout
        self.provider.start(session)
        timed_out = False
        try:
            for case in session.cases:
                if timed_out:
                    self._record_skip(session, case, reason="timeout")
                    continue
                remaining = None
                if deadline is not None:
                    remaining = deadline - time.monotonic()
                    if remaining <= 0:
                        timed_out = True
                        logger.warning(
                            "session %s timed out; skipping remaining cases",
                            session.session_id)
                        self._record_skip(session, case, reason="timeout")
                        continue
                try:
                    selection = self.provider.resolve(case, timeout=remaining)
                except FeedbackTimeout:
                    timed_out = True
                    logger.warning(
                        "session %s timed out; skipping remaining cases",
                        session.session_id)
                    self._record_skip(session, case, reason="timeout")
                    continue
                except Exception:
                    # persist partial state for post-mortem before aborting
                    session.aborted = True
                    self._persist(session)
                    raise
                if selection is None:
                    self._record_skip(session, case)
                else:
                    apply_feedback(store, case, selection)
                    session.resolutions[case.sample_id] = {
                        "action": "selection",
                        "cells": sorted(selection.selected),
                        "timestamp": _timestamp(),
                    }
        finally:
            self.provider.finish(session)

    @staticmethod
    def _record_skip(session: FeedbackSession, case: OutlierCase,
                     reason: str | None = None) -> None:
        skip_case(case)
        entry: dict = {"action": "skip", "timestamp": _timestamp()}
        if reason:
            entry["reason"] = reason
        session.resolutions[case.sample_id] = entry


def imil_hook(config: ImilConfig, feedback_provider: "FeedbackProvider",
              run_name: str = "run",
              log_dir: str | Path | None = None) -> ImilCallback:
    """Epoch hook wiring the feedback round into a training run."""
    return ImilCallback(config, feedback_provider, run_name=run_name,
                        log_dir=log_dir)
