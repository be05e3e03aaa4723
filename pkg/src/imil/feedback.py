"""Feedback providers: the reviewer abstraction behind the feedback round.

Ships three non-interactive implementations — scripted replay from a session
log, a ground-truth oracle for synthetic data, and a random-selection
control — so the full feedback path is testable without a human.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, runtime_checkable

import numpy as np

from .augment import GridGeometry, GridSelection, cell_bounds
from .callback import FeedbackSession, OutlierCase
from .datasets import Rect
from .exceptions import ValidationError

logger = logging.getLogger(__name__)

ORACLE_POLICIES = ("minimal-cover", "exact-cover")


@runtime_checkable
class FeedbackProvider(Protocol):
    """Resolves cases one at a time; None means skip."""

    def start(self, session: FeedbackSession) -> None:
        ...

    def resolve(self, case: OutlierCase,
                timeout: float | None = None) -> GridSelection | None:
        ...

    def finish(self, session: FeedbackSession) -> None:
        ...


class ScriptedProvider:
    """Replays resolutions recorded in a session log.

    Lenient by default: a case absent from the log is skipped with a
    warning; strict mode raises instead.
    """

    def __init__(self, session_log_path: str | Path | None = None,
                 resolutions: dict | None = None, strict: bool = False):
        if (session_log_path is None) == (resolutions is None):
            raise ValidationError(
                "provide exactly one of session_log_path or resolutions")
        if session_log_path is not None:
            try:
                log = json.loads(Path(session_log_path).read_text(encoding="utf-8"))
            except (OSError, json.JSONDecodeError) as exc:
                raise ValidationError(
                    f"cannot read session log {session_log_path}: {exc}") from exc
            resolutions = log.get("resolutions", {})
        self.resolutions = resolutions or {}
        self.strict = strict

    def start(self, session: FeedbackSession) -> None:
        pass

    def resolve(self, case: OutlierCase,
                timeout: float | None = None) -> GridSelection | None:
        entry = self.resolutions.get(case.sample_id)
        if entry is None:
            if self.strict:
                raise ValidationError(
                    f"no scripted resolution for sample {case.sample_id!r}")
            logger.warning("no scripted resolution for %s; skipping",
                           case.sample_id)
            return None
        if isinstance(entry, dict):
            if entry.get("action") == "skip":
                return None
            cells = entry.get("cells", [])
        else:
            # bare list of cells
            cells = entry
        return GridSelection(geometry=case.grid,
                             selected=frozenset(int(c) for c in cells))

    def finish(self, session: FeedbackSession) -> None:
        pass


@dataclass(frozen=True)
class OracleSpec:
    """Ground-truth region to preserve, plus the cover policy."""

    signal_region: Rect
    policy: str = "exact-cover"

    def __post_init__(self):
        r0, c0, r1, c1 = self.signal_region
        if not (r0 < r1 and c0 < c1):
            raise ValidationError(
                f"signal_region {self.signal_region} is empty")
        if self.policy not in ORACLE_POLICIES:
            raise ValidationError(
                f"policy must be one of {ORACLE_POLICIES}, got {self.policy!r}")


def _overlap_area(a: Rect, b: Rect) -> int:
    rows = min(a[2], b[2]) - max(a[0], b[0])
    cols = min(a[3], b[3]) - max(a[1], b[1])
    return max(0, rows) * max(0, cols)


def oracle_cells(spec: OracleSpec, geometry: GridGeometry) -> frozenset[int]:
    """Cells the oracle would select for this geometry.

    minimal-cover: the single cell with the largest overlap with the signal
    region, ties to the lowest index. exact-cover: every intersecting cell.
    """
    region = spec.signal_region
    if not (0 <= region[0] and 0 <= region[1]
            and region[2] <= geometry.image_height
            and region[3] <= geometry.image_width):
        raise ValidationError(
            f"signal_region {region} outside image "
            f"{geometry.image_height}x{geometry.image_width}")
    overlaps = [(_overlap_area(region, cell_bounds(geometry, c)), c)
                for c in range(geometry.n_cells)]
    if spec.policy == "minimal-cover":
        best_area, best_cell = max(overlaps, key=lambda t: (t[0], -t[1]))
        return frozenset({best_cell})
    return frozenset(c for area, c in overlaps if area > 0)


class OracleProvider:
    """Selects the grid cells covering a known ground-truth region."""

    def __init__(self, spec: OracleSpec, geometry: GridGeometry | None = None):
        self.spec = spec
        if geometry is not None:
            # fail fast when a fixed geometry is supplied up front
            oracle_cells(spec, geometry)
        self.geometry = geometry

    def start(self, session: FeedbackSession) -> None:
        pass

    def resolve(self, case: OutlierCase,
                timeout: float | None = None) -> GridSelection | None:
        cells = oracle_cells(self.spec, case.grid)
        return GridSelection(geometry=case.grid, selected=cells)

    def finish(self, session: FeedbackSession) -> None:
        pass


class RandomProvider:
    """Control arm: selects cells uniformly at random.

    Selects per case as many cells as a reference oracle would (an
    area-matched control) or a fixed count.
    """

    def __init__(self, seed: int, n_cells: int | None = None,
                 match_oracle: OracleSpec | None = None):
        if n_cells is not None and n_cells < 1:
            raise ValidationError(f"n_cells must be >= 1, got {n_cells}")
        if (n_cells is None) == (match_oracle is None):
            raise ValidationError(
                "provide exactly one of n_cells or match_oracle")
        self.rng = np.random.default_rng(seed)
        self.n_cells = n_cells
        self.match_oracle = match_oracle

    def start(self, session: FeedbackSession) -> None:
        pass

    def resolve(self, case: OutlierCase,
                timeout: float | None = None) -> GridSelection | None:
        if self.match_oracle is not None:
            k = len(oracle_cells(self.match_oracle, case.grid))
        else:
            k = self.n_cells
        k = min(k, case.grid.n_cells)
        chosen = self.rng.choice(case.grid.n_cells, size=k, replace=False)
        return GridSelection(geometry=case.grid,
                             selected=frozenset(int(c) for c in chosen))

    def finish(self, session: FeedbackSession) -> None:
        pass
