"""Hand-off point between the paused training thread and HTTP reviewers.

The web side parks at most one resolution per case (first submission wins);
the training side's provider consumes them in session order, blocking until
the case it needs arrives. Training state (store, case status) is mutated
only on the training thread.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

from ..augment import GridSelection
from ..callback import FeedbackSession, OutlierCase
from ..exceptions import FeedbackTimeout, NotFoundError, StateError, ValidationError


@dataclass
class _Parked:
    action: str  # "selection" | "skip"
    selection: GridSelection | None


class SessionCoordinator:
    """Serializes reviewer submissions for the active feedback session."""

    def __init__(self):
        self._cond = threading.Condition()
        self._session: FeedbackSession | None = None
        # sample_id -> _Parked; entries stay after consumption so duplicate
        # submissions can be rejected for the whole session lifetime
        self._submitted: dict[str, _Parked] = {}
        self._consumed: set[str] = set()

    # -- training side ----------------------------------------------------

    def open_session(self, session: FeedbackSession) -> None:
        with self._cond:
            if self._session is not None:
                raise StateError("a feedback session is already active")
            self._session = session
            self._submitted = {}
            self._consumed = set()
            self._cond.notify_all()

    def close_session(self) -> None:
        with self._cond:
            self._session = None
            self._cond.notify_all()

    def await_resolution(self, sample_id: str,
                         timeout: float | None = None) -> _Parked:
        """Block until a submission for sample_id arrives; consume it."""
        with self._cond:
            def ready():
                return sample_id in self._submitted
            if not self._cond.wait_for(ready, timeout=timeout):
                raise FeedbackTimeout(
                    f"no resolution for {sample_id!r} within {timeout}s")
            self._consumed.add(sample_id)
            return self._submitted[sample_id]

    # -- web side ----------------------------------------------------------

    @property
    def session(self) -> FeedbackSession | None:
        return self._session

    def require_session(self) -> FeedbackSession:
        session = self._session
        if session is None:
            raise NotFoundError("no active feedback session")
        return session

    def case_view(self, sample_id: str) -> tuple[OutlierCase, str]:
        """Case plus its reviewer-facing status, which flips as soon as a
        submission is accepted (before the training thread consumes it)."""
        session = self.require_session()
        try:
            case = session.case_by_id(sample_id)
        except KeyError:
            raise NotFoundError(f"no case for sample {sample_id!r}") from None
        with self._cond:
            parked = self._submitted.get(sample_id)
        if parked is not None:
            status = "resolved" if parked.action == "selection" else "skipped"
        else:
            status = case.status.value
        return case, status

    def session_view(self) -> dict:
        session = self.require_session()
        with self._cond:
            done = set(self._submitted)
        done.update(c.sample_id for c in session.cases
                    if c.status.value != "pending")
        pending = [c.sample_id for c in session.cases if c.sample_id not in done]
        return {
            "session_id": session.session_id,
            "epoch": session.epoch,
            "total_cases": session.total_cases,
            "resolved_count": session.total_cases - len(pending),
            "pending_case_ids": pending,
        }

    def submit(self, sample_id: str, cells: list[int] | None) -> _Parked:
        """Park one resolution; cells=None means skip. First submission wins,
        any later one raises StateError. Validation happens before the case
        is claimed, so a rejected submission leaves it pending."""
        with self._cond:
            session = self.require_session()
            try:
                case = session.case_by_id(sample_id)
            except KeyError:
                raise NotFoundError(f"no case for sample {sample_id!r}") from None
            if sample_id in self._submitted or case.status.value != "pending":
                raise StateError(f"case {sample_id!r} already resolved")
            if cells is None:
                parked = _Parked(action="skip", selection=None)
            else:
                selection = GridSelection(geometry=case.grid,
                                          selected=frozenset(cells))
                parked = _Parked(action="selection", selection=selection)
            self._submitted[sample_id] = parked
            self._cond.notify_all()
            return parked


class InteractiveProvider:
    """Feedback provider that waits on a coordinator for each case."""

    def __init__(self, coordinator: SessionCoordinator):
        self.coordinator = coordinator

    def start(self, session: FeedbackSession) -> None:
        self.coordinator.open_session(session)

    def resolve(self, case: OutlierCase,
                timeout: float | None = None) -> GridSelection | None:
        parked = self.coordinator.await_resolution(case.sample_id, timeout)
        return parked.selection

    def finish(self, session: FeedbackSession) -> None:
        self.coordinator.close_session()
