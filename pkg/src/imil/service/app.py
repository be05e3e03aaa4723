"""HTTP server for the feedback session: serves pending cases and accepts
grid selections from the reviewer while training is paused."""

from __future__ import annotations

from fastapi import FastAPI, Response
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from ..datasets import encode_png
from ..exceptions import NotFoundError, StateError, ValidationError
from ..saliency import overlay_png_bytes
from .coordinator import SessionCoordinator


class GridShape(BaseModel):
    rows: int
    cols: int


class SessionView(BaseModel):
    session_id: str
    epoch: int
    total_cases: int
    resolved_count: int
    pending_case_ids: list[str]


class CasePayload(BaseModel):
    sample_id: str
    rank: int
    predicted_label: int
    confidence: float
    true_label: int
    grid: GridShape
    status: str
    image_url: str
    heatmap_url: str


class SelectionBody(BaseModel):
    cells: list[int]


class ResolutionAck(BaseModel):
    sample_id: str
    action: str
    cells: list[int] | None = None


class ApiError(Exception):
    def __init__(self, status_code: int, code: str, message: str):
        self.status_code = status_code
        self.code = code
        self.message = message


def create_app(coordinator: SessionCoordinator,
               cors_origins: tuple[str, ...] = ("*",)) -> FastAPI:
    app = FastAPI(title="imil feedback service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=list(cors_origins),
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.exception_handler(ApiError)
    async def api_error_handler(request, exc: ApiError):
        return JSONResponse(status_code=exc.status_code,
                            content={"code": exc.code, "message": exc.message})

    def _case_or_404(sample_id: str):
        try:
            return coordinator.case_view(sample_id)
        except NotFoundError as exc:
            raise ApiError(404, "not_found", str(exc)) from None

    @app.get("/session", response_model=SessionView)
    def get_session():
        try:
            return SessionView(**coordinator.session_view())
        except NotFoundError:
            raise ApiError(404, "no_session", "no active feedback session")

    @app.get("/cases/{sample_id}", response_model=CasePayload)
    def get_case(sample_id: str):
        case, status = _case_or_404(sample_id)
        return CasePayload(
            sample_id=case.sample_id,
            rank=case.rank,
            predicted_label=case.record.predicted_label,
            confidence=case.record.confidence,
            true_label=case.record.true_label,
            grid=GridShape(rows=case.grid.rows, cols=case.grid.cols),
            status=status,
            image_url=f"/cases/{case.sample_id}/image",
            heatmap_url=f"/cases/{case.sample_id}/heatmap",
        )

    @app.get("/cases/{sample_id}/image")
    def get_case_image(sample_id: str):
        case, _ = _case_or_404(sample_id)
        return Response(content=encode_png(case.image), media_type="image/png")

    @app.get("/cases/{sample_id}/heatmap")
    def get_case_heatmap(sample_id: str):
        case, _ = _case_or_404(sample_id)
        return Response(content=overlay_png_bytes(case.image, case.heatmap),
                        media_type="image/png")

    @app.post("/cases/{sample_id}/selection", response_model=ResolutionAck)
    def post_selection(sample_id: str, body: SelectionBody):
        case, _ = _case_or_404(sample_id)
        if not body.cells:
            raise ApiError(422, "empty_selection",
                           "at least one cell must be selected")
        n_cells = case.grid.n_cells
        bad = [c for c in body.cells if not 0 <= c < n_cells]
        if bad:
            raise ApiError(422, "bad_cell",
                           f"cell indices {sorted(bad)} out of range "
                           f"[0, {n_cells})")
        try:
            coordinator.submit(sample_id, body.cells)
        except StateError as exc:
            raise ApiError(409, "already_resolved", str(exc)) from None
        except NotFoundError as exc:
            raise ApiError(404, "not_found", str(exc)) from None
        except ValidationError as exc:
            raise ApiError(422, "bad_cell", str(exc)) from None
        return ResolutionAck(sample_id=sample_id, action="selection",
                             cells=sorted(set(body.cells)))

    @app.post("/cases/{sample_id}/skip", response_model=ResolutionAck)
    def post_skip(sample_id: str):
        _case_or_404(sample_id)
        try:
            coordinator.submit(sample_id, None)
        except StateError as exc:
            raise ApiError(409, "already_resolved", str(exc)) from None
        except NotFoundError as exc:
            raise ApiError(404, "not_found", str(exc)) from None
        return ResolutionAck(sample_id=sample_id, action="skip")

    return app
