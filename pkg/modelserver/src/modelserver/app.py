"""FastAPI application implementing the masked-logit wire protocol.

Endpoints:
    GET  /info          -> {"name", "alphabet", "max_length"}
    GET  /healthz       -> {"status": "ok"}
    POST /logits        -> {"logits": [[20 floats], ...]} rows in sorted
                           position order
    POST /logits_batch  -> {"results": [{"logits": ...}, ...]}

Validation errors return 400 (malformed content) or 422 (length violations)
with {"error": reason}.
"""

from __future__ import annotations

from fastapi import FastAPI
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .model import ALPHABET, TinyMaskedLm


class LogitsRequest(BaseModel):
    sequence: str
    masked_positions: list[int] = Field(default_factory=list)
    report_positions: list[int] | None = None


class BatchRequest(BaseModel):
    requests: list[LogitsRequest]


class RequestError(Exception):
    def __init__(self, status: int, reason: str):
        self.status = status
        self.reason = reason


def _validate(req: LogitsRequest, max_length: int) -> list[int]:
    """Return the positions to report; raise RequestError on bad input."""
    L = len(req.sequence)
    if L == 0 or L > max_length:
        raise RequestError(422, f"sequence length {L} outside [1, {max_length}]")
    bad = sorted(set(req.sequence) - set(ALPHABET))
    if bad:
        raise RequestError(400, f"invalid residues: {''.join(bad)}")
    for p in req.masked_positions:
        if not 0 <= p < L:
            raise RequestError(400, f"masked position {p} outside [0, {L})")
    if req.masked_positions:
        return sorted(set(req.masked_positions))
    if req.report_positions is None:
        raise RequestError(400, "empty mask requires report_positions")
    for p in req.report_positions:
        if not 0 <= p < L:
            raise RequestError(400, f"report position {p} outside [0, {L})")
    if not req.report_positions:
        raise RequestError(400, "report_positions must be non-empty")
    return sorted(set(req.report_positions))


def create_app(seed: int = 0, max_length: int = 256,
               name: str = "tiny-esm-random") -> FastAPI:
    app = FastAPI(title=name)
    model = TinyMaskedLm(seed=seed, max_length=max_length)

    @app.exception_handler(RequestError)
    async def handle_request_error(_, exc: RequestError):
        return JSONResponse(status_code=exc.status, content={"error": exc.reason})

    @app.get("/info")
    def info():
        return {"name": name, "alphabet": ALPHABET, "max_length": max_length}

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.post("/logits")
    def logits(req: LogitsRequest):
        report = _validate(req, max_length)
        return {"logits": model.logits(req.sequence, req.masked_positions, report)}

    @app.post("/logits_batch")
    def logits_batch(batch: BatchRequest):
        results = []
        for req in batch.requests:
            report = _validate(req, max_length)
            results.append(
                {"logits": model.logits(req.sequence, req.masked_positions, report)}
            )
        return {"results": results}

    return app
