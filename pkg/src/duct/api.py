"""HTTP/JSON face of the query engine.

One program per service instance, loaded at startup; every endpoint is
read-only over the shared session, so requests are order-insensitive.
"""

from __future__ import annotations

from fastapi import FastAPI, Request, Response
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from . import __version__
from .model import ResolveError
from .service import (
    QueryRequest,
    Session,
    canonical_json,
    file_list,
    run_query,
    source_listing,
    stats_dict,
)


def create_app(session: Session) -> FastAPI:
    app = FastAPI(title="duct", version=__version__)
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.exception_handler(RequestValidationError)
    async def invalid_request(request: Request,
                              exc: RequestValidationError) -> JSONResponse:
        return JSONResponse(status_code=400,
                            content={"detail": exc.errors()})

    @app.get("/health")
    def health() -> dict:
        return {
            "status": "ok",
            "program": session.path.name,
            "methods": len(session.program.methods),
        }

    @app.get("/program/files")
    def files() -> dict:
        return file_list(session).model_dump()

    @app.get("/source")
    def source(file: str) -> Response:
        listing = source_listing(session, file)
        if listing is None:
            return JSONResponse(
                status_code=404,
                content={"detail": {"error": f"unknown file {file!r}",
                                    "code": "unknown-file"}})
        return Response(content=canonical_json(listing),
                        media_type="application/json")

    @app.post("/query")
    def query(request: QueryRequest) -> Response:
        try:
            response = run_query(session, request)
        except ResolveError as exc:
            return JSONResponse(
                status_code=422,
                content={"detail": {"error": str(exc), "code": exc.code}})
        return Response(content=canonical_json(response),
                        media_type="application/json")

    @app.get("/stats")
    def stats() -> dict:
        return stats_dict(session)

    return app
