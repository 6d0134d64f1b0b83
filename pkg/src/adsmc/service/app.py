"""HTTP front end: ``uvicorn adsmc.service.app:app``."""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..errors import ConfigError, ContractViolation
from . import handlers
from .schemas import (
    CompareRequest,
    CompareResponse,
    ErrorBody,
    RunRequest,
    RunResponse,
    SelftestResponse,
    SweepRequest,
    SweepResponse,
)

app = FastAPI(title="adsmc", version=__version__)

_ERRORS = {422: {"model": ErrorBody}, 409: {"model": ErrorBody}}


@app.exception_handler(ConfigError)
async def _config_error(request: Request, exc: ConfigError):
    return JSONResponse(status_code=422,
                        content=ErrorBody(message=str(exc), violations=exc.violations).model_dump())


@app.exception_handler(ContractViolation)
async def _contract_error(request: Request, exc: ContractViolation):
    return JSONResponse(status_code=409, content=ErrorBody(message=str(exc)).model_dump())


@app.get("/health")
def health():
    return {"status": "ok", "version": __version__}


@app.post("/run", response_model=RunResponse, responses=_ERRORS)
def run(req: RunRequest):
    return handlers.handle_run(req)


@app.post("/compare", response_model=CompareResponse, responses=_ERRORS)
def compare(req: CompareRequest):
    return handlers.handle_compare(req)


@app.post("/sweep", response_model=SweepResponse, responses=_ERRORS)
def sweep(req: SweepRequest):
    return handlers.handle_sweep(req)


@app.post("/selftest", response_model=SelftestResponse)
def selftest(seed: int = 0):
    return handlers.handle_selftest(seed)
