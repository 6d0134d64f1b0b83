"""Service operations as plain functions over the request models.

The HTTP routes and the in-process CLI both call these, so a command gives
the same answer whether or not a server is involved.
"""

from __future__ import annotations

import time

from ..harness.compare import compare, sweep
from ..harness.config import ScenarioConfig, parse_config, with_updates
from ..harness.runner import run_scenario
from ..oracles import run_all
from .schemas import (
    CompareRequest,
    CompareResponse,
    CompareRow,
    OracleOutcome,
    RunRequest,
    RunResponse,
    SelftestResponse,
    SweepRequest,
    SweepResponse,
)


def scenario(data: dict, seed: int | None) -> ScenarioConfig:
    cfg = parse_config(data)
    return cfg if seed is None else with_updates(cfg, seed=seed)


def handle_run(req: RunRequest) -> RunResponse:
    cfg = scenario(req.config, req.seed)
    res = run_scenario(cfg)
    return RunResponse(
        name=cfg.name,
        config=cfg.model_dump(mode="json"),
        report=res.report.to_dict(),
        series_csv=res.csv_text() if req.include_series else None,
    )


def handle_compare(req: CompareRequest) -> CompareResponse:
    a, b = scenario(req.a, req.seed), scenario(req.b, req.seed)
    c = compare(a, b)
    return CompareResponse(name_a=c.name_a, name_b=c.name_b,
                           rows=[CompareRow(**r) for r in c.rows()],
                           table=c.to_table(), csv=c.to_csv())


def handle_sweep(req: SweepRequest) -> SweepResponse:
    base = scenario(req.config, req.seed)
    res = sweep(req.axis, base, req.values, workers=req.workers)
    return SweepResponse(axis=res.axis, header=res.header, rows=res.matrix(), flags=res.flags,
                         table=res.to_table(), csv=res.to_csv())


def handle_selftest(seed: int = 0) -> SelftestResponse:
    t0 = time.perf_counter()
    results = run_all(seed)
    return SelftestResponse(
        passed=all(r.passed for r in results),
        seconds=time.perf_counter() - t0,
        results=[OracleOutcome(name=r.name, passed=r.passed, detail=r.detail,
                               seconds=r.seconds) for r in results],
    )
