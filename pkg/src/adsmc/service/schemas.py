"""Request and response models of the simulation service."""

from __future__ import annotations

from typing import Literal, Optional, Union

from pydantic import BaseModel, Field

U64 = Field(None, ge=0, lt=2**64, description="overrides the scenario seed")


class RunRequest(BaseModel):
    config: dict = Field(default_factory=dict, description="scenario mapping, as in a YAML file")
    seed: Optional[int] = U64
    include_series: bool = False


class RunResponse(BaseModel):
    name: str
    config: dict
    report: dict
    series_csv: Optional[str] = None


class CompareRequest(BaseModel):
    a: dict = Field(default_factory=dict)
    b: dict = Field(default_factory=dict)
    seed: Optional[int] = U64


class CompareRow(BaseModel):
    channel: str
    unit: str
    mean_error_b: float
    mean_error_a: float
    improvement_pct: float


class CompareResponse(BaseModel):
    name_a: str
    name_b: str
    rows: list[CompareRow]
    table: str
    csv: str


SweepValue = Union[float, int, None]


class SweepRequest(BaseModel):
    axis: Literal["T", "bits", "uncertainty"]
    config: dict = Field(default_factory=dict)
    values: Optional[list[SweepValue]] = None
    seed: Optional[int] = U64
    workers: int = Field(1, ge=1, le=64)


class SweepResponse(BaseModel):
    axis: str
    header: list[str]
    rows: list[list[Optional[Union[float, int, bool, str]]]]
    flags: list[str]
    table: str
    csv: str


class OracleOutcome(BaseModel):
    name: str
    passed: bool
    detail: str
    seconds: float


class SelftestResponse(BaseModel):
    passed: bool
    seconds: float
    results: list[OracleOutcome]


class ErrorBody(BaseModel):
    message: str
    violations: list[str] = Field(default_factory=list)
