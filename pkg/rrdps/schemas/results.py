from __future__ import annotations

import math

from pydantic import BaseModel, ConfigDict, Field, model_validator

from rrdps.enums import RateStatus

from .params import ProtocolParams


class KeyRateResult(BaseModel):
    G: float = Field(ge=0, description="max(G_raw, 0), secret key per pulse")
    G_raw: float
    Q: float = Field(ge=0, description="detection rate per sequence")
    e_bit: float
    e_ph: float
    e_src: float
    e_src_slow: float
    e_mB: float = Field(ge=0)
    status: RateStatus = RateStatus.ok
    model_config = ConfigDict(frozen=True)


class SearchOptions(BaseModel):
    mu_min: float = Field(default=1e-6, gt=0)
    mu_max: float = Field(default=1.0, gt=0)
    points_per_decade: int = Field(default=20, ge=1)
    refine: bool = True
    # Scan every nu_th instead of stopping after `patience` decreases
    full_scan: bool = False
    patience: int = Field(default=3, ge=1)
    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def _check_range(self) -> "SearchOptions":
        if self.mu_max <= self.mu_min:
            raise ValueError("mu_max must exceed mu_min")
        return self


class Optimum(BaseModel):
    eta: float
    mu_opt: float
    nu_th_opt: int
    M_opt: int
    result: KeyRateResult
    model_config = ConfigDict(frozen=True)


class CurveSpec(BaseModel):
    eta_grid: list[float] = Field(min_length=1)
    M_values: list[int] = Field(min_length=1)
    base: ProtocolParams = ProtocolParams()
    model_config = ConfigDict(
        frozen=True,
        json_schema_extra={
            "example": {
                "eta_grid": [1e-7, 1e-6, 1e-5],
                "M_values": [1, 10, 100],
                "base": {"L": 128, "e_sys": 0.03, "d_c": 1e-9, "detector": "pnr"},
            }
        },
    )

    @model_validator(mode="after")
    def _check_grid(self) -> "CurveSpec":
        grid = self.eta_grid
        if any(not (0 < e <= 1) or math.isnan(e) for e in grid):
            raise ValueError("eta_grid entries must lie in (0, 1]")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("eta_grid must be strictly increasing")
        if any(m < 1 for m in self.M_values):
            raise ValueError("M_values must be positive")
        return self
