from __future__ import annotations

from pydantic import BaseModel, ConfigDict, Field, model_validator

from rrdps.enums import Detector


class ProtocolParams(BaseModel):
    """Physical and protocol parameters of one RRDPS operating point.

    Defaults are the channel model used for the published curves: block size
    128, system error 3 %, dark count 1e-9 per slot, no initialization gap.
    """

    L: int = Field(default=128, ge=2, description="pulses per block")
    M: int = Field(default=1, ge=1, description="blocks per sequence")
    mu: float = Field(default=0.0, ge=0, allow_inf_nan=False)
    nu_th: int = Field(default=0, ge=0)
    eta: float = Field(default=1.0, ge=0, le=1)
    e_sys: float = Field(default=0.03, ge=0, le=1)
    d_c: float = Field(default=1e-9, ge=0, le=1)
    c_d: int = Field(default=0, ge=0, description="pulses lost to initialization")
    detector: Detector = Detector.PNR
    # Pulse interval in seconds; metadata only
    T: float = Field(default=1e-9, gt=0)
    model_config = ConfigDict(
        frozen=True,
        json_schema_extra={
            "example": {
                "L": 128,
                "M": 1000,
                "mu": 0.01,
                "nu_th": 4,
                "eta": 1e-3,
                "e_sys": 0.03,
                "d_c": 1e-9,
                "c_d": 0,
                "detector": "pnr",
            }
        },
    )

    @model_validator(mode="after")
    def _check_threshold(self) -> "ProtocolParams":
        if self.nu_th > self.L - 1:
            raise ValueError(f"nu_th={self.nu_th} exceeds L-1={self.L - 1}")
        return self

    def with_point(self, **changes) -> "ProtocolParams":
        """Validated copy with some fields replaced."""
        return type(self).model_validate({**self.model_dump(), **changes})
