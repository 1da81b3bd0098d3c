from __future__ import annotations

from pathlib import Path
from typing import Any

from pydantic import BaseModel, ConfigDict, Field, field_validator

from rrdps.enums import Command

from .params import ProtocolParams


class RunConfig(BaseModel):
    """One CLI invocation after merging the config file with the flags."""

    command: Command
    # ProtocolParams overrides; unset fields keep the model defaults
    params: dict[str, Any] = Field(default_factory=dict)
    output_path: Path | None = None
    seed: int = Field(default=0, ge=0, le=2**64 - 1)
    trials: int = Field(default=100_000, ge=1)
    model_config = ConfigDict(frozen=True)

    @field_validator("params")
    @classmethod
    def _known_params(cls, value: dict[str, Any]) -> dict[str, Any]:
        unknown = set(value) - set(ProtocolParams.model_fields)
        if unknown:
            raise ValueError(f"unknown protocol parameters: {sorted(unknown)}")
        return value

    def protocol(self) -> ProtocolParams:
        return ProtocolParams(**self.params)
