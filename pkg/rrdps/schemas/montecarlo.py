from __future__ import annotations

import math
from collections import Counter

from pydantic import BaseModel, ConfigDict, Field, model_validator

from rrdps.enums import McMode

from .params import ProtocolParams


def binomial_rate(hits: int, n: int) -> tuple[float, float]:
    """Empirical rate and its binomial standard error sqrt(p(1-p)/n)."""
    if n <= 0:
        return math.nan, math.nan
    p = hits / n
    return p, math.sqrt(p * (1.0 - p) / n)


class McConfig(BaseModel):
    params: ProtocolParams
    trials: int = Field(ge=1)
    seed: int = Field(default=0, ge=0, le=2**64 - 1)
    mode: McMode = McMode.STANDARD
    model_config = ConfigDict(frozen=True)


class McStats(BaseModel):
    sequences: int = 0
    detected: int = 0
    bit_errors: int = 0
    double_counts: int = 0
    multi_photon_blocks: int = 0
    multi_photon_first_clicked: int = 0
    double_counts_multi: int = 0
    clicks_histogram: dict[int, int] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _check_counts(self) -> "McStats":
        if not (self.bit_errors <= self.detected <= self.sequences):
            raise ValueError("counts must satisfy bit_errors <= detected <= sequences")
        if self.double_counts > self.sequences:
            raise ValueError("double_counts exceeds sequences")
        return self

    def merge(self, other: "McStats") -> "McStats":
        hist = Counter(self.clicks_histogram)
        hist.update(other.clicks_histogram)
        return McStats(
            sequences=self.sequences + other.sequences,
            detected=self.detected + other.detected,
            bit_errors=self.bit_errors + other.bit_errors,
            double_counts=self.double_counts + other.double_counts,
            multi_photon_blocks=self.multi_photon_blocks + other.multi_photon_blocks,
            multi_photon_first_clicked=self.multi_photon_first_clicked
            + other.multi_photon_first_clicked,
            double_counts_multi=self.double_counts_multi + other.double_counts_multi,
            clicks_histogram=dict(sorted(hist.items())),
        )

    def detection_rate(self) -> tuple[float, float]:
        return binomial_rate(self.detected, self.sequences)

    def error_rate(self) -> tuple[float, float]:
        return binomial_rate(self.bit_errors, self.detected)

    def double_count_rate(self) -> tuple[float, float]:
        return binomial_rate(self.double_counts, self.sequences)


class SequenceTrace(BaseModel):
    """Event log of one simulated sequence."""

    block_events: list[int]
    first_clicked: int | None
    accepted_block: int | None
    encoded_bit: int | None = None
    recorded_bit: int | None = None
    block_photons: list[int] = Field(default_factory=list)


class ComparisonRow(BaseModel):
    quantity: str
    analytic: float
    empirical: float
    stderr: float
    z: float
    flagged: bool = False


class ValidationReport(BaseModel):
    config: McConfig
    stats: McStats
    rows: list[ComparisonRow]

    @property
    def flagged(self) -> list[ComparisonRow]:
        return [r for r in self.rows if r.flagged]
