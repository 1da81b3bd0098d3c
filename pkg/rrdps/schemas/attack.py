from __future__ import annotations

import math

from pydantic import BaseModel, ConfigDict, Field, model_validator

# Typical security parameter quoted for comparison in attack reports
SECURITY_PARAMETER = 1e-10
# Commonly quoted value for 0.99**99 * 0.01; the expression itself is 3.697e-3
PRINTED_SUCCESS = 4e-4
# (p_Z, n_measured, n_clean) the quoted value refers to
PRINTED_SCENARIO = (0.99, 99, 1)


class AttackScenario(BaseModel):
    """Intercept-resend attack on BB84 with one basis choice per sequence.

    Eve keeps ``n_measured + n_clean`` whole sequences, measures the first
    group in Z and resends, forwards the second group untouched and blocks the
    rest. The forwarded pulse count must equal what an honest channel with
    ``eta_nominal`` would deliver.
    """

    p_Z: float = Field(default=0.99, ge=0, le=1)
    M: int = Field(default=100, ge=1)
    n_sequences: int = Field(default=10_000, ge=1)
    n_measured: int = Field(default=99, ge=0)
    n_clean: int = Field(default=1, ge=0)
    eta_nominal: float = Field(default=1e-2, ge=0, le=1)
    model_config = ConfigDict(
        frozen=True,
        json_schema_extra={
            "example": {
                "p_Z": 0.99,
                "M": 100,
                "n_sequences": 10000,
                "n_measured": 99,
                "n_clean": 1,
                "eta_nominal": 0.01,
            }
        },
    )

    @property
    def p_X(self) -> float:
        return 1.0 - self.p_Z

    @property
    def n_forwarded(self) -> int:
        return self.n_measured + self.n_clean

    @property
    def printed_success(self) -> float | None:
        """Quoted success probability for this scenario, if one is on record."""
        if (self.p_Z, self.n_measured, self.n_clean) == PRINTED_SCENARIO:
            return PRINTED_SUCCESS
        return None

    @model_validator(mode="after")
    def _check_budget(self) -> "AttackScenario":
        if self.n_forwarded > self.n_sequences:
            raise ValueError("n_measured + n_clean exceeds n_sequences")
        expected = round(self.n_sequences * self.M * self.eta_nominal)
        if self.n_forwarded * self.M != expected:
            raise ValueError(
                f"forwarded pulses {self.n_forwarded * self.M} do not match the "
                f"honest detection count {expected}"
            )
        return self


class AttackOutcome(BaseModel):
    sifted_bits_naive: int = Field(ge=0)
    sifted_bits_modified: int = Field(ge=0)
    undetected_success: bool = False
    bit_errors: int = Field(default=0, ge=0)
    per_sequence_clicks: dict[int, int] = Field(default_factory=dict)


class AttackReport(BaseModel):
    """Aggregate of many attack (or honest) trials."""

    trials: int
    analytic_success: float | None = None
    empirical_success: float = 0.0
    stderr: float = 0.0
    success_count: int = 0
    sifted_naive_mean: float
    sifted_modified_mean: float
    sifted_expected: float | None = None
    # mean sifted bits when every detection closes its own sequence
    sifted_variable_mean: float | None = None
    errors_on_success: int = 0
    clicks_histogram: dict[int, int] = Field(default_factory=dict)
    security_parameter: float = SECURITY_PARAMETER
    printed_success: float | None = None

    @property
    def exceeds_security_parameter(self) -> bool:
        return (self.analytic_success or 0.0) > self.security_parameter

    @property
    def printed_success_inconsistent(self) -> bool:
        """True when the quoted success value disagrees with the evaluated expression."""
        if self.printed_success is None or self.analytic_success is None:
            return False
        return not math.isclose(self.analytic_success, self.printed_success, rel_tol=0.1)


class AttackTranscript(BaseModel):
    """One explicit attack trial at bit level."""

    alice_bits: list[list[int]]
    alice_bases: list[list[str]]
    eve_record: list[list[int] | None]
    bob_bases: list[str]
    bob_bits: list[list[int]]
    measured: list[bool]
    undetected_success: bool
    outcome: AttackOutcome
