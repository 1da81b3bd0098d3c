from .attack import AttackOutcome, AttackReport, AttackScenario, AttackTranscript
from .montecarlo import ComparisonRow, McConfig, McStats, SequenceTrace, ValidationReport
from .params import ProtocolParams
from .results import CurveSpec, KeyRateResult, Optimum, SearchOptions
from .run import RunConfig

__all__ = [
    "AttackOutcome",
    "AttackReport",
    "AttackScenario",
    "AttackTranscript",
    "ComparisonRow",
    "CurveSpec",
    "KeyRateResult",
    "McConfig",
    "McStats",
    "Optimum",
    "ProtocolParams",
    "RunConfig",
    "SearchOptions",
    "SequenceTrace",
    "ValidationReport",
]
