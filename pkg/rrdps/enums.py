from __future__ import annotations

from enum import Enum


class Detector(str, Enum):
    PNR = "pnr"
    THRESHOLD = "threshold"


class McMode(str, Enum):
    STANDARD = "standard"
    BEAM_DUMP = "beam-dump"


class Command(str, Enum):
    keyrate = "keyrate"
    curve = "curve"
    optimize = "optimize"
    attack = "attack"
    mc_validate = "mc-validate"


class RateStatus(str, Enum):
    ok = "ok"
    negative = "negative"
    no_valid_bound = "no_valid_bound"
    undefined_rate = "undefined_rate"
