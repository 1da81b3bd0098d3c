from __future__ import annotations


class RRDPSError(Exception):
    """Base class for errors raised by the rrdps package."""


class UndefinedRateError(RRDPSError, ValueError):
    """A ratio over the detection rate was requested while Q = 0."""


class NoValidBoundError(RRDPSError):
    """The phase-error bound is vacuous (tagged fraction above the usable rate)."""

    def __init__(self, ratio: float) -> None:
        super().__init__(f"tagged fraction {ratio!r} exceeds 1; no phase-error bound")
        self.ratio = ratio


class UsageError(RRDPSError):
    """Bad command line or config file."""
