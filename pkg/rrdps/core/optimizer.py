"""Search for the (mu, nu_th, M) maximising the clamped key rate.

For every nu_th the mean photon number is scanned on a logarithmic grid and
the best grid cell is refined with a bounded scalar search in log10(mu). The
nu_th scan stops once the rate has dropped for ``patience`` consecutive
thresholds unless ``full_scan`` is set. Everything is deterministic.
"""

from __future__ import annotations

import logging
import math
from functools import partial
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from rrdps.schemas.params import ProtocolParams
from rrdps.schemas.results import CurveSpec, Optimum, SearchOptions
from rrdps.workers import ordered_map

from .keyrate import evaluate, key_rate

logger = logging.getLogger(__name__)

DEFAULT_OPTIONS = SearchOptions()


def mu_grid(options: SearchOptions = DEFAULT_OPTIONS) -> np.ndarray:
    lo, hi = math.log10(options.mu_min), math.log10(options.mu_max)
    n = int(round((hi - lo) * options.points_per_decade)) + 1
    return np.logspace(lo, hi, max(n, 2))


def eta_grid(eta_min: float, eta_max: float, points_per_decade: int = 10) -> list[float]:
    """Log-spaced transmissions from eta_min to eta_max, endpoints included."""
    if not 0.0 < eta_min <= eta_max <= 1.0:
        raise ValueError("need 0 < eta_min <= eta_max <= 1")
    if eta_min == eta_max:
        return [float(eta_min)]
    lo, hi = math.log10(eta_min), math.log10(eta_max)
    n = int(round((hi - lo) * points_per_decade)) + 1
    grid = np.logspace(lo, hi, max(n, 2))
    grid[0], grid[-1] = eta_min, eta_max
    return [float(e) for e in grid]


def default_M_candidates() -> list[int]:
    """{1, 2, 5} x 10^k up to 10^6."""
    return [m * 10**k for k in range(7) for m in (1, 2, 5) if m * 10**k <= 10**6]


def _rate(base: ProtocolParams, eta: float, M: int, nu_th: int, mu: float) -> float:
    return evaluate(
        base.L, M, mu, nu_th, eta, base.e_sys, base.d_c, base.c_d, base.detector
    )[0]


def _best_mu(
    base: ProtocolParams,
    eta: float,
    M: int,
    nu_th: int,
    grid: np.ndarray,
    refine: bool,
) -> tuple[float, float]:
    """Best (G, mu) for a fixed threshold; ties keep the smaller mu."""
    best_g, best_i = -1.0, 0
    for i, mu in enumerate(grid):
        g = _rate(base, eta, M, nu_th, float(mu))
        if g > best_g:
            best_g, best_i = g, i
    best_mu = float(grid[best_i])
    if not refine or best_g <= 0.0:
        return best_g, best_mu

    lo = math.log10(grid[max(best_i - 1, 0)])
    hi = math.log10(grid[min(best_i + 1, len(grid) - 1)])
    res = minimize_scalar(
        lambda t: -_rate(base, eta, M, nu_th, 10.0**t),
        bounds=(lo, hi),
        method="bounded",
        options={"xatol": 1e-7},
    )
    mu_ref = float(10.0 ** res.x)
    g_ref = _rate(base, eta, M, nu_th, mu_ref)
    if g_ref > best_g:
        return g_ref, mu_ref
    return best_g, best_mu


def _build(base: ProtocolParams, eta: float, M: int, mu: float, nu_th: int) -> Optimum:
    point = base.with_point(eta=eta, M=M, mu=mu, nu_th=nu_th)
    return Optimum(eta=eta, mu_opt=mu, nu_th_opt=nu_th, M_opt=M, result=key_rate(point))


def optimize_point(
    base: ProtocolParams,
    eta: float,
    M: int,
    options: SearchOptions = DEFAULT_OPTIONS,
) -> Optimum:
    """Maximise the clamped key rate over (mu, nu_th) at fixed eta and M."""
    if not 0.0 < eta <= 1.0:
        raise ValueError(f"eta must lie in (0, 1], got {eta!r}")
    grid = mu_grid(options)
    best_g, best_mu, best_nu = 0.0, float(grid[0]), 0
    previous, drops = None, 0
    for nu_th in range(base.L):
        g, mu = _best_mu(base, eta, M, nu_th, grid, options.refine)
        # strict improvement only: ties keep the smaller nu_th
        if g > best_g:
            best_g, best_mu, best_nu = g, mu, nu_th
        if previous is not None and g < previous:
            drops += 1
        else:
            drops = 0
        previous = g
        if not options.full_scan and drops >= options.patience:
            break
    logger.debug(
        "eta=%.3g M=%d -> G=%.6g at mu=%.4g nu_th=%d", eta, M, best_g, best_mu, best_nu
    )
    return _build(base, eta, M, best_mu, best_nu)


def exhaustive_search(
    base: ProtocolParams,
    eta: float,
    M: int,
    mu_values: Iterable[float],
    nu_th_values: Iterable[int] | None = None,
) -> Optimum:
    """Brute-force maximiser over an explicit (mu, nu_th) grid."""
    nus = list(range(base.L)) if nu_th_values is None else list(nu_th_values)
    mus = [float(m) for m in mu_values]
    best_g, best_mu, best_nu = 0.0, mus[0], nus[0]
    for nu_th in nus:
        for mu in mus:
            g = _rate(base, eta, M, nu_th, mu)
            if g > best_g:
                best_g, best_mu, best_nu = g, mu, nu_th
    return _build(base, eta, M, best_mu, best_nu)


def optimize_with_M(
    base: ProtocolParams,
    eta: float,
    M_candidates: Sequence[int] | None = None,
    options: SearchOptions = DEFAULT_OPTIONS,
) -> Optimum:
    """Best optimum across sequence lengths; ties keep the earlier candidate."""
    candidates = default_M_candidates() if M_candidates is None else list(M_candidates)
    if not candidates:
        raise ValueError("M_candidates must not be empty")
    best: Optimum | None = None
    for M in candidates:
        opt = optimize_point(base, eta, M, options)
        if best is None or opt.result.G > best.result.G:
            best = opt
    assert best is not None
    return best


def heuristic_M(L: int, c_d: int) -> int:
    """Sequence length whose duration matches the initialization gap (M*L = c_d)."""
    if L < 1:
        raise ValueError(f"L must be positive, got {L}")
    # round() is round-half-to-even
    return max(1, round(c_d / L))


def _point_task(
    base: ProtocolParams, options: SearchOptions, task: tuple[int, float]
) -> Optimum:
    M, eta = task
    return optimize_point(base, eta, M, options)


def _optimal_M_task(
    base: ProtocolParams,
    candidates: tuple[int, ...],
    options: SearchOptions,
    eta: float,
) -> Optimum:
    return optimize_with_M(base, eta, candidates, options)


def sweep_curves(
    spec: CurveSpec,
    options: SearchOptions = DEFAULT_OPTIONS,
    *,
    workers: int | None = None,
) -> list[Optimum]:
    """One optimum per (M, eta), rows ordered by M then eta."""
    tasks = [(M, eta) for M in spec.M_values for eta in spec.eta_grid]
    logger.info("sweeping %d points (%d M values)", len(tasks), len(spec.M_values))
    return ordered_map(partial(_point_task, spec.base, options), tasks, workers=workers)


def sweep_optimal_M(
    base: ProtocolParams,
    etas: Sequence[float],
    M_candidates: Sequence[int] | None = None,
    options: SearchOptions = DEFAULT_OPTIONS,
    *,
    workers: int | None = None,
) -> list[Optimum]:
    """Optimum over M at every eta, in eta order."""
    candidates = tuple(default_M_candidates() if M_candidates is None else M_candidates)
    fn = partial(_optimal_M_task, base, candidates, options)
    return ordered_map(fn, list(etas), workers=workers)
