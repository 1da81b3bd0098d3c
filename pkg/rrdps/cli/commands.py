"""Command handlers: build the models, call the core, return CSV rows."""

from __future__ import annotations

import logging
from typing import Any, Callable

from rrdps.core.attacksim import run_attack
from rrdps.core.keyrate import key_rate
from rrdps.core.montecarlo import compare_to_analytic
from rrdps.core.optimizer import (
    default_M_candidates,
    eta_grid,
    sweep_curves,
    sweep_optimal_M,
)
from rrdps.enums import Command, McMode
from rrdps.errors import UsageError
from rrdps.schemas import (
    AttackScenario,
    CurveSpec,
    KeyRateResult,
    McConfig,
    Optimum,
    RunConfig,
    SearchOptions,
)

logger = logging.getLogger(__name__)

RATE_HEADER = (
    "eta",
    "M",
    "L",
    "detector",
    "c_d",
    "mu_opt",
    "nu_th_opt",
    "Q",
    "e_bit",
    "e_ph",
    "e_src_slow",
    "e_mB",
    "G_raw",
    "G",
)
ATTACK_HEADER = (
    "p_z",
    "M",
    "n_sequences",
    "n_measured",
    "n_clean",
    "trials",
    "analytic_success",
    "empirical_success",
    "stderr",
    "sifted_naive_mean",
    "sifted_modified_mean",
    "printed_success_inconsistent",
)
VALIDATE_HEADER = ("quantity", "analytic", "empirical", "stderr", "z")

CURVE_M_VALUES = [10**k for k in range(7)]
CURVE_ETA_MIN = 1e-7
CURVE_ETA_MAX = 1.0
CURVE_POINTS_PER_DECADE = 10

Rows = list[dict[str, Any]]


def _rate_row(
    eta: float,
    M: int,
    mu: float,
    nu_th: int,
    base: dict[str, Any],
    result: KeyRateResult,
) -> dict[str, Any]:
    return {
        "eta": eta,
        "M": M,
        "L": base["L"],
        "detector": base["detector"],
        "c_d": base["c_d"],
        "mu_opt": mu,
        "nu_th_opt": nu_th,
        "Q": result.Q,
        "e_bit": result.e_bit,
        "e_ph": result.e_ph,
        "e_src_slow": result.e_src_slow,
        "e_mB": result.e_mB,
        "G_raw": result.G_raw,
        "G": result.G,
    }


def _optimum_row(opt: Optimum, base: dict[str, Any]) -> dict[str, Any]:
    return _rate_row(opt.eta, opt.M_opt, opt.mu_opt, opt.nu_th_opt, base, opt.result)


def _search_options(options: dict[str, Any]) -> SearchOptions:
    keys = ("mu_min", "mu_max", "full_scan")
    return SearchOptions(**{k: options[k] for k in keys if k in options})


def _eta_values(options: dict[str, Any]) -> list[float]:
    if "eta" in options:
        return [float(options["eta"])]
    return eta_grid(
        options.get("eta_min", CURVE_ETA_MIN),
        options.get("eta_max", CURVE_ETA_MAX),
        options.get("points_per_decade", CURVE_POINTS_PER_DECADE),
    )


def run_keyrate(run: RunConfig, options: dict[str, Any]) -> Rows:
    p = run.protocol()
    result = key_rate(p)
    logger.info("G=%.6g (%s)", result.G, result.status.value)
    return [_rate_row(p.eta, p.M, p.mu, p.nu_th, p.model_dump(), result)]


def run_curve(run: RunConfig, options: dict[str, Any]) -> Rows:
    spec = CurveSpec(
        eta_grid=_eta_values(options),
        M_values=options.get("M_list", CURVE_M_VALUES),
        base=run.protocol(),
    )
    optima = sweep_curves(spec, _search_options(options))
    base = spec.base.model_dump()
    return [_optimum_row(opt, base) for opt in optima]


def run_optimize(run: RunConfig, options: dict[str, Any]) -> Rows:
    base = run.protocol()
    candidates = options.get("M_list") or default_M_candidates()
    search = _search_options(options)
    optima = sweep_optimal_M(base, _eta_values(options), candidates, search)
    dump = base.model_dump()
    return [_optimum_row(opt, dump) for opt in optima]


def run_attack_command(run: RunConfig, options: dict[str, Any]) -> Rows:
    fields = {
        "p_z": "p_Z",
        "M": "M",
        "n_sequences": "n_sequences",
        "n_measured": "n_measured",
        "n_clean": "n_clean",
        "eta_nominal": "eta_nominal",
    }
    scenario = AttackScenario(**{v: options[k] for k, v in fields.items() if k in options})
    report = run_attack(scenario, run.trials, run.seed)
    if report.exceeds_security_parameter:
        logger.warning(
            "attack success %.3g exceeds security parameter %.0e",
            report.analytic_success,
            report.security_parameter,
        )
    if report.printed_success_inconsistent:
        logger.warning(
            "quoted success %.1e is inconsistent with its expression, which gives %.4g",
            report.printed_success,
            report.analytic_success,
        )
    return [
        {
            "p_z": scenario.p_Z,
            "M": scenario.M,
            "n_sequences": scenario.n_sequences,
            "n_measured": scenario.n_measured,
            "n_clean": scenario.n_clean,
            "trials": report.trials,
            "analytic_success": report.analytic_success,
            "empirical_success": report.empirical_success,
            "stderr": report.stderr,
            "sifted_naive_mean": report.sifted_naive_mean,
            "sifted_modified_mean": report.sifted_modified_mean,
            "printed_success_inconsistent": report.printed_success_inconsistent,
        }
    ]


def run_mc_validate(run: RunConfig, options: dict[str, Any]) -> Rows:
    cfg = McConfig(
        params=run.protocol(),
        trials=run.trials,
        seed=run.seed,
        mode=options.get("mode", McMode.STANDARD),
    )
    report = compare_to_analytic(cfg)
    return [
        {
            "quantity": row.quantity,
            "analytic": row.analytic,
            "empirical": row.empirical,
            "stderr": row.stderr,
            "z": row.z,
        }
        for row in report.rows
    ]


Handler = Callable[[RunConfig, dict[str, Any]], Rows]

HANDLERS: dict[Command, tuple[tuple[str, ...], Handler]] = {
    Command.keyrate: (RATE_HEADER, run_keyrate),
    Command.curve: (RATE_HEADER, run_curve),
    Command.optimize: (RATE_HEADER, run_optimize),
    Command.attack: (ATTACK_HEADER, run_attack_command),
    Command.mc_validate: (VALIDATE_HEADER, run_mc_validate),
}


def dispatch(run: RunConfig, options: dict[str, Any]) -> tuple[tuple[str, ...], Rows]:
    try:
        header, handler = HANDLERS[run.command]
    except KeyError:
        raise UsageError(f"unknown command {run.command!r}") from None
    return header, handler(run, options)
