"""Built-in oracle checks behind the ``validate`` subcommand.

A compact version of the full test suite: each check compares an
analytical quantity against an independent reference (identity, exact
value, or Monte Carlo estimate) and reports pass/fail with a one-line
detail. Meant to be cheap enough to run routinely.
"""

from __future__ import annotations

import math

import numpy as np

from .analytic import (
    SystemConfig,
    bound_report,
    cond_rate_outage,
    selection_prob,
)
from .mc import McConfig, estimate_outage, estimate_outage_sweep, two_slot_pair_oracle
from .numerics import integrate, marcum_q1, ncx2_pdf, ncx2_sf

Result = tuple[str, bool, str]


def _check_marcum_identity() -> Result:
    worst = 0.0
    for a in (0.0, 0.5, 1.0, 2.0, 5.0):
        for b in (0.0, 0.5, 1.0, 2.0, 5.0):
            worst = max(worst, abs(marcum_q1(a, b) - ncx2_sf(b * b, a * a)))
    return ("marcum-chi2 identity", worst < 1e-10, f"max |diff| = {worst:.2e}")


def _check_pdf_normalization() -> Result:
    worst = 0.0
    for lam in (0.0, 1.0, 10.0, 100.0):
        val, _ = integrate(lambda z: ncx2_pdf(z, lam), 0.0, math.inf)
        worst = max(worst, abs(val - 1.0))
    return ("chi2 pdf normalization", worst < 1e-9, f"max |integral-1| = {worst:.2e}")


def _check_quadrature() -> Result:
    v1, _ = integrate(lambda x: x * x, 0.0, 1.0)
    v2, _ = integrate(lambda x: math.exp(-x), 0.0, math.inf)
    err = max(abs(v1 - 1.0 / 3.0), abs(v2 - 1.0))
    return ("quadrature sanity", err < 1e-10, f"max error = {err:.2e}")


def _check_selection(scenario, trials, seed) -> Result:
    system = scenario.system()
    p = np.array([selection_prob(k, system.profiles) for k in range(system.n_users)])
    sum_err = abs(math.fsum(p.tolist()) - 1.0)
    rep = estimate_outage(system, McConfig(trials=trials, seed=seed))
    se = np.sqrt(p * (1.0 - p) / (trials * system.n_slots))
    z = np.max(np.abs(rep.p_hat - p) / np.maximum(se, 1e-12))
    ok = sum_err < 1e-9 and z < 4.0
    return ("selection law", ok, f"|sum p - 1| = {sum_err:.2e}, max |z| = {z:.2f}")


def _check_one_slot(scenario, trials, seed) -> Result:
    system = scenario.system()
    k = system.n_users - 1
    theta = system.rate * system.n_slots
    analytic = cond_rate_outage(k, system.profiles, system.rho, theta)
    rep = estimate_outage(system, McConfig(trials=trials, seed=seed + 1))
    cond = rep.conditional(k, 1)
    if cond.count == 0 or cond.low_support:
        return ("one-slot conditional", False, "insufficient conditioning events")
    diff = abs(cond.value - analytic)
    ok = diff <= 3.0 * max(cond.std_error, 1e-12) + 1e-9
    return (
        "one-slot conditional",
        ok,
        f"mc {cond.value:.5f} vs analytic {analytic:.5f} "
        f"(3se = {3 * cond.std_error:.5f}, n = {cond.count})",
    )


def _check_two_slot(scenario, trials, seed) -> Result:
    from .analytic import cond_outage_two_slots, selected_power_cdf

    system = scenario.system()
    k = system.n_users - 1
    # place the half-exponent threshold mid-distribution so the two-slot
    # product event is neither vanishing nor saturated
    mixture = selected_power_cdf(k, system.profiles)
    lo, hi = 1e-9, 1e4
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mixture.cdf(mid) < 0.45:
            lo = mid
        else:
            hi = mid
    rate = 2.0 * math.log2(1.0 + system.rho * 0.5 * (lo + hi)) / system.n_slots
    analytic = cond_outage_two_slots(
        k, system.profiles, system.rho, rate, system.n_slots
    )
    rng = np.random.default_rng(seed + 2)
    pairs = max(100_000, trials)
    est, se = two_slot_pair_oracle(
        system.profiles, k, system.rho, rate, system.n_slots, pairs, rng
    )
    diff = abs(est - analytic)
    ok = diff <= 3.0 * max(se, 1e-12) + 1e-9
    return (
        "two-slot term",
        ok,
        f"pair oracle {est:.5f} vs analytic {analytic:.5f} (3se = {3 * se:.5f})",
    )


def _check_bounds(scenario, trials, seed) -> Result:
    system = scenario.system()
    rates = [0.25, 0.5, 1.0]
    reports = estimate_outage_sweep(system, McConfig(trials=trials, seed=seed + 3), rates)
    worst = -math.inf
    ordering_ok = True
    for rate, rep in zip(rates, reports):
        cfg = SystemConfig(
            profiles=system.profiles, rho=system.rho, rate=rate,
            n_slots=system.n_slots,
        )
        for k in range(system.n_users):
            br = bound_report(cfg, k)
            ordering_ok &= br.tight_bound >= br.loose_bound - 1e-12
            slack = br.tight_bound - (rep.outage[k] + 3.0 * rep.std_error[k])
            worst = max(worst, slack)
    ok = ordering_ok and worst <= 0.0
    return (
        "bound validity",
        ok,
        f"max (tight - mc - 3se) = {worst:.2e}, tight >= loose: {ordering_ok}",
    )


def run_checks(scenario, trials: int = 200_000, seed: int = 12345) -> list[Result]:
    """Run every check; returns (name, passed, detail) triples."""
    trials = min(trials, 500_000)  # keep the validate command snappy
    return [
        _check_marcum_identity(),
        _check_pdf_normalization(),
        _check_quadrature(),
        _check_selection(scenario, trials, seed),
        _check_one_slot(scenario, trials, seed),
        _check_two_slot(scenario, trials, seed),
        _check_bounds(scenario, trials, seed),
    ]
