"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines as the
criteria execute. The reference scenario ("preset") is 12 users with
sigma2_j = 0.9 + 0.1 j and xi2_j = 0.025 (j - 1), a 5-slot delay window,
and 10 dB SNR; heavyweight Monte Carlo passes are shared across criteria
through module-scoped caches.
"""

import math
import os
import time

import numpy as np
import pytest

from outage_bench.analytic import (
    SystemConfig,
    bound_report,
    cond_outage_two_slots,
    cond_rate_outage,
    selected_power_cdf,
    selection_prob,
    slot_count_pmf,
)
from outage_bench.channel import UserProfile
from outage_bench.cli import main as cli_main
from outage_bench.mc import (
    McConfig,
    estimate_outage,
    estimate_outage_sweep,
    two_slot_pair_oracle,
)
from outage_bench.numerics import integrate, marcum_q1, ncx2_pdf, ncx2_sf

N_SLOTS = 5
RHO = 10.0  # 10 dB
RATE_GRID = [round(0.1 * i, 1) for i in range(1, 21)]
PRESET_TRIALS = 1_000_000
PRESET_SEED = 20260810

_cache: dict = {}
ACCEPTANCE_LINES: list[str] = []  # echoed in the terminal summary (conftest)


def _report(criterion: int, passed: bool, detail: str) -> None:
    marker = "PASS" if passed else "FAIL"
    line = f"ACCEPTANCE {criterion:2d} {marker}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print("\n" + line)


def preset_profiles():
    return tuple(UserProfile(0.9 + 0.1 * j, 0.025 * (j - 1)) for j in range(1, 13))


def preset_sweep():
    """Common-random-number MC sweep over the full rate grid (cached)."""
    if "sweep" not in _cache:
        t0 = time.monotonic()
        system = SystemConfig(
            profiles=preset_profiles(), rho=RHO, rate=RATE_GRID[0], n_slots=N_SLOTS
        )
        _cache["sweep"] = estimate_outage_sweep(
            system, McConfig(trials=PRESET_TRIALS, seed=PRESET_SEED), RATE_GRID
        )
        _cache["sweep_seconds"] = time.monotonic() - t0
    return _cache["sweep"]


def preset_bounds():
    """BoundReport per (rate, user) on the preset (cached)."""
    if "bounds" not in _cache:
        profiles = preset_profiles()
        reports = {}
        for rate in RATE_GRID:
            cfg = SystemConfig(profiles=profiles, rho=RHO, rate=rate, n_slots=N_SLOTS)
            for k in range(12):
                reports[(rate, k)] = bound_report(cfg, k)
        _cache["bounds"] = reports
    return _cache["bounds"]


def random_configs():
    """Five frozen randomized configurations, K in {2, 3, 5, 8, 12}."""
    if "configs" not in _cache:
        rng = np.random.default_rng(424242)
        configs = []
        for n_users in (2, 3, 5, 8, 12):
            sigma2 = rng.uniform(0.5, 3.0, size=n_users)
            xi2 = rng.uniform(0.0, 1.0, size=n_users) * sigma2
            profiles = tuple(
                UserProfile(float(s), float(x)) for s, x in zip(sigma2, xi2)
            )
            configs.append(profiles)
        _cache["configs"] = configs
    return _cache["configs"]


def _rate_for_target_q1(profiles, k, target, i_slots=1):
    """Required rate whose per-slot conditional outage is near target."""
    mixture = selected_power_cdf(k, profiles)
    lo, hi = 1e-9, 1e4
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mixture.cdf(mid) < target:
            lo = mid
        else:
            hi = mid
    theta = math.log2(1.0 + RHO * 0.5 * (lo + hi))
    return theta / N_SLOTS


def test_criterion_01_special_function_identities():
    t0 = time.monotonic()
    grid = [0.0, 0.5, 1.0, 2.0, 5.0]
    worst_identity = max(
        abs(marcum_q1(a, b) - ncx2_sf(b * b, a * a)) for a in grid for b in grid
    )
    worst_norm = 0.0
    for lam in (0.0, 1.0, 10.0, 100.0):
        value, _ = integrate(lambda z: ncx2_pdf(z, lam), 0.0, math.inf)
        worst_norm = max(worst_norm, abs(value - 1.0))
    elapsed = time.monotonic() - t0
    ok = worst_identity < 1e-10 and worst_norm < 1e-9 and elapsed < 5.0
    _report(
        1, ok,
        f"identity max |diff| = {worst_identity:.2e} (< 1e-10), "
        f"normalization max |err| = {worst_norm:.2e} (< 1e-9), {elapsed:.1f}s",
    )
    assert worst_identity < 1e-10
    assert worst_norm < 1e-9
    assert elapsed < 5.0


def test_criterion_02_one_slot_conditional_exactness():
    t0 = time.monotonic()
    failures = []
    details = []
    for profiles in random_configs():
        # the user most likely to win exactly one slot gives the densest
        # conditioning sample
        pr_ones = [
            float(slot_count_pmf(selection_prob(j, profiles), N_SLOTS)[1])
            for j in range(len(profiles))
        ]
        k = int(np.argmax(pr_ones))
        p = selection_prob(k, profiles)
        rate = _rate_for_target_q1(profiles, k, 0.3)
        analytic = cond_rate_outage(k, profiles, RHO, rate * N_SLOTS)
        pr_one = float(slot_count_pmf(p, N_SLOTS)[1])
        trials = max(100_000, int(1.3e4 / pr_one) + 1)
        system = SystemConfig(profiles=profiles, rho=RHO, rate=rate, n_slots=N_SLOTS)
        rep = estimate_outage(system, McConfig(trials=trials, seed=97 + len(details)))
        cond = rep.conditional(k, 1)
        ok = cond.count >= 10_000 and abs(cond.value - analytic) <= 3 * cond.std_error
        details.append(
            f"K={len(profiles)}: mc {cond.value:.4f} vs analytic {analytic:.4f} "
            f"(3se {3 * cond.std_error:.4f}, n={cond.count})"
        )
        if not ok:
            failures.append(details[-1])
    elapsed = time.monotonic() - t0
    ok = not failures and elapsed < 60.0
    _report(2, ok, "; ".join(details) + f"; {elapsed:.1f}s")
    assert not failures, failures
    assert elapsed < 60.0


def test_criterion_03_equal_variance_consistency():
    t0 = time.monotonic()
    rng = np.random.default_rng(1003)
    worst = 0.0
    for n_users in (2, 4, 8, 13):
        common = float(rng.uniform(0.5, 2.5))
        own = float(rng.uniform(0.5, 3.0))
        own_xi2 = float(rng.uniform(0.0, 0.9)) * own
        profiles = [UserProfile(own, own_xi2)] + [
            UserProfile(common) for _ in range(n_users - 1)
        ]
        for theta in (0.3, 1.0, 3.0, 8.0):
            general = cond_rate_outage(0, profiles, RHO, theta, method="general")
            equal = cond_rate_outage(0, profiles, RHO, theta, method="equal")
            worst = max(worst, abs(general - equal))
    elapsed = time.monotonic() - t0
    ok = worst < 1e-10 and elapsed < 1.0
    _report(3, ok, f"max |equal - general| = {worst:.2e} (< 1e-10), {elapsed:.2f}s")
    assert worst < 1e-10
    assert elapsed < 1.0


def test_criterion_04_two_slot_term_vs_pair_oracle():
    t0 = time.monotonic()
    failures = []
    details = []
    for idx, profiles in enumerate(random_configs()):
        k = int(np.argmax([selection_prob(j, profiles) for j in range(len(profiles))]))
        # put the HALF-exponent threshold at the middle of the selected-power
        # law so the two-slot product event has non-trivial probability
        rate = 2.0 * _rate_for_target_q1(profiles, k, 0.45)
        analytic = cond_outage_two_slots(k, profiles, RHO, rate, N_SLOTS)
        rng = np.random.default_rng(7000 + idx)
        est, se = two_slot_pair_oracle(
            profiles, k, RHO, rate, N_SLOTS, 1_000_000, rng
        )
        ok = abs(est - analytic) <= 3 * se
        details.append(
            f"K={len(profiles)}: oracle {est:.4f} vs analytic {analytic:.4f} "
            f"(3se {3 * se:.4f})"
        )
        if not ok:
            failures.append(details[-1])
    elapsed = time.monotonic() - t0
    ok = not failures and elapsed < 60.0
    _report(4, ok, "; ".join(details) + f"; {elapsed:.1f}s")
    assert not failures, failures
    assert elapsed < 60.0


def test_criterion_05_bound_validity_full_grid():
    t0 = time.monotonic()
    sweep = preset_sweep()
    bounds = preset_bounds()
    violations = []
    min_gap = math.inf
    for rate, rep in zip(RATE_GRID, sweep):
        for k in range(12):
            br = bounds[(rate, k)]
            ceiling = float(rep.outage[k] + 3.0 * rep.std_error[k])
            min_gap = min(min_gap, br.tight_bound - br.loose_bound)
            if br.tight_bound - br.loose_bound < -1e-12:
                violations.append(f"R={rate} u={k + 1}: tight < loose")
            if br.loose_bound > ceiling or br.tight_bound > ceiling:
                violations.append(
                    f"R={rate} u={k + 1}: bound {max(br.loose_bound, br.tight_bound):.5f} "
                    f"> mc + 3se {ceiling:.5f}"
                )
    elapsed = time.monotonic() - t0
    ok = not violations and elapsed < 180.0
    _report(
        5, ok,
        f"{len(RATE_GRID) * 12} (rate, user) points, {PRESET_TRIALS} trials; "
        f"violations: {len(violations)}; min(tight - loose) = {min_gap:.2e}; "
        f"{elapsed:.1f}s",
    )
    assert not violations, violations[:5]
    assert elapsed < 180.0


def test_criterion_06_tightness_at_moderate_rate():
    sweep = preset_sweep()
    bounds = preset_bounds()
    worst = -math.inf
    lines = []
    for rate, rep in zip(RATE_GRID, sweep):
        if rate > 0.5:
            continue
        best = int(np.argmin(rep.outage))
        br = bounds[(rate, best)]
        slack = abs(float(rep.outage[best]) - br.tight_bound)
        allowed = 5.0 * float(rep.std_error[best]) + 0.01
        worst = max(worst, slack - allowed)
        lines.append(f"R={rate}: |mc - tight| = {slack:.4f} (allowed {allowed:.4f})")
    ok = worst <= 0.0
    _report(6, ok, "; ".join(lines))
    assert worst <= 0.0


def test_criterion_07_staircase_plateau():
    profiles = preset_profiles()
    bounds = preset_bounds()
    checked = 0
    worst = 0.0
    for rate in [0.01, 0.02, 0.05] + RATE_GRID:
        for k in range(12):
            q1 = cond_rate_outage(k, profiles, RHO, rate * N_SLOTS)
            if q1 >= 1e-3:
                continue
            if (rate, k) in bounds:
                br = bounds[(rate, k)]
            else:
                cfg = SystemConfig(profiles=profiles, rho=RHO, rate=rate, n_slots=N_SLOTS)
                br = bound_report(cfg, k)
            floor = (1.0 - br.p_select) ** N_SLOTS
            worst = max(worst, abs(br.tight_bound - floor))
            checked += 1
    ok = checked > 0 and worst < N_SLOTS * 1e-3
    _report(
        7, ok,
        f"{checked} plateau points, max |tight - (1-p)^N| = {worst:.2e} "
        f"(< {N_SLOTS * 1e-3:.0e})",
    )
    assert checked > 0
    assert worst < N_SLOTS * 1e-3


def test_criterion_08_selection_law():
    profiles = preset_profiles()
    sweep = preset_sweep()
    rep = sweep[0]  # selection statistics are rate-independent
    p = np.array([selection_prob(k, profiles) for k in range(12)])
    sum_err = abs(math.fsum(p.tolist()) - 1.0)
    se = np.sqrt(p * (1.0 - p) / (PRESET_TRIALS * N_SLOTS))
    z = np.max(np.abs(rep.p_hat - p) / se)
    critical = {1: 6.635, 2: 9.210, 3: 11.345, 4: 13.277, 5: 15.086}
    gof_fail = []
    for k in range(12):
        expected = slot_count_pmf(float(p[k]), N_SLOTS) * PRESET_TRIALS
        observed = rep.slot_hist[k].astype(float)
        keep = expected >= 5.0
        obs = np.concatenate(
            [observed[keep][:-1], [observed[~keep].sum() + observed[keep][-1]]]
        )
        exp = np.concatenate(
            [expected[keep][:-1], [expected[~keep].sum() + expected[keep][-1]]]
        )
        chi2 = float(np.sum((obs - exp) ** 2 / exp))
        if chi2 >= critical[len(obs) - 1]:
            gof_fail.append(f"user {k + 1}: chi2 = {chi2:.1f}")
    ok = sum_err < 1e-9 and z < 3.0 and not gof_fail
    _report(
        8, ok,
        f"|sum p - 1| = {sum_err:.2e} (< 1e-9); max |p_hat - p|/se = {z:.2f} (< 3); "
        f"chi-squared GOF at 1%: {len(gof_fail)} failures",
    )
    assert sum_err < 1e-9
    assert z < 3.0
    assert not gof_fail, gof_fail


def test_criterion_09_error_variance_sweep():
    xi2_grid = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5]
    trials = 200_000
    reports = []
    for xi2 in xi2_grid:
        profiles = tuple(
            UserProfile(1.0, 0.0) if j < 7 else UserProfile(1.0, xi2)
            for j in range(12)
        )
        system = SystemConfig(profiles=profiles, rho=RHO, rate=0.5, n_slots=N_SLOTS)
        reports.append(estimate_outage(system, McConfig(trials=trials, seed=606)))
    violations = []
    for a, b, xi_a, xi_b in zip(reports, reports[1:], xi2_grid, xi2_grid[1:]):
        slack = 3.0 * np.hypot(a.std_error, b.std_error)
        for k in range(7):  # perfect users: outage must not increase
            if b.outage[k] - a.outage[k] > slack[k]:
                violations.append(f"perfect u{k + 1} rose at xi2 {xi_a}->{xi_b}")
        for k in range(7, 12):  # imperfect users: outage must not decrease
            if a.outage[k] - b.outage[k] > slack[k]:
                violations.append(f"imperfect u{k + 1} fell at xi2 {xi_a}->{xi_b}")
    span_perfect = float(reports[-1].outage[:7].mean() - reports[0].outage[:7].mean())
    span_imperfect = float(
        reports[-1].outage[7:].mean() - reports[0].outage[7:].mean()
    )
    ok = not violations
    _report(
        9, ok,
        f"perfect users mean outage moved {span_perfect:+.4f}, imperfect "
        f"{span_imperfect:+.4f} over xi2 0..0.5; significant violations: "
        f"{len(violations)}",
    )
    assert not violations, violations


def test_criterion_10_scheduler_ordering():
    """Random > max for every user and PF <= max for the worst user at
    R = 0.2, each by more than 3 standard errors (else indeterminate).

    Users whose selection probability under the max scheduler is below
    1/K gain slots under uniform random selection, so this ordering is
    expected to reverse for them; the criterion is asserted as stated and
    the per-user outcome is reported.
    """
    trials = 300_000
    system = SystemConfig(profiles=preset_profiles(), rho=RHO, rate=0.2, n_slots=N_SLOTS)
    rep_max = estimate_outage(system, McConfig(trials=trials, seed=71, scheduler="max"))
    rep_rnd = estimate_outage(system, McConfig(trials=trials, seed=72, scheduler="random"))
    rep_pf = estimate_outage(system, McConfig(trials=trials, seed=73, scheduler="pf"))

    confirmed, indeterminate, violated = [], [], []
    for k in range(12):
        diff = float(rep_rnd.outage[k] - rep_max.outage[k])
        slack = 3.0 * float(np.hypot(rep_rnd.std_error[k], rep_max.std_error[k]))
        if diff > slack:
            confirmed.append(k + 1)
        elif diff < -slack:
            violated.append(k + 1)
        else:
            indeterminate.append(k + 1)

    worst = int(np.argmax(rep_max.outage))
    pf_diff = float(rep_pf.outage[worst] - rep_max.outage[worst])
    pf_slack = 3.0 * float(np.hypot(rep_pf.std_error[worst], rep_max.std_error[worst]))
    pf_ok = pf_diff < -pf_slack
    pf_state = "confirmed" if pf_ok else ("indeterminate" if abs(pf_diff) <= pf_slack else "violated")

    ok = not violated and pf_ok
    _report(
        10, ok,
        f"random > max confirmed for users {confirmed}, indeterminate "
        f"{indeterminate}, violated {violated}; PF <= max for worst user "
        f"{worst + 1}: {pf_state} (diff {pf_diff:+.4f})",
    )
    assert pf_ok, f"PF vs max for worst user: {pf_state}"
    assert not violated, (
        f"random-scheduler outage is significantly BELOW max-scheduler outage "
        f"for users {violated}: these users win fewer slots under max-based "
        f"selection than under uniform random (p_k < 1/K), so at small rates "
        f"their outage is dominated by never being scheduled and the stated "
        f"ordering cannot hold for them"
    )


def test_criterion_11_reproducibility(tmp_path):
    scenario = tmp_path / "scenario.json"
    scenario.write_text(
        """{"snr_db": 10.0, "rate": 0.5, "slots": 5, "trials": 50000, "seed": 99,
            "users": [{"sigma2": 1.0}, {"sigma2": 1.5, "xi2": 0.2},
                      {"sigma2": 2.0, "xi2": 0.4}]}"""
    )
    saved = os.environ.get("OUTAGE_BENCH_THREADS")
    outputs = []
    try:
        for tag, workers in [("a", "1"), ("b", "4"), ("c", "8"), ("d", "1")]:
            os.environ["OUTAGE_BENCH_THREADS"] = workers
            out = tmp_path / f"out_{tag}.csv"
            code = cli_main(
                ["simulate", "--scenario", str(scenario), "--out", str(out)]
            )
            assert code == 0
            outputs.append(out.read_bytes())
    finally:
        if saved is None:
            os.environ.pop("OUTAGE_BENCH_THREADS", None)
        else:
            os.environ["OUTAGE_BENCH_THREADS"] = saved
    identical = all(o == outputs[0] for o in outputs)
    _report(
        11, identical,
        f"simulate CSV byte-identical across threads {{1,4,8}} and re-runs: "
        f"{identical} ({len(outputs[0])} bytes)",
    )
    assert identical
