"""Seeded Monte Carlo estimation of delay-constrained outage probability.

Trials are grouped into fixed-size batches; each batch draws from its own
counter-based substream keyed by (seed, batch index), so results are
bit-identical for a given (seed, trials) no matter how many workers run
the batches. All per-batch results are integer counts, which makes the
reduction exactly order-independent as well.

A trial is one delay window of n_slots independent slots. Per slot the
scheduler picks a user from the estimated powers; the achieved rate uses
the true power of the selected user. User k is in outage for the trial
iff the sum of its achieved rates over the slots it won is strictly below
rate * n_slots (a user that never transmits accumulates zero rate, hence
is always in outage when the required rate is positive, and never when it
is exactly zero).
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .analytic import SystemConfig
from .channel import RngStream, UserProfile
from .errors import ConfigurationError, DomainError

__all__ = [
    "McConfig",
    "OutageReport",
    "ConditionalEstimate",
    "estimate_outage",
    "estimate_outage_sweep",
    "estimate_conditional",
    "sample_selected_power",
    "two_slot_pair_oracle",
    "worker_count",
]

BATCH_SIZE = 8192  # build constant: part of the reproducibility contract
SCHEDULERS = ("max", "random", "pf")
LOW_SUPPORT_COUNT = 100
_LOG2 = math.log(2.0)


@dataclass(frozen=True)
class McConfig:
    """Trial count, seed, scheduler policy, and PF initializer."""

    trials: int = 1_000_000
    seed: int = 12345
    scheduler: str = "max"
    pf_epsilon: float = 1e-6

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigurationError(f"trials must be >= 1, got {self.trials!r}")
        if self.scheduler not in SCHEDULERS:
            raise ConfigurationError(
                f"scheduler must be one of {SCHEDULERS}, got {self.scheduler!r}"
            )
        if not self.pf_epsilon > 0.0:
            raise ConfigurationError(
                f"pf_epsilon must be > 0, got {self.pf_epsilon!r}"
            )


@dataclass(frozen=True)
class ConditionalEstimate:
    """Outage frequency among trials with a given selected-slot count."""

    value: float
    std_error: float
    count: int
    low_support: bool


@dataclass(frozen=True)
class OutageReport:
    """Per-user Monte Carlo estimates for one required rate.

    Arrays are indexed by user; slot_hist[k, i] counts trials in which
    user k won exactly i slots, and cond_outage[k, i] is the outage
    frequency among those trials (nan when the count is zero).
    """

    rate: float
    n_slots: int
    trials: int
    seed: int
    scheduler: str
    outage: np.ndarray
    std_error: np.ndarray
    p_hat: np.ndarray
    slot_hist: np.ndarray
    cond_outage: np.ndarray

    def conditional(self, k: int, i: int) -> ConditionalEstimate:
        count = int(self.slot_hist[k, i])
        if count == 0:
            return ConditionalEstimate(math.nan, math.nan, 0, True)
        freq = float(self.cond_outage[k, i])
        se = math.sqrt(freq * (1.0 - freq) / count)
        return ConditionalEstimate(freq, se, count, count < LOW_SUPPORT_COUNT)


def worker_count() -> int:
    """Worker cap from OUTAGE_BENCH_THREADS (default 1); results never
    depend on it, only wall-clock time does."""
    raw = os.environ.get("OUTAGE_BENCH_THREADS", "1")
    try:
        value = int(raw)
    except ValueError as exc:
        raise ConfigurationError(
            f"OUTAGE_BENCH_THREADS must be an integer, got {raw!r}"
        ) from exc
    return max(1, value)


def _simulate_batch(system: SystemConfig, mc: McConfig, batch_index: int,
                    batch_trials: int, rates: np.ndarray):
    """Run one batch; returns integer count arrays only.

    Draw order within a batch is pinned: the standard-normal block for all
    channels first, then (random scheduler only) the uniform selections.
    """
    k_users = system.n_users
    n = system.n_slots
    rng = RngStream(mc.seed, batch_index).generator()

    sig_hat = np.sqrt(np.array([p.sigma_hat2 for p in system.profiles]))
    err_std = np.sqrt(np.array([0.5 * p.xi2 for p in system.profiles]))
    z = rng.standard_normal((4, batch_trials, n, k_users))
    hat_re = sig_hat * z[0]
    hat_im = sig_hat * z[1]
    true_re = hat_re + err_std * z[2]
    true_im = hat_im + err_std * z[3]
    gamma_hat = hat_re**2 + hat_im**2
    gamma = true_re**2 + true_im**2
    del z, hat_re, hat_im, true_re, true_im

    if mc.scheduler == "max":
        selected = np.argmax(gamma_hat, axis=2)
    elif mc.scheduler == "random":
        selected = rng.integers(0, k_users, size=(batch_trials, n))
    else:  # proportional fair, sequential in the slot index
        selected = np.empty((batch_trials, n), dtype=np.int64)
        cumulative = np.zeros((batch_trials, k_users))
        rows = np.arange(batch_trials)
        for s in range(n):
            est = np.log1p(system.rho * gamma_hat[:, s, :]) / _LOG2
            choice = np.argmax(est / (mc.pf_epsilon + cumulative), axis=1)
            selected[:, s] = choice
            achieved = np.log1p(system.rho * gamma[rows, s, choice]) / _LOG2
            cumulative[rows, choice] += achieved

    rows = np.arange(batch_trials)
    slot_rate = np.log1p(system.rho * gamma[rows[:, None], np.arange(n), selected]) / _LOG2

    slot_hist = np.zeros((k_users, n + 1), dtype=np.int64)
    cond_out = np.zeros((len(rates), k_users, n + 1), dtype=np.int64)
    for k in range(k_users):
        mask = selected == k
        counts = mask.sum(axis=1)
        rate_sum = np.where(mask, slot_rate, 0.0).sum(axis=1)
        slot_hist[k] += np.bincount(counts, minlength=n + 1)
        for r_idx, r in enumerate(rates):
            in_outage = rate_sum < r * n
            cond_out[r_idx, k] += np.bincount(
                counts[in_outage], minlength=n + 1
            )
    return slot_hist, cond_out


def _accumulate(system: SystemConfig, mc: McConfig, rates: np.ndarray):
    """All batches, reduced in batch order; returns (slot_hist, cond_out)."""
    n_batches = (mc.trials + BATCH_SIZE - 1) // BATCH_SIZE
    sizes = [
        min(BATCH_SIZE, mc.trials - b * BATCH_SIZE) for b in range(n_batches)
    ]
    workers = worker_count()
    if workers == 1 or n_batches == 1:
        results = [
            _simulate_batch(system, mc, b, sizes[b], rates)
            for b in range(n_batches)
        ]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(
                pool.map(
                    lambda b: _simulate_batch(system, mc, b, sizes[b], rates),
                    range(n_batches),
                )
            )
    slot_hist = np.zeros_like(results[0][0])
    cond_out = np.zeros_like(results[0][1])
    for h, c in results:
        slot_hist += h
        cond_out += c
    return slot_hist, cond_out


def _report_from_counts(system, mc, rate, slot_hist, cond_out) -> OutageReport:
    trials = mc.trials
    n = system.n_slots
    outage_counts = cond_out.sum(axis=1)
    outage = outage_counts / trials
    se = np.sqrt(outage * (1.0 - outage) / trials)
    p_hat = (slot_hist * np.arange(n + 1)).sum(axis=1) / (trials * n)
    with np.errstate(invalid="ignore"):
        cond = np.where(slot_hist > 0, cond_out / np.maximum(slot_hist, 1), np.nan)
    return OutageReport(
        rate=float(rate),
        n_slots=n,
        trials=trials,
        seed=mc.seed,
        scheduler=mc.scheduler,
        outage=outage,
        std_error=se,
        p_hat=p_hat,
        slot_hist=slot_hist,
        cond_outage=cond,
    )


def estimate_outage(system: SystemConfig, mc: McConfig) -> OutageReport:
    """Monte Carlo outage estimate at the configured rate."""
    slot_hist, cond_out = _accumulate(system, mc, np.array([system.rate]))
    return _report_from_counts(system, mc, system.rate, slot_hist, cond_out[0])


def estimate_outage_sweep(
    system: SystemConfig, mc: McConfig, rates: Sequence[float]
) -> list[OutageReport]:
    """One report per rate, all from a single common-random-numbers pass.

    Identical to running estimate_outage per rate with the same seed (the
    draws do not depend on the rate), but one pass over the trials.
    """
    rates_arr = np.asarray(list(rates), dtype=float)
    if rates_arr.size == 0:
        raise DomainError("rates must be nonempty")
    if np.any(rates_arr < 0.0):
        raise DomainError("rates must be >= 0")
    slot_hist, cond_out = _accumulate(system, mc, rates_arr)
    return [
        _report_from_counts(system, mc, r, slot_hist, cond_out[i])
        for i, r in enumerate(rates_arr)
    ]


def estimate_conditional(
    system: SystemConfig, mc: McConfig, k: int, i: int
) -> ConditionalEstimate:
    """Outage frequency among trials where user k won exactly i slots.

    The direct simulation counterpart of the analytic conditional terms;
    flagged low-support when fewer than 100 trials condition the estimate.
    """
    if not 0 <= k < system.n_users:
        raise DomainError(f"user index {k} out of range")
    if not 0 <= i <= system.n_slots:
        raise DomainError(f"slot count {i} out of range")
    return estimate_outage(system, mc).conditional(k, i)


# ---------------------------------------------------------------------------
# Targeted oracles
# ---------------------------------------------------------------------------

def sample_selected_power(
    profiles: Sequence[UserProfile],
    k: int,
    n_samples: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """True-power samples of user k conditioned on user k winning the slot.

    Draws estimated powers directly as exponentials (mean 2*sigma_hat2),
    keeps the slots user k wins, and completes the true power from the
    conditional noncentral chi-squared construction gamma =
    (sqrt(gamma_hat) + w_re)^2 + w_im^2. Used as a brute-force reference
    for the conditional selected-power distribution.
    """
    means = np.array([2.0 * p.sigma_hat2 for p in profiles])
    if means[k] == 0.0 and np.any(np.delete(means, k) > 0.0):
        raise ConfigurationError(f"user {k} is never selected (sigma_hat2 = 0)")
    err_std = math.sqrt(0.5 * profiles[k].xi2)
    out = np.empty(n_samples)
    filled = 0
    chunk = max(8192, min(n_samples, 512_000))
    while filled < n_samples:
        draws = rng.exponential(1.0, size=(chunk, len(means))) * means
        wins = np.argmax(draws, axis=1) == k
        won_hats = draws[wins, k]
        w = rng.standard_normal((won_hats.size, 2)) * err_std
        gammas = (np.sqrt(won_hats) + w[:, 0]) ** 2 + w[:, 1] ** 2
        take = min(n_samples - filled, gammas.size)
        out[filled : filled + take] = gammas[:take]
        filled += take
    return out


def two_slot_pair_oracle(
    profiles: Sequence[UserProfile],
    k: int,
    rho: float,
    rate: float,
    n_slots: int,
    n_pairs: int,
    rng: np.random.Generator,
) -> tuple[float, float]:
    """Brute-force estimate of the exact two-slot outage term.

    Draws n_pairs independent pairs of conditional selected powers and
    counts how often (1 + rho g1)(1 + rho g2) < 2^(rate * n_slots).
    Returns (estimate, standard error).
    """
    samples = sample_selected_power(profiles, k, 2 * n_pairs, rng)
    g1, g2 = samples[:n_pairs], samples[n_pairs:]
    threshold = rate * n_slots * _LOG2
    hits = np.log1p(rho * g1) + np.log1p(rho * g2) < threshold
    p = hits.mean()
    return float(p), math.sqrt(p * (1.0 - p) / n_pairs)
