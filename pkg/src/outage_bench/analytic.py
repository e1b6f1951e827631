"""Closed-form outage quantities for max-estimate scheduling.

Everything analytic lives here: the per-slot selection probability, the
binomial law of the number of slots a user wins, the distribution of a
user's true channel power conditioned on winning the slot, the per-slot
conditional rate-outage probability, the exact two-slot term, and the
loose/tight lower bounds on delay-constrained outage probability.

The conditional selected-power cdf has a closed form: expanding the
product cdf of the strongest competitor by inclusion-exclusion and
integrating the conditional noncentral chi-squared law against it turns
G(t) = Pr{gamma_k < t | k selected} into a signed mixture of exponentials

    G(t) = 1 - sum_S c_S exp(-t / beta_S)

with one term per subset S of competitors,

    c_S    = (-1)^|S| / (p_k * D_S),
    beta_S = 2 sigma_hat2_k / D_S + xi2_k,
    D_S    = 1 + sigma_hat2_k * sum_{m in S} 1 / sigma_hat2_m.

Subset enumeration is exact up to a configurable competitor count
(default 20, hard ceiling 25); beyond it the defining integrals are
evaluated by adaptive quadrature against the product-form competitor cdf.
Alternating-sign sums go through math.fsum, which is exact, so the heavy
cancellation near the ceiling costs no precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .channel import UserProfile, validate_profiles
from .errors import CapabilityError, ConfigurationError, DomainError
from .numerics import QuadratureSpec, integrate, marcum_q1, ncx2_pdf

__all__ = [
    "SystemConfig",
    "HyperexpMixture",
    "BoundReport",
    "max_competitor_cdf",
    "selection_prob",
    "slot_count_pmf",
    "selected_power_cdf",
    "cond_rate_outage",
    "cond_outage_two_slots",
    "outage_lower_bound_loose",
    "outage_lower_bound_tight",
    "bound_report",
]

_LOG2 = math.log(2.0)
# Exponent (base 2) past which 2^theta - 1 exceeds float range; the outage
# probability has rounded to 1 long before this.
_THETA_OVERFLOW = 700.0 / _LOG2

DEFAULT_EXPANSION_LIMIT = 20
HARD_EXPANSION_LIMIT = 25
# Above this many mixture terms, cdf/pdf evaluations switch from a vector
# dot product to exact compensated summation.
_FSUM_THRESHOLD = 1 << 14


@dataclass(frozen=True)
class SystemConfig:
    """Scenario: user profiles, linear SNR, required rate, delay window."""

    profiles: tuple[UserProfile, ...]
    rho: float
    rate: float
    n_slots: int
    expansion_limit: int = DEFAULT_EXPANSION_LIMIT

    def __post_init__(self):
        object.__setattr__(self, "profiles", tuple(self.profiles))
        validate_profiles(self.profiles)
        if not (math.isfinite(self.rho) and self.rho > 0.0):
            raise ConfigurationError(f"rho must be > 0, got {self.rho!r}")
        if not (math.isfinite(self.rate) and self.rate >= 0.0):
            raise ConfigurationError(f"rate must be >= 0, got {self.rate!r}")
        if self.n_slots < 1:
            raise ConfigurationError(f"n_slots must be >= 1, got {self.n_slots!r}")

    @property
    def n_users(self) -> int:
        return len(self.profiles)


@dataclass(frozen=True)
class HyperexpMixture:
    """Signed exponential mixture G(t) = 1 - sum_i coeffs[i] e^(-t/scales[i]).

    Coefficients sum to 1 (so G(0) = 0) and scales are positive; both are
    checked on construction. Instances are immutable and safe to share.
    """

    coeffs: np.ndarray
    scales: np.ndarray

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=float)
        scales = np.asarray(self.scales, dtype=float)
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "scales", scales)
        if coeffs.shape != scales.shape or coeffs.ndim != 1 or coeffs.size == 0:
            raise ConfigurationError("mixture needs matching 1-d coeff/scale arrays")
        if np.any(scales <= 0.0):
            raise ConfigurationError("mixture scales must be > 0")
        total = math.fsum(coeffs.tolist())
        if abs(total - 1.0) > 1e-9:
            raise ConfigurationError(
                f"mixture coefficients must sum to 1, got {total!r}"
            )

    def cdf(self, t):
        """G(t); accepts a scalar or an ndarray, clipped to [0, 1]."""
        t_arr = np.asarray(t, dtype=float)
        if t_arr.ndim == 0:
            if self.coeffs.size > _FSUM_THRESHOLD:
                tail = math.fsum(
                    (self.coeffs * np.exp(-float(t_arr) / self.scales)).tolist()
                )
            else:
                tail = float(np.dot(self.coeffs, np.exp(-float(t_arr) / self.scales)))
            return min(1.0, max(0.0, 1.0 - tail))
        tail = np.exp(-t_arr[..., None] / self.scales) @ self.coeffs
        return np.clip(1.0 - tail, 0.0, 1.0)

    def pdf(self, t):
        """Mixture density g(t) = sum_i (coeffs[i]/scales[i]) e^(-t/scales[i])."""
        t_arr = np.asarray(t, dtype=float)
        weights = self.coeffs / self.scales
        if t_arr.ndim == 0:
            if self.coeffs.size > _FSUM_THRESHOLD:
                val = math.fsum((weights * np.exp(-float(t_arr) / self.scales)).tolist())
            else:
                val = float(np.dot(weights, np.exp(-float(t_arr) / self.scales)))
            return max(0.0, val)
        return np.maximum(0.0, np.exp(-t_arr[..., None] / self.scales) @ weights)


@dataclass(frozen=True)
class BoundReport:
    """Analytic summary for one user at one (rate, n_slots) point."""

    user: int
    p_select: float
    slot_pmf: tuple[float, ...]
    loose_bound: float
    tight_bound: float
    p_out_one_slot: float
    p_out_two_slots: float


def _competitor_hat_vars(k: int, profiles: Sequence[UserProfile]) -> list[float]:
    """sigma_hat2 of every competitor of user k, degenerate ones dropped.

    A competitor with sigma_hat2 == 0 has an estimate that is identically
    zero, never wins a slot against a continuous rival, and contributes a
    factor of one to the competitor cdf, so it simply disappears from the
    expansion.
    """
    if not 0 <= k < len(profiles):
        raise DomainError(f"user index {k} out of range for {len(profiles)} users")
    return [p.sigma_hat2 for j, p in enumerate(profiles) if j != k and p.sigma_hat2 > 0.0]


def _subset_terms(inv_vars: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    """All 2^m subset sums of inv_vars with parity signs, by doubling.

    Returns (signs, sums) where for each subset S, sums holds
    sum_{m in S} inv_vars[m] and signs holds (-1)^|S|.
    """
    sums = np.zeros(1)
    signs = np.ones(1)
    for v in inv_vars:
        sums = np.concatenate([sums, sums + v])
        signs = np.concatenate([signs, -signs])
    return signs, sums


def max_competitor_cdf(
    k: int,
    profiles: Sequence[UserProfile],
    x: float,
    method: str = "product",
) -> float:
    """Cdf at x of the strongest competing estimated power, W_k.

    method='product' multiplies the per-competitor exponential cdfs and
    works for any user count; method='expansion' evaluates the
    inclusion-exclusion subset sum (exact compensated summation) and is
    limited to 25 competitors.
    """
    if x < 0.0:
        raise DomainError(f"x must be >= 0, got {x!r}")
    hat_vars = _competitor_hat_vars(k, profiles)
    if method == "product":
        result = 1.0
        for v in hat_vars:
            result *= -math.expm1(-x / (2.0 * v))
        return result
    if method == "expansion":
        if len(hat_vars) > HARD_EXPANSION_LIMIT:
            raise CapabilityError(
                f"subset expansion supports at most {HARD_EXPANSION_LIMIT} "
                f"competitors, got {len(hat_vars)}; use method='product'"
            )
        signs, sums = _subset_terms([1.0 / (2.0 * v) for v in hat_vars])
        terms = signs * np.exp(-x * sums)
        return math.fsum(terms.tolist())
    raise DomainError(f"unknown method {method!r}")


def selection_prob(
    k: int,
    profiles: Sequence[UserProfile],
    expansion_limit: int = DEFAULT_EXPANSION_LIMIT,
) -> float:
    """Probability that user k has the largest estimated power in a slot.

    Closed form: sum over competitor subsets S of (-1)^|S| / D_S with
    D_S = 1 + sigma_hat2_k * sum_{m in S} 1/sigma_hat2_m. Falls back to
    quadrature of the defining integral past the expansion limit.
    """
    validate_profiles(profiles)
    if not 0 <= k < len(profiles):
        raise DomainError(f"user index {k} out of range for {len(profiles)} users")
    own = profiles[k].sigma_hat2
    others = _competitor_hat_vars(k, profiles)
    if own == 0.0:
        if others:
            return 0.0
        if len(profiles) > 1:
            raise ConfigurationError(
                "every user has a zero-variance estimate; the max scheduler "
                "is undefined (all estimated powers are identically 0)"
            )
        return 1.0  # single user is always scheduled
    if not others:
        return 1.0
    if len(others) <= min(expansion_limit, HARD_EXPANSION_LIMIT):
        signs, sums = _subset_terms([1.0 / v for v in others])
        terms = signs / (1.0 + own * sums)
        return min(1.0, max(0.0, math.fsum(terms.tolist())))
    value, _ = integrate(
        lambda x: max_competitor_cdf(k, profiles, x, "product")
        * math.exp(-x / (2.0 * own))
        / (2.0 * own),
        0.0,
        math.inf,
    )
    return min(1.0, max(0.0, value))


def slot_count_pmf(p_select: float, n_slots: int) -> np.ndarray:
    """Binomial pmf of how many of n_slots slots a user wins."""
    if not 0.0 <= p_select <= 1.0:
        raise DomainError(f"p_select must be in [0, 1], got {p_select!r}")
    if n_slots < 1:
        raise DomainError(f"n_slots must be >= 1, got {n_slots!r}")
    return np.array(
        [
            math.comb(n_slots, i) * p_select**i * (1.0 - p_select) ** (n_slots - i)
            for i in range(n_slots + 1)
        ]
    )


def selected_power_cdf(
    k: int,
    profiles: Sequence[UserProfile],
    expansion_limit: int = DEFAULT_EXPANSION_LIMIT,
) -> HyperexpMixture:
    """Mixture form of G(t) = Pr{true power of user k < t | k selected}.

    Valid for any xi2_k >= 0; perfect knowledge of the channel is the
    xi2_k = 0 member of the same family. Requires sigma_hat2_k > 0 (or a
    single-user system) and at most the expansion limit of competitors.
    """
    validate_profiles(profiles)
    own = profiles[k].sigma_hat2
    xi2 = profiles[k].xi2
    others = _competitor_hat_vars(k, profiles)
    if own == 0.0 and others:
        raise ConfigurationError(
            f"user {k} has sigma_hat2 = 0 and competitors; the conditional "
            "selected-power law is degenerate (selection probability 0)"
        )
    limit = min(expansion_limit, HARD_EXPANSION_LIMIT)
    if len(others) > limit:
        raise CapabilityError(
            f"{len(others)} competitors exceed the expansion limit {limit}; "
            "use the quadrature-based conditional outage path"
        )
    signs, sums = _subset_terms([1.0 / v for v in others])
    d = 1.0 + own * sums
    p_select = math.fsum((signs / d).tolist())
    coeffs = signs / (p_select * d)
    scales = 2.0 * own / d + xi2
    return HyperexpMixture(coeffs=coeffs, scales=scales)


def _rate_threshold(theta: float, rho: float) -> float:
    """Power threshold (2^theta - 1) / rho, +inf if 2^theta overflows."""
    if theta < 0.0:
        raise DomainError(f"theta must be >= 0, got {theta!r}")
    if theta > _THETA_OVERFLOW:
        return math.inf
    return math.expm1(theta * _LOG2) / rho


def _cond_rate_outage_equal(
    k: int, profiles: Sequence[UserProfile], rho: float, theta: float
) -> float:
    """Equal-competitor-variance shortcut: K terms instead of 2^(K-1).

    With every competitor sharing one sigma_hat2, subsets of equal size
    collapse onto a binomial coefficient.
    """
    own = profiles[k].sigma_hat2
    xi2 = profiles[k].xi2
    others = _competitor_hat_vars(k, profiles)
    if own == 0.0 and others:
        return 1.0
    t = _rate_threshold(theta, rho)
    if t == 0.0:
        return 0.0
    if not others:
        return -math.expm1(-t / (2.0 * own + xi2)) if math.isfinite(t) else 1.0
    common = others[0]
    if any(abs(v - common) > 1e-12 * common for v in others):
        raise ConfigurationError(
            "equal-variance path requires all competitors to share sigma_hat2"
        )
    m = len(others)
    ratio = own / common
    denom = np.array([1.0 + j * ratio for j in range(m + 1)])
    weights = np.array(
        [math.comb(m, j) * (-1.0) ** j for j in range(m + 1)]
    ) / denom
    p_select = math.fsum(weights.tolist())
    if not math.isfinite(t):
        return 1.0
    scales = 2.0 * own / denom + xi2
    tail = math.fsum((weights * np.exp(-t / scales)).tolist()) / p_select
    return min(1.0, max(0.0, 1.0 - tail))


def _cond_rate_outage_quadrature(
    k: int, profiles: Sequence[UserProfile], rho: float, theta: float
) -> float:
    """Defining-integral evaluation used past the expansion limit.

    Integrates the conditional chi-squared tail (via the Marcum Q
    function) against the product-form competitor cdf and the estimate
    density of user k.
    """
    own = profiles[k].sigma_hat2
    xi2 = profiles[k].xi2
    if own == 0.0 and _competitor_hat_vars(k, profiles):
        return 1.0  # never-selected user, conditional outage by convention
    t = _rate_threshold(theta, rho)
    if t == 0.0:
        return 0.0
    if not math.isfinite(t):
        return 1.0
    p_select = selection_prob(k, profiles, expansion_limit=0)
    if p_select == 0.0:
        return 1.0

    def weight(x: float) -> float:
        return (
            max_competitor_cdf(k, profiles, x, "product")
            * math.exp(-x / (2.0 * own))
            / (2.0 * own)
        )

    if xi2 == 0.0:
        value, _ = integrate(weight, 0.0, t)
        return min(1.0, max(0.0, value / p_select))
    xi = math.sqrt(xi2)
    b = math.sqrt(2.0 * t) / xi
    survive, _ = integrate(
        lambda x: marcum_q1(math.sqrt(2.0 * x) / xi, b) * weight(x), 0.0, math.inf
    )
    return min(1.0, max(0.0, 1.0 - survive / p_select))


def cond_rate_outage(
    k: int,
    profiles: Sequence[UserProfile],
    rho: float,
    theta: float,
    method: str = "auto",
    expansion_limit: int = DEFAULT_EXPANSION_LIMIT,
) -> float:
    """Pr{per-slot rate < theta | user k selected} = G((2^theta - 1)/rho).

    method='auto' uses the mixture closed form when the competitor count
    allows and quadrature otherwise; method='equal' forces the
    equal-competitor-variance shortcut; method='general' forces the
    mixture; method='quadrature' forces the defining integral.
    """
    validate_profiles(profiles)
    if not (math.isfinite(rho) and rho > 0.0):
        raise DomainError(f"rho must be > 0, got {rho!r}")
    if method == "equal":
        return _cond_rate_outage_equal(k, profiles, rho, theta)
    if method == "quadrature":
        return _cond_rate_outage_quadrature(k, profiles, rho, theta)
    own = profiles[k].sigma_hat2
    others = _competitor_hat_vars(k, profiles)
    if own == 0.0 and others:
        _ = _rate_threshold(theta, rho)  # still validate theta
        return 1.0  # never-selected user: conditional outage by convention
    n_limit = min(expansion_limit, HARD_EXPANSION_LIMIT)
    if method == "general" or len(others) <= n_limit:
        t = _rate_threshold(theta, rho)
        if t == 0.0:
            return 0.0
        if not math.isfinite(t):
            return 1.0
        mixture = selected_power_cdf(k, profiles, expansion_limit)
        return float(mixture.cdf(t))
    if method != "auto":
        raise DomainError(f"unknown method {method!r}")
    return _cond_rate_outage_quadrature(k, profiles, rho, theta)


def cond_outage_two_slots(
    k: int,
    profiles: Sequence[UserProfile],
    rho: float,
    rate: float,
    n_slots: int,
    spec: QuadratureSpec | None = None,
    expansion_limit: int = DEFAULT_EXPANSION_LIMIT,
) -> float:
    """Exact Pr{(1 + rho g1)(1 + rho g2) < 2^(rate*n_slots)} with g1, g2
    independent selected powers of user k.

    The four-dimensional definition collapses to one dimension because
    slots are independent and the conditional selected-power cdf G has
    closed form: with T = (2^(R N) - 1)/rho and
    u(t) = (2^(R N)/(1 + rho t) - 1)/rho,

        P = integral_0^T g(t) G(u(t)) dt,

    where g is the mixture density. Past the expansion limit, G and g are
    themselves evaluated by quadrature (slow but exact).
    """
    validate_profiles(profiles)
    theta = rate * n_slots
    own = profiles[k].sigma_hat2
    others = _competitor_hat_vars(k, profiles)
    if own == 0.0 and others:
        return 1.0
    t_max = _rate_threshold(theta, rho)
    if t_max == 0.0:
        return 0.0
    if not math.isfinite(t_max):
        return 1.0
    pow2 = math.exp(theta * _LOG2)

    def u_of_t(t: float) -> float:
        return max(0.0, (pow2 / (1.0 + rho * t) - 1.0) / rho)

    spec = spec or QuadratureSpec()
    if len(others) <= min(expansion_limit, HARD_EXPANSION_LIMIT):
        mixture = selected_power_cdf(k, profiles, expansion_limit)
        value, _ = integrate(
            lambda t: mixture.pdf(t) * mixture.cdf(u_of_t(t)), 0.0, t_max, spec
        )
        return min(1.0, max(0.0, value))

    # Quadrature fallback: both G and its density from the defining
    # integrals with the product-form competitor cdf.
    p_select = selection_prob(k, profiles, expansion_limit=0)
    if p_select == 0.0:
        return 1.0
    xi2 = profiles[k].xi2

    def weight(x: float) -> float:
        return (
            max_competitor_cdf(k, profiles, x, "product")
            * math.exp(-x / (2.0 * own))
            / (2.0 * own)
        )

    inner_spec = QuadratureSpec(
        abs_tol=max(spec.abs_tol, 1e-12), rel_tol=1e-8, max_depth=spec.max_depth
    )

    if xi2 == 0.0:
        def g_cond(t: float) -> float:
            return weight(t) / p_select

        def big_g(t: float) -> float:
            val, _ = integrate(weight, 0.0, t, inner_spec)
            return min(1.0, val / p_select)
    else:
        xi = math.sqrt(xi2)

        def g_cond(t: float) -> float:
            lam_scale = 2.0 / xi2
            val, _ = integrate(
                lambda x: lam_scale
                * ncx2_pdf(lam_scale * t, lam_scale * x)
                * weight(x),
                0.0,
                math.inf,
                inner_spec,
            )
            return val / p_select

        def big_g(t: float) -> float:
            b = math.sqrt(2.0 * t) / xi
            val, _ = integrate(
                lambda x: marcum_q1(math.sqrt(2.0 * x) / xi, b) * weight(x),
                0.0,
                math.inf,
                inner_spec,
            )
            return min(1.0, max(0.0, 1.0 - val / p_select))

    outer_spec = QuadratureSpec(
        abs_tol=max(spec.abs_tol, 1e-8), rel_tol=max(spec.rel_tol, 1e-6),
        max_depth=spec.max_depth,
    )
    value, _ = integrate(lambda t: g_cond(t) * big_g(u_of_t(t)), 0.0, t_max, outer_spec)
    return min(1.0, max(0.0, value))


def _bound(config: SystemConfig, k: int, tight: bool) -> BoundReport:
    """Shared implementation of the loose and tightened lower bounds."""
    p_select = selection_prob(k, config.profiles, config.expansion_limit)
    pmf = slot_count_pmf(p_select, config.n_slots)
    theta_total = config.rate * config.n_slots

    if p_select == 0.0:
        # Never-selected user: outage is certain, conditional terms are 1
        # by convention.
        return BoundReport(
            user=k,
            p_select=0.0,
            slot_pmf=tuple(pmf.tolist()),
            loose_bound=1.0,
            tight_bound=1.0,
            p_out_one_slot=1.0,
            p_out_two_slots=1.0,
        )

    q = [
        cond_rate_outage(
            k, config.profiles, config.rho, theta_total / i,
            expansion_limit=config.expansion_limit,
        )
        for i in range(1, config.n_slots + 1)
    ]
    terms = [float(pmf[0])]
    for i in range(1, config.n_slots + 1):
        terms.append(float(pmf[i]) * q[i - 1] ** i)
    loose = min(1.0, math.fsum(terms))

    p_two = (
        cond_outage_two_slots(
            k, config.profiles, config.rho, config.rate, config.n_slots,
            expansion_limit=config.expansion_limit,
        )
        if config.n_slots >= 2
        else 0.0
    )
    tight_val = loose
    if config.n_slots >= 2:
        terms[2] = float(pmf[2]) * p_two
        tight_val = min(1.0, math.fsum(terms))

    return BoundReport(
        user=k,
        p_select=p_select,
        slot_pmf=tuple(pmf.tolist()),
        loose_bound=loose,
        tight_bound=tight_val if tight else loose,
        p_out_one_slot=q[0],
        p_out_two_slots=p_two,
    )


def outage_lower_bound_loose(config: SystemConfig, k: int) -> float:
    """Union-bound-based lower bound on the outage probability of user k."""
    return _bound(config, k, tight=False).loose_bound


def outage_lower_bound_tight(config: SystemConfig, k: int) -> float:
    """Lower bound with the two-slot term evaluated exactly; always at
    least as large as the loose bound."""
    return _bound(config, k, tight=True).tight_bound


def bound_report(config: SystemConfig, k: int) -> BoundReport:
    """Both bounds plus the ingredients, computed in one pass."""
    return _bound(config, k, tight=True)
