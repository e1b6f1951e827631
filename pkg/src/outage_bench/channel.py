"""Per-slot Rayleigh fading with additive channel-estimate error.

Generative convention used everywhere in this package (simulation and
closed forms are derived under the same convention, so they are mutually
consistent):

* the estimate h_hat has independent real/imaginary parts, each
  N(0, sigma_hat2) with sigma_hat2 = sigma2 - xi2,
* the estimation error w has independent real/imaginary parts, each
  N(0, xi2 / 2), so E|w|^2 = xi2,
* the true gain is h = h_hat + w.

Consequences: the estimated power gamma_hat = |h_hat|^2 is exponential
with mean 2*sigma_hat2, and conditionally on gamma_hat = x the true power
gamma = |h|^2 satisfies gamma / (xi2/2) ~ noncentral chi-squared with 2
degrees of freedom and noncentrality 2*x/xi2.

Gaussians come from numpy's Philox counter-based generator (ziggurat
standard normals); the method is pinned so that a (seed, stream index)
pair reproduces the identical draw sequence within a build.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, DomainError

__all__ = [
    "UserProfile",
    "SlotDraw",
    "RngStream",
    "validate_profiles",
    "draw_slot",
    "draw_slot_batch",
    "achievable_rate",
]

_MASK64 = (1 << 64) - 1
_LOG2 = math.log(2.0)


@dataclass(frozen=True)
class UserProfile:
    """Per-user fading variance sigma2 and estimate-error power xi2."""

    sigma2: float
    xi2: float = 0.0

    @property
    def sigma_hat2(self) -> float:
        """Variance of each component of the channel estimate."""
        return self.sigma2 - self.xi2


@dataclass(frozen=True)
class SlotDraw:
    """One slot: per-user estimated and true channel powers."""

    gamma_hat: np.ndarray
    gamma: np.ndarray


@dataclass(frozen=True)
class RngStream:
    """Counter-based random stream identified by (seed, substream index)."""

    seed: int
    index: int = 0

    def substream(self, index: int) -> "RngStream":
        return RngStream(self.seed, index)

    def generator(self) -> np.random.Generator:
        key = np.array([self.seed & _MASK64, self.index & _MASK64], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))


def validate_profiles(profiles: Sequence[UserProfile]) -> None:
    """Check every per-user invariant; raise ConfigurationError naming the
    offending user index (0-based) and field otherwise."""
    if len(profiles) < 1:
        raise ConfigurationError("at least one user profile is required")
    for j, p in enumerate(profiles):
        if not (math.isfinite(p.sigma2) and p.sigma2 > 0.0):
            raise ConfigurationError(f"user {j}: sigma2 must be > 0, got {p.sigma2!r}")
        if not (math.isfinite(p.xi2) and 0.0 <= p.xi2 <= p.sigma2):
            raise ConfigurationError(
                f"user {j}: xi2 must satisfy 0 <= xi2 <= sigma2, got {p.xi2!r}"
            )


def draw_slot_batch(
    profiles: Sequence[UserProfile],
    n_slots: int,
    rng: np.random.Generator,
) -> SlotDraw:
    """Draw n_slots independent slots for all users at once.

    Returns arrays of shape (n_slots, K). The draw order is pinned: one
    standard-normal block of shape (4, n_slots, K) holding, in order, the
    estimate real part, estimate imaginary part, error real part, error
    imaginary part.
    """
    k = len(profiles)
    sig_hat = np.sqrt(np.array([p.sigma_hat2 for p in profiles]))
    err_std = np.sqrt(np.array([0.5 * p.xi2 for p in profiles]))
    z = rng.standard_normal((4, n_slots, k))
    hat_re = sig_hat * z[0]
    hat_im = sig_hat * z[1]
    true_re = hat_re + err_std * z[2]
    true_im = hat_im + err_std * z[3]
    gamma_hat = hat_re**2 + hat_im**2
    gamma = true_re**2 + true_im**2
    return SlotDraw(gamma_hat=gamma_hat, gamma=gamma)


def draw_slot(profiles: Sequence[UserProfile], rng: np.random.Generator) -> SlotDraw:
    """Draw a single slot; arrays have shape (K,)."""
    batch = draw_slot_batch(profiles, 1, rng)
    return SlotDraw(gamma_hat=batch.gamma_hat[0], gamma=batch.gamma[0])


def achievable_rate(gamma: float, rho: float) -> float:
    """Rate log2(1 + rho * gamma) in bits per channel use."""
    if gamma < 0.0:
        raise DomainError(f"gamma must be >= 0, got {gamma!r}")
    if rho <= 0.0:
        raise DomainError(f"rho must be > 0, got {rho!r}")
    return math.log1p(rho * gamma) / _LOG2
