"""Per-slot user selection policies.

Three schedulers: pick the user with the largest estimated channel power
(the policy the analytical bounds describe), pick uniformly at random, and
proportional fair. All ties break to the lowest index; under continuous
fading a tie has probability zero, so the rule only pins determinism.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DomainError

__all__ = ["PfState", "select_max", "select_random", "select_pf"]


def select_max(gamma_hats: Sequence[float]) -> int:
    """Index of the largest estimated power (first one on ties)."""
    if len(gamma_hats) == 0:
        raise DomainError("select_max needs a nonempty list")
    return int(np.argmax(gamma_hats))


def select_random(k: int, rng: np.random.Generator) -> int:
    """Uniform selection over {0, ..., k-1}."""
    if k < 1:
        raise DomainError(f"need k >= 1 users, got {k}")
    return int(rng.integers(k))


@dataclass
class PfState:
    """Running per-user sums of achieved rate, one instance per trial.

    epsilon initializes the denominator so the first slots reduce to
    max-estimated-rate scheduling until every user has history.
    """

    cumulative: np.ndarray
    epsilon: float = 1e-6

    @classmethod
    def fresh(cls, k: int, epsilon: float = 1e-6) -> "PfState":
        if epsilon <= 0.0:
            raise DomainError(f"epsilon must be > 0, got {epsilon!r}")
        return cls(cumulative=np.zeros(k), epsilon=epsilon)

    def record(self, user: int, achieved_rate: float) -> None:
        """Add the selected user's achieved true rate after the slot."""
        self.cumulative[user] += achieved_rate


def select_pf(est_rates: Sequence[float], state: PfState) -> int:
    """Proportional fair choice: argmax of estimated rate over accumulated
    achieved rate. The caller records the achieved rate afterwards."""
    if len(est_rates) != len(state.cumulative):
        raise DomainError(
            f"rate list length {len(est_rates)} does not match state "
            f"length {len(state.cumulative)}"
        )
    metric = np.asarray(est_rates) / (state.epsilon + state.cumulative)
    return int(np.argmax(metric))
