"""Outage lower bounds and Monte Carlo simulation for max-based downlink
scheduling with imperfect channel estimates under Rayleigh fading."""

from .analytic import (
    BoundReport,
    HyperexpMixture,
    SystemConfig,
    bound_report,
    cond_outage_two_slots,
    cond_rate_outage,
    max_competitor_cdf,
    outage_lower_bound_loose,
    outage_lower_bound_tight,
    selected_power_cdf,
    selection_prob,
    slot_count_pmf,
)
from .channel import (
    RngStream,
    SlotDraw,
    UserProfile,
    achievable_rate,
    draw_slot,
    draw_slot_batch,
    validate_profiles,
)
from .errors import (
    CapabilityError,
    ConfigurationError,
    DomainError,
    QuadratureConvergenceError,
)
from .mc import (
    ConditionalEstimate,
    McConfig,
    OutageReport,
    estimate_conditional,
    estimate_outage,
    estimate_outage_sweep,
    sample_selected_power,
    two_slot_pair_oracle,
)
from .numerics import (
    QuadratureSpec,
    bessel_i0,
    bessel_i0e,
    integrate,
    marcum_q1,
    ncx2_pdf,
    ncx2_sf,
)
from .sched import PfState, select_max, select_pf, select_random

__version__ = "0.1.0"
