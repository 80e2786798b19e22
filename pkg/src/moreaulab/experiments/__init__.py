"""Monte Carlo and deterministic experiment harness."""

from .checks import (
    McDiarmidResult,
    attouch_check,
    graph_hausdorff,
    mcdiarmid_experiment,
    random_swaps,
    stability_check,
    stability_report,
    swap_modulus,
)
from .deviation import (
    envelope_rate_experiment,
    functional_rate_experiment,
    oracle_noise_floor,
    sup_functional_deviation,
    sup_prox_deviation,
)
from .landscape import robust_landscape
from .nets import CoveringNet, Region, build_net, verify_net
from .rademacher import rademacher_estimate
from .report import ExperimentReport, RateFit, rate_fit
from .seeding import derive_seed, trial_seed
from .setup import LossConfig

__all__ = [
    "CoveringNet",
    "ExperimentReport",
    "LossConfig",
    "McDiarmidResult",
    "RateFit",
    "Region",
    "attouch_check",
    "build_net",
    "derive_seed",
    "envelope_rate_experiment",
    "functional_rate_experiment",
    "graph_hausdorff",
    "mcdiarmid_experiment",
    "oracle_noise_floor",
    "rademacher_estimate",
    "random_swaps",
    "rate_fit",
    "robust_landscape",
    "stability_check",
    "stability_report",
    "sup_functional_deviation",
    "sup_prox_deviation",
    "swap_modulus",
    "trial_seed",
    "verify_net",
]
