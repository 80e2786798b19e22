"""Stationary points of the empirical robust-regression risk."""

import math
from dataclasses import dataclass

import numpy as np

from .. import bounds as bd
from ..bregman import Euclidean
from ..errors import InvalidParams, MaxIterations
from ..losses import default_xbar
from ..prox import DEFAULT_TOL, prox_point
from .nets import Region
from .report import ExperimentReport
from .seeding import derive_seed

NEAR_OPTIMAL = "near_optimal"
LARGE_SUBGRADIENT = "large_subgradient"
THEORY_VIOLATION = "TheoryViolation"
NOT_CONVERGED = "not_converged"


@dataclass(frozen=True)
class LandscapeRun:
    init: np.ndarray
    x_final: np.ndarray
    dist_to_xbar: float
    subgrad_norm_lb: float
    classification: str
    iterations: int
    reason: str = ""


def default_t(a, xbar_norm, C_sigma, d, m, gamma=0.05):
    """Deviation level ``2 a ||xbar|| C_sigma sqrt(2 d log(2/gamma) / m)`` used in the radius."""
    return 2.0 * a * xbar_norm * C_sigma * math.sqrt(2.0 * d * math.log(2.0 / gamma) / m)


def fixed_point(phi, comp, rho_bar, y0, stop, tol=DEFAULT_TOL, max_outer=500):
    """Iterate ``y <- prox(y)`` until ``rho_bar ||y_k - y_{k+1}|| <= stop``.

    Returns ``(y_{k+1}, rho_bar ||y_k - y_{k+1}||, iterations, converged, slack)``;
    the middle value bounds ``dist(0, subdiff(y_{k+1}))`` from above
    through the graph point of the last prox step.
    """
    y = np.asarray(y0, dtype=float)
    res = 0.0
    slack = 0.0
    for k in range(1, max_outer + 1):
        r = prox_point(phi, comp, rho_bar, y, tol)
        slack = r.certificate.distance(phi.alpha)
        res = rho_bar * float(np.linalg.norm(y - r.prox_point))
        y = r.prox_point
        if res <= stop:
            return y, res, k, True, slack
    return y, res, max_outer, False, slack


def robust_landscape(
    cfg, m, n_inits, tol=DEFAULT_TOL, rho_bar=1.0, a=2.0, gamma=0.05, t=None, seed=0, max_outer=500, scale=1.0
):
    """Run the prox-point method from random starts and classify each limit.

    ``cfg`` is a robust-regression :class:`LossConfig`.  Starts are uniform
    on the ball ``a ||xbar|| B``; each run stops once the prox residual
    ``rho_bar ||y_k - y_{k+1}||`` drops below ``min(D/8, 1e-6 scale)``.  A
    limit is ``near_optimal`` when within the near-optimality radius of
    ``xbar`` (up to solver slack), ``large_subgradient`` when its residual
    is at least ``D/2``, and a ``TheoryViolation`` otherwise.

    Returns
    -------
    (list of LandscapeRun, dict)
        The runs and the constants used.
    """
    if cfg.kind != "robust":
        raise InvalidParams("robust_landscape needs a robust-regression configuration")
    d = cfg.d
    params = cfg.data
    xbar = np.asarray(params["xbar"], dtype=float) if "xbar" in params else default_xbar(d, params.get("xbar_norm", 1.0))
    xn = float(np.linalg.norm(xbar))
    link = cfg.loss.link
    p_fail = float(params.get("p_fail", 0.0))
    if t is None:
        t = default_t(a, xn, link.C_sigma, d, m, gamma)
    consts = bd.gaussian_robust_constants(link, d, p_fail, a, xn, m, t)
    consts["t"] = t
    stop = min(consts["D"] / 8.0, 1e-6 * scale)
    phi = Euclidean(d)
    S = cfg.sample(m, derive_seed(seed, "landscape", m))
    comp = cfg.objective(S).composite()
    rng = np.random.default_rng(derive_seed(seed, "inits", n_inits))
    inits = Region(a * xn, d, "l2").sample(n_inits, rng)
    runs = []
    for x0 in inits:
        try:
            y, res, k, ok, slack = fixed_point(phi, comp, rho_bar, x0, stop, tol, max_outer)
        except MaxIterations as exc:
            runs.append(LandscapeRun(x0, x0, math.nan, math.nan, NOT_CONVERGED, 0, f"MaxIterations: {exc}"))
            continue
        dist = float(np.linalg.norm(y - xbar))
        if not ok:
            runs.append(LandscapeRun(x0, y, dist, res, NOT_CONVERGED, k, f"residual {res!r} above {stop!r}"))
            continue
        if dist <= consts["near_opt_radius"] + slack:
            cls = NEAR_OPTIMAL
        elif res >= consts["large_subgrad"]:
            cls = LARGE_SUBGRADIENT
        else:
            cls = THEORY_VIOLATION
        runs.append(LandscapeRun(x0, y, dist, res, cls, k))
    consts["stop"] = stop
    return runs, consts


def landscape_report(runs, consts, m, seed, config=None):
    """Rows: ``measured = dist_to_xbar`` versus ``bound = near_opt_radius``; violations fail."""
    rep = ExperimentReport("robust_landscape", config or {}, hard=True)
    for i, r in enumerate(runs):
        if r.classification == NOT_CONVERGED:
            continue
        rep.add(i, m, seed, r.dist_to_xbar, consts["near_opt_radius"], 0.0, r.classification != THEORY_VIOLATION)
    counts = {}
    for r in runs:
        counts[r.classification] = counts.get(r.classification, 0) + 1
    conv = [r for r in runs if r.classification != NOT_CONVERGED]
    rep.summary.update(
        {f"count_{k}": v for k, v in sorted(counts.items())},
        near_optimal_fraction=(sum(r.classification == NEAR_OPTIMAL for r in conv) / len(conv)) if conv else 0.0,
        **{k: v for k, v in consts.items()},
    )
    return rep
