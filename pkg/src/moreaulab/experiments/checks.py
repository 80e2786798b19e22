"""Deterministic inequality checks: stability, graphical closeness, McDiarmid tails."""

import math
from dataclasses import dataclass

import numpy as np

from .. import bounds as bd
from ..bregman import Euclidean
from ..errors import InvalidParams
from ..prox import DEFAULT_TOL, as_composite, prox_point
from .report import ExperimentReport


@dataclass(frozen=True)
class SwapResult:
    index: int
    measured: float
    bound: float
    slack: float
    passed: bool


def _sqrt_dsym(phi, a, b):
    if isinstance(phi, Euclidean):
        return float(np.linalg.norm(a - b))
    return math.sqrt(max(float(np.dot(phi.grad(a) - phi.grad(b), a - b)), 0.0))


def random_swaps(cfg, S, n, seed):
    """``n`` pairs ``(i, z_i')`` with uniform indices and fresh records drawn from ``cfg``."""
    rng = np.random.default_rng(seed)
    fresh = cfg.sample(n, seed)
    idx = rng.integers(0, S.m, size=n)
    return [(int(i), fresh.record(j)) for j, i in enumerate(idx)]


def swap_modulus(cfg, S, swaps):
    """Largest Euclidean weak-convexity modulus over ``S`` and every swapped sample."""
    rho = cfg.objective(S).rho_e
    for i, z in swaps:
        rho = max(rho, cfg.objective(S.replace(i, z)).rho_e)
    return rho


def stability_check(cfg, phi, rho_bar, y, S, swaps, tol=DEFAULT_TOL, rho=None, radius=None):
    """Compare ``sqrt(Dsym(A(S), A(S^i)))`` with the one-swap stability bound.

    ``A(S)`` is the regularized minimizer ``argmin phi_S + rho_bar D(., y)``,
    i.e. the prox of the empirical risk at ``y``.  Per-sample Lipschitz
    constants are taken on the constraint ball of ``cfg.reg`` (or
    ``radius``).  The bound is divided by ``sqrt(alpha)`` so it applies to
    any strongly convex ``phi``; the solver slack is the sum of the two
    certified distance errors.
    """
    if radius is None and cfg.reg.kind == "ball":
        radius = cfg.reg.radius
    if rho is None:
        rho = swap_modulus(cfg, S, swaps) / phi.alpha_l2
    y = np.asarray(y, dtype=float)
    alpha = phi.alpha
    base = prox_point(phi, cfg.objective(S, rho=rho * phi.alpha_l2).composite(), rho_bar, y, tol, rho=rho)
    L = cfg.loss.lipschitz(S, radius)
    out = []
    for i, z in swaps:
        Si = S.replace(i, z)
        Li = float(L[i])
        Lp = float(cfg.loss.lipschitz(Si.take([i]), radius)[0])
        r = prox_point(phi, cfg.objective(Si, rho=rho * phi.alpha_l2).composite(), rho_bar, y, tol, rho=rho)
        measured = _sqrt_dsym(phi, base.prox_point, r.prox_point)
        bound = bd.stability_bound(Li, Lp, rho, rho_bar, S.m) / math.sqrt(alpha)
        slack = base.certificate.distance(alpha) + r.certificate.distance(alpha)
        if not isinstance(phi, Euclidean):
            # sqrt(Dsym) is Lipschitz in the distance with the local gradient modulus
            slack *= math.sqrt(max(1.0, _grad_modulus(phi, base.prox_point)))
        out.append(SwapResult(i, measured, bound, slack, measured <= bound + slack))
    return out


def _grad_modulus(phi, y):
    return float(np.linalg.eigvalsh(phi.hess_matrix(y))[-1]) if phi.twice_differentiable else 1.0


def stability_report(cfg, phi, rho_bar, y, S, swaps, tol=DEFAULT_TOL, rho=None, config=None):
    res = stability_check(cfg, phi, rho_bar, y, S, swaps, tol, rho)
    rep = ExperimentReport("stability", config or {}, hard=True)
    for t, r in enumerate(res):
        rep.add(t, S.m, S.seed, r.measured, r.bound, r.slack, r.passed)
    rep.summary.update(swaps=len(res), max_ratio=max(r.measured / r.bound for r in res) if res else 0.0)
    return rep


# ---------------------------------------------------------------------------
# graphical closeness


def attouch_check(g, h, phi, rho_bar, probe_points, u, l, tol=DEFAULT_TOL, rho=None):
    """Worst-case prox discrepancy of two objectives with ``l <= h - g <= u``.

    Returns a dict with ``max_dsym``, ``max_grad_dev``, the analytic
    ``bound_report`` (see :func:`moreaulab.bounds.attouch_bounds`), the
    solver slacks and the two pass flags.
    """
    G, H = as_composite(g), as_composite(h)
    if rho is None:
        rho = max(G.rho_e, H.rho_e) / phi.alpha_l2
    alpha = phi.alpha
    bounds = bd.attouch_bounds(u, l, rho, rho_bar, alpha)
    pts = np.atleast_2d(np.asarray(probe_points, dtype=float))
    if pts.shape[1] != G.d:
        pts = pts.reshape(-1, G.d)
    max_dsym = max_grad = 0.0
    slack_dsym = slack_grad = 0.0
    for x in pts:
        a = prox_point(phi, G, rho_bar, x, tol, rho=rho)
        b = prox_point(phi, H, rho_bar, x, tol, rho=rho)
        e = a.certificate.distance(alpha) + b.certificate.distance(alpha)
        dist = float(np.linalg.norm(a.prox_point - b.prox_point))
        if isinstance(phi, Euclidean):
            dsym = dist * dist
            ds_slack = (2.0 * dist + e) * e
        else:
            dsym = float(np.dot(phi.grad(a.prox_point) - phi.grad(b.prox_point), a.prox_point - b.prox_point))
            ds_slack = (2.0 * dist + e) * e * max(1.0, _grad_modulus(phi, a.prox_point))
        gdev = rho_bar * dist if isinstance(phi, Euclidean) else rho_bar * float(
            np.linalg.norm(phi.hess_apply(x, a.prox_point - b.prox_point))
        )
        gslack = rho_bar * e * (1.0 if isinstance(phi, Euclidean) else _grad_modulus(phi, x))
        if dsym > max_dsym:
            max_dsym, slack_dsym = dsym, ds_slack
        if gdev > max_grad:
            max_grad, slack_grad = gdev, gslack
    return {
        "max_dsym": max_dsym,
        "max_grad_dev": max_grad,
        "bound_report": bounds,
        "slack_dsym": slack_dsym,
        "slack_grad": slack_grad,
        "dsym_pass": max_dsym <= bounds["dsym"] + slack_dsym,
        "grad_pass": max_grad <= bounds["grad"] + slack_grad,
        "tightness": max_dsym / bounds["dsym"] if bounds["dsym"] > 0 else math.inf,
        "rho": rho,
    }


def _grid(region, n):
    """``(n + 1)^d`` lattice on the bounding box of ``region``; nested when ``n`` doubles."""
    ticks = np.linspace(-region.B, region.B, int(n) + 1)
    d = region.d
    return np.stack(np.meshgrid(*([ticks] * d), indexing="ij"), axis=-1).reshape(-1, d) + region.c


def _graph(obj, centers, rho_bar, tol):
    comp = as_composite(obj)
    phi = Euclidean(comp.d)
    Y = np.empty_like(centers)
    V = np.empty_like(centers)
    err = 0.0
    for k, x in enumerate(centers):
        r = prox_point(phi, comp, rho_bar, x, tol)
        Y[k] = r.prox_point
        V[k] = rho_bar * (x - r.prox_point)
        err = max(err, r.certificate.distance(1.0))
    return Y, V, err


def _one_sided(Ya, Va, Yb, Vb, rho_bar):
    worst = 0.0
    for y, v in zip(Ya, Va):
        dist = np.maximum(np.linalg.norm(Yb - y, axis=1), np.linalg.norm(Vb - v, axis=1) / rho_bar)
        worst = max(worst, float(dist.min()))
    return worst


def graph_hausdorff(objA, objB, region, rho_bar, grid_n, tol=DEFAULT_TOL, anchor_n=16):
    """Two-sided sup-inf distance between the subdifferential graphs of two objectives.

    Graph points ``(prox(x), rho_bar (x - prox(x)))`` are generated from
    prox centers on a lattice over the region's bounding box.  The sup runs
    over a fixed anchor lattice with ``anchor_n`` intervals per axis and the
    inf over a target lattice with ``grid_n`` intervals; target lattices are
    nested as ``grid_n`` doubles, so the estimate can only decrease.  The
    metric is ``max(||dx||, ||dv|| / rho_bar)``.

    Returns
    -------
    dict
        ``estimate``, ``resolution`` (the target lattice spacing) and
        ``solver_slack``.
    """
    if region.norm not in ("box", "l2"):
        raise InvalidParams("graph sampling uses box or l2 regions")
    anchors = _grid(region, anchor_n)
    targets = _grid(region, grid_n)
    Ya, Va, ea = _graph(objA, anchors, rho_bar, tol)
    Yb, Vb, eb = _graph(objB, anchors, rho_bar, tol)
    Ta, Ua, fa = _graph(objA, targets, rho_bar, tol)
    Tb, Ub, fb = _graph(objB, targets, rho_bar, tol)
    est = max(_one_sided(Ya, Va, Tb, Ub, rho_bar), _one_sided(Yb, Vb, Ta, Ua, rho_bar))
    slack = 2.0 * max(ea, eb, fa, fb)
    return {"estimate": est, "resolution": 2.0 * region.B / grid_n, "solver_slack": slack}


# ---------------------------------------------------------------------------
# McDiarmid


@dataclass(frozen=True)
class McDiarmidResult:
    """Empirical upper tails of ``g(S) - mean g`` against ``exp(-m psi*(t/m))``."""

    grid: np.ndarray
    frequencies: np.ndarray
    bounds: np.ndarray
    passed: np.ndarray
    values: np.ndarray
    lmax: float
    slack: float
    m: int

    def empirical_tail(self, t):
        dev = self.values - self.values.mean()
        return float(np.mean(dev >= max(t - self.slack, 0.0)))

    def bound_tail(self, t):
        model = bd.TailModel("bounded", Lmax=self.lmax)
        return bd.mcdiarmid_tail(lambda s: bd.psi_star(model, s), self.m, max(t, 0.0))

    @property
    def ok(self):
        return bool(np.all(self.passed))


def prox_distance_statistic(cfg, phi, rho_bar, y, m, trials, tol=DEFAULT_TOL, root_seed=0, rho=None, target=None):
    """``g(S) = ||A(y, S) - A*(y)||`` for ``trials`` independent samples, plus the largest solver error."""
    from .seeding import trial_seed

    y = np.asarray(y, dtype=float)
    alpha = phi.alpha
    if target is None:
        pop = prox_point(phi, cfg.population().composite(), rho_bar, y, tol, rho=rho)
        target, e0 = pop.prox_point, pop.certificate.distance(alpha)
    else:
        e0 = 0.0
    vals = np.empty(trials)
    err = 0.0
    for t in range(trials):
        S = cfg.sample(m, trial_seed(root_seed, t, m))
        r = prox_point(phi, cfg.objective(S).composite(), rho_bar, y, tol, rho=rho)
        vals[t] = np.linalg.norm(r.prox_point - target)
        err = max(err, r.certificate.distance(alpha))
    return vals, err + e0


def mcdiarmid_experiment(cfg, phi, rho_bar, y, m, trials, lmax_z, rho, tol=DEFAULT_TOL, root_seed=0, n_grid=25):
    """Empirical exceedance frequencies of ``g(S) - E g`` versus the McDiarmid bound.

    ``lmax_z`` bounds the per-sample Lipschitz constant on the constraint
    set.  A swap moves ``g`` by at most ``omega = 2 lmax_z / (sqrt(alpha)
    (rho_bar - rho) m)``, and the bounded tail model with ``Lmax =
    m omega / 2`` reproduces McDiarmid's ``exp(-2 t^2 / (m omega^2))`` through
    ``exp(-m psi*(t/m))``.  Each grid point passes when the empirical
    frequency is at most the bound plus three binomial standard errors.
    Solver error enters as a shift of ``t``.
    """
    vals, err = prox_distance_statistic(cfg, phi, rho_bar, y, m, trials, tol, root_seed, rho)
    omega = 2.0 * lmax_z / (math.sqrt(phi.alpha) * (rho_bar - rho) * m)
    lmax = m * omega / 2.0
    model = bd.TailModel("bounded", Lmax=lmax)
    dev = vals - vals.mean()
    top = max(float(dev.max()), 3.0 * math.sqrt(m) * omega)
    grid = np.linspace(0.0, top, n_grid)
    slack = 2.0 * err
    freq = np.array([np.mean(dev >= max(t - slack, 0.0)) for t in grid])
    bnd = np.array([bd.mcdiarmid_tail(lambda s: bd.psi_star(model, s), m, t) for t in grid])
    se = np.sqrt(bnd * (1.0 - bnd) / trials)
    passed = freq <= bnd + 3.0 * se + 1e-15
    return McDiarmidResult(grid, freq, bnd, passed, vals, lmax, slack, int(m))
