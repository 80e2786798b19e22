"""Uniform deviations between empirical and population prox maps and risks."""

import math
from dataclasses import dataclass

import numpy as np

from .. import bounds as bd
from ..errors import MoreauLabError
from ..losses import Dataset
from ..prox import DEFAULT_TOL, prox_point
from .nets import Region, build_net
from .pool import parallel_map
from .report import ExperimentReport, median, rate_fit
from .seeding import trial_seed
from .setup import subgaussian_norm

_POP_PROX = {}


@dataclass(frozen=True)
class TrialDeviation:
    trial: int
    seed: int
    m: int
    sup_dev: float
    sup_grad_dev: float
    slack: float
    error: str = ""


def prox_all(phi, obj, rho_bar, points, tol=DEFAULT_TOL):
    """Prox points and certified distance errors for every row of ``points``."""
    comp = obj.composite() if hasattr(obj, "composite") else obj
    P = np.empty_like(np.asarray(points, dtype=float))
    err = np.empty(len(P))
    for i, y in enumerate(points):
        r = prox_point(phi, comp, rho_bar, y, tol)
        P[i] = r.prox_point
        err[i] = r.certificate.distance(phi.alpha)
    return P, err


def population_prox(cfg, phi, rho_bar, points, tol=DEFAULT_TOL):
    """Population prox on ``points``, memoized per point."""
    key0 = (cfg._key(), repr(phi), float(rho_bar), float(tol))
    todo = [i for i, y in enumerate(points) if key0 + (np.asarray(y).tobytes(),) not in _POP_PROX]
    if todo:
        comp = cfg.population().composite()
        P, err = prox_all(phi, comp, rho_bar, np.asarray(points)[todo], tol)
        for j, i in enumerate(todo):
            _POP_PROX[key0 + (np.asarray(points[i]).tobytes(),)] = (P[j], err[j])
    out = [_POP_PROX[key0 + (np.asarray(y).tobytes(),)] for y in points]
    return np.array([o[0] for o in out]), np.array([o[1] for o in out])


def _trial(args):
    cfg, phi, rho_bar, points, m, t, root, tol, P_pop, e_pop, sampler = args
    seed = trial_seed(root, t, m)
    try:
        data = sampler(m, seed) if sampler is not None else cfg.sample(m, seed)
        obj = cfg.objective(data)
        P, err = prox_all(phi, obj, rho_bar, points, tol)
    except MoreauLabError as exc:
        return TrialDeviation(t, seed, m, math.nan, math.nan, math.nan, f"{type(exc).__name__}: {exc}")
    dev = np.linalg.norm(P - P_pop, axis=1)
    k = int(np.argmax(dev))
    slack = float(err[k] + e_pop[k])
    return TrialDeviation(t, seed, m, float(dev[k]), float(rho_bar * dev[k]), slack)


def sup_prox_deviation(
    cfg, phi, rho_bar, net, m, trials, tol=DEFAULT_TOL, root_seed=0, threads=1, population=None, sampler=None
):
    """Per-trial ``sup_{y in net} ||prox_S(y) - prox_pop(y)||``.

    The gradient deviation ``rho_bar * sup ||...||`` (the envelope-gradient
    gap in the local norm) is reported alongside.

    Parameters
    ----------
    population : Dataset or tuple, optional
        A dataset replacing the mega-sample, or precomputed
        ``(P_pop, err_pop)`` on the net.
    sampler : callable, optional
        ``sampler(m, seed) -> Dataset`` replacing ``cfg.sample``; must be
        picklable when ``threads > 1``.
    """
    pts = np.asarray(net.points if hasattr(net, "points") else net, dtype=float)
    if population is None:
        P_pop, e_pop = population_prox(cfg, phi, rho_bar, pts, tol)
    elif isinstance(population, Dataset):
        P_pop, e_pop = prox_all(phi, cfg.objective(population, population=True), rho_bar, pts, tol)
    else:
        P_pop, e_pop = population
    jobs = [(cfg, phi, rho_bar, pts, int(m), t, root_seed, tol, P_pop, e_pop, sampler) for t in range(trials)]
    return parallel_map(_trial, jobs, threads)


def sup_functional_deviation(cfg, points, m, trials, root_seed=0, pop_values=None):
    """Per-trial ``sup_{y in points} |f_S(y) - f(y)|`` (losses only)."""
    pts = np.asarray(points, dtype=float)
    if pop_values is None:
        pop = cfg.population()
        pop_values = np.array([pop.value(y) - pop.reg.value(y) for y in pts])
    out = []
    for t in range(trials):
        seed = trial_seed(root_seed, t, m)
        obj = cfg.objective(cfg.sample(m, seed))
        vals = np.array([obj.value(y) - obj.reg.value(y) for y in pts])
        out.append((t, seed, float(np.max(np.abs(vals - pop_values)))))
    return out


def oracle_noise_floor(cfg, phi, rho_bar, points, tol=DEFAULT_TOL):
    """Half-versus-half sup prox deviation of the mega-sample: ``(sup_dev, slack)``."""
    a, b = cfg.population_data().split()
    Pa, ea = prox_all(phi, cfg.objective(a), rho_bar, points, tol)
    Pb, eb = prox_all(phi, cfg.objective(b), rho_bar, points, tol)
    dev = np.linalg.norm(Pa - Pb, axis=1)
    k = int(np.argmax(dev))
    return float(dev[k]), float(ea[k] + eb[k])


def functional_noise_floor(cfg, points):
    a, b = cfg.population_data().split()
    oa, ob = cfg.objective(a), cfg.objective(b)
    return float(max(abs((oa.value(y) - oa.reg.value(y)) - (ob.value(y) - ob.reg.value(y))) for y in points))


# ---------------------------------------------------------------------------
# rate experiments


def lipschitz_tail(cfg, radius=None, c=1.0):
    """Sub-Gaussian tail model of ``L(z)`` estimated on the mega-sample."""
    L = cfg.loss.lipschitz(cfg.population_data(), radius)
    sigma = float(np.sqrt(np.mean(L * L)))
    nu = subgaussian_norm(L - L.mean())
    return bd.TailModel("subgaussian", sigma=sigma, nu=nu, c=c)


def envelope_rate_experiment(
    cfg, phi, ms, trials, B, rho_nominal=1.0, rho_bar=None, gamma=0.05, tol=DEFAULT_TOL, root_seed=0, threads=1, c=1.0,
    center=None,
):
    """Median sup envelope-gradient deviation versus ``m`` on nets with ``delta = sqrt(d/m)/rho``.

    Each row compares ``rho_bar * sup_net ||prox_S - prox_pop||`` against the
    uniform bound with failure probability ``gamma``.
    """
    d = cfg.d
    rho_bar = 2.0 * rho_nominal if rho_bar is None else float(rho_bar)
    region = Region(B, d, "l2", center)
    model = lipschitz_tail(cfg, c=c)
    rho_true = cfg.population().rho_e / phi.alpha_l2
    report = ExperimentReport(
        "envelope_rate",
        {"kind": cfg.kind, "d": d, "ms": list(ms), "trials": trials, "B": B, "rho_bar": rho_bar, "M": cfg.mega, "c": c},
        hard=False,
        gamma=gamma,
    )
    report.summary["solver_errors"] = 0
    medians = []
    nets = {}
    for m in ms:
        delta = bd.default_delta(rho_nominal, d, m)
        net = build_net(region, phi, delta)
        nets[m] = net
        logN = bd.covering_number(bd.L2Ball(B, d), delta)
        s = math.sqrt(m) * bd.tail_level(model, m, gamma, copies=math.exp(logN))
        bound = rho_bar * bd.stationarity_concentration_bound(phi.alpha, model.sigma, s, rho_true, rho_bar, delta, m)
        res = sup_prox_deviation(cfg, phi, rho_bar, net, m, trials, tol, root_seed, threads)
        devs = []
        for r in res:
            if r.error:
                report.summary["solver_errors"] += 1
                report.summary["last_solver_error"] = r.error
                continue
            report.add(r.trial, m, r.seed, r.sup_grad_dev, bound, rho_bar * r.slack)
            devs.append(r.sup_grad_dev)
        medians.append((m, median(devs)))
        report.summary[f"net_size_m{m}"] = len(net)
    big = nets[max(ms)]
    floor, floor_slack = oracle_noise_floor(cfg, phi, rho_bar, big.points, tol)
    floor *= rho_bar
    fit = rate_fit(medians)
    report.summary.update(
        slope=fit.slope,
        intercept=fit.intercept,
        r_squared=fit.r_squared,
        oracle_noise_floor=floor,
        min_median_over_floor=min(v for _, v in medians) / floor if floor > 0 else math.inf,
        medians=";".join(f"{m}:{v!r}" for m, v in medians),
        sigma=model.sigma,
        nu=model.nu,
        lipschitz_correction=2.0 * rho_bar * rho_bar * bd.default_delta(rho_nominal, d, max(ms)) / (phi.alpha * (rho_bar - rho_true)),
    )
    report.fit = fit
    return report


def functional_rate_experiment(cfg, ms, trials, B, rho_nominal=1.0, gamma=0.05, root_seed=0, c=1.0, center=None, phi=None):
    """Median sup ``|f_S - f|`` over the nets versus ``m``, against the dimension-free bound.

    ``t`` is chosen so ``2 exp(-m psi*(t)) <= gamma`` for the sub-Gaussian
    model of ``Y = |f(x0,z) - f(x0,z')| + B L(z) ||phi(z)|| + B L(z') ||phi(z')||``
    fitted on pairs from the mega-sample.
    """
    from ..bregman import Euclidean

    phi = phi or Euclidean(cfg.d)
    d = cfg.d
    region = Region(B, d, "l2", center)
    pop_data = cfg.population_data()
    x0 = region.c
    # Y on disjoint pairs of the mega-sample
    loss = cfg.loss
    f0 = loss.values(x0, pop_data)
    feat = np.sqrt(np.sum(pop_data["phi"] ** 2, axis=(1, 2)))
    Lz = np.sqrt(loss.K)
    h = pop_data.m // 2
    Y = np.abs(f0[:h] - f0[h : 2 * h]) + B * Lz * feat[:h] + B * Lz * feat[h : 2 * h]
    model = bd.TailModel("subgaussian", sigma=float(np.sqrt(np.mean(Y * Y))), nu=subgaussian_norm(Y - Y.mean()), c=c)
    moment = float(np.max(np.mean(Lz**2 * np.sum(pop_data["phi"] ** 2, axis=2), axis=0)))
    report = ExperimentReport(
        "functional_rate",
        {"kind": cfg.kind, "d": d, "ms": list(ms), "trials": trials, "B": B, "M": cfg.mega, "c": c},
        hard=False,
        gamma=gamma,
    )
    medians = []
    pop = cfg.population()
    floor_pts = None
    for m in ms:
        net = build_net(region, phi, bd.default_delta(rho_nominal, d, m))
        floor_pts = net.points
        pop_values = np.array([pop.value(y) - pop.reg.value(y) for y in net.points])
        t = bd.tail_level(model, m, gamma, copies=2.0)
        bound = bd.glm_concentration_bound(B, loss.K, moment, m, t)
        devs = []
        for trial, seed, dev in sup_functional_deviation(cfg, net.points, m, trials, root_seed, pop_values):
            report.add(trial, m, seed, dev, bound)
            devs.append(dev)
        medians.append((m, median(devs)))
    floor = functional_noise_floor(cfg, floor_pts)
    fit = rate_fit(medians)
    report.summary.update(
        slope=fit.slope,
        intercept=fit.intercept,
        r_squared=fit.r_squared,
        oracle_noise_floor=floor,
        min_median_over_floor=min(v for _, v in medians) / floor if floor > 0 else math.inf,
        medians=";".join(f"{m}:{v!r}" for m, v in medians),
        moment=moment,
        Y_sigma=model.sigma,
        Y_nu=model.nu,
    )
    report.fit = fit
    return report
