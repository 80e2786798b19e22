"""Command-line entry point: ``moreaulab run|plot|bounds``.

Exit codes: 0 success, 1 hard inequality violated, 2 configuration or
schema error, 3 solver failure.
"""

import argparse
import dataclasses
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import bounds as bd
from .composite import Composite, SineRipple
from .config import load_config, parse_real
from .errors import ConfigError, InvalidParams, MoreauLabError, SchemaError
from .experiments import checks, deviation, landscape
from .experiments.pool import resolve_threads
from .experiments.rademacher import rademacher_estimate
from .experiments.report import ExperimentReport, read_rows
from .experiments.seeding import derive_seed
from .experiments.setup import DEFAULT_MEGA, LossConfig
from .plotting import render_svg, series

EXIT_OK, EXIT_VIOLATION, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3


def _loss_config(cfg, mega=None):
    return LossConfig(cfg.loss_kind, cfg.d, dict(cfg.loss_params), cfg.regularizer, mega or DEFAULT_MEGA)


def _first_m(cfg, default):
    return cfg.m[0] if cfg.m else default


def run_stability(cfg, threads):
    o = cfg.options
    lc = _loss_config(cfg, 4096)
    phi = cfg.phi()
    m = _first_m(cfg, 20)
    S = lc.sample(m, derive_seed(cfg.seed, "sample"))
    swaps = checks.random_swaps(lc, S, o.get("swaps", 50), derive_seed(cfg.seed, "swaps"))
    rho = checks.swap_modulus(lc, S, swaps) / phi.alpha_l2
    rho_bar = cfg.rho_bar_for(rho)
    y = np.asarray(o.get("center", [0.1] * cfg.d), dtype=float)
    rep = checks.stability_report(lc, phi, rho_bar, y, S, swaps, cfg.tol, rho)
    rep.config = cfg.raw
    rep.summary.update(rho=rho, rho_bar=rho_bar)
    return rep


def run_attouch(cfg, threads):
    o = cfg.options
    delta = o.get("delta", 1e-2)
    n = o.get("probes", 1000)
    span = o.get("probe_range", 1.0)
    phi = cfg.phi()
    if cfg.d != 1:
        raise ConfigError("the attouch experiment uses the one-dimensional ripple; set loss.d = 1")
    g, h = Composite(1), Composite(1, smooth=[SineRipple(delta)])
    rho = 1.0
    rho_bar = cfg.rho_bar_for(rho)
    res = checks.attouch_check(g, h, phi, rho_bar, np.linspace(-span, span, n), delta, -delta, cfg.tol, rho)
    rep = ExperimentReport("attouch", cfg.raw, hard=True)
    b = res["bound_report"]
    rep.add(0, n, cfg.seed, res["max_dsym"], b["dsym"], res["slack_dsym"], res["dsym_pass"])
    rep.add(1, n, cfg.seed, res["max_grad_dev"], b["grad"], res["slack_grad"], res["grad_pass"])
    rep.summary.update(tightness=res["tightness"], delta=delta, rho_bar=rho_bar)
    return rep


def _glm_config(cfg):
    if cfg.loss_kind != "glm":
        raise ConfigError("rate experiments use the glm loss")
    if not len(set(cfg.m)) >= 2:
        raise ConfigError("rate experiments need at least two m values")
    return _loss_config(cfg, cfg.options.get("mega"))


def run_envelope_rate(cfg, threads):
    o = cfg.options
    lc = _glm_config(cfg)
    rho = o.get("rho", 1.0)
    rep = deviation.envelope_rate_experiment(
        lc, cfg.phi(), list(cfg.m), cfg.trials, o.get("B", 0.01), rho_nominal=rho, rho_bar=cfg.rho_bar_for(rho),
        gamma=o.get("gamma", 0.05), tol=cfg.tol, root_seed=cfg.seed, threads=threads, c=o.get("c", 1.0),
    )
    rep.config = cfg.raw
    return rep


def run_functional_rate(cfg, threads):
    o = cfg.options
    lc = _glm_config(cfg)
    rep = deviation.functional_rate_experiment(
        lc, list(cfg.m), cfg.trials, o.get("B", 0.01), rho_nominal=o.get("rho", 1.0), gamma=o.get("gamma", 0.05),
        root_seed=cfg.seed, c=o.get("c", 1.0),
    )
    rep.config = cfg.raw
    return rep


def run_robust_landscape(cfg, threads):
    o = cfg.options
    if cfg.loss_kind != "robust":
        raise ConfigError("robust_landscape uses the robust loss")
    lc = _loss_config(cfg, 2)
    m = _first_m(cfg, 10**4)
    rho_bar = cfg.rho_bar if cfg.rho_bar is not None else 1.0
    runs, consts = landscape.robust_landscape(
        lc, m, o.get("n_inits", 50), cfg.tol, rho_bar, o.get("a", 2.0), o.get("gamma", 0.05),
        seed=cfg.seed, max_outer=o.get("max_outer", 500),
    )
    return landscape.landscape_report(runs, consts, m, cfg.seed, cfg.raw)


def run_rademacher(cfg, threads):
    o = cfg.options
    m = _first_m(cfg, 20)
    rep = ExperimentReport("rademacher", cfg.raw, hard=True)
    rng = np.random.default_rng(derive_seed(cfg.seed, "sets"))
    for t in range(o.get("n_sets", 50)):
        S = rng.standard_normal((m, o.get("dim", cfg.d)))
        est = rademacher_estimate("linear", S, o.get("n_eps", 2000), derive_seed(cfg.seed, "eps", t))
        rep.add(t, m, cfg.seed, est["estimate"], bd.rademacher_linear_bound(S), 3.0 * est["std_err"])
    return rep


def run_mcdiarmid(cfg, threads):
    o = cfg.options
    lc = _loss_config(cfg, o.get("mega", 2**14))
    phi = cfg.phi()
    if cfg.regularizer.kind != "ball":
        raise ConfigError("mcdiarmid needs a ball regularizer so the losses are Lipschitz")
    m = _first_m(cfg, 50)
    R = cfg.regularizer.radius
    lmax_z = o.get("lmax_z")
    if lmax_z is None:
        lmax_z = float(np.max(lc.loss.lipschitz(lc.population_data(), R)))
    rho = o.get("rho", 2.0 * cfg.d)
    rho_bar = cfg.rho_bar_for(rho)
    y = np.asarray(o.get("center", [0.1] * cfg.d), dtype=float)
    res = checks.mcdiarmid_experiment(
        lc, phi, rho_bar, y, m, cfg.trials, lmax_z, rho, cfg.tol, cfg.seed, o.get("grid", 25)
    )
    rep = ExperimentReport("mcdiarmid", cfg.raw, hard=True)
    se = np.sqrt(res.bounds * (1.0 - res.bounds) / cfg.trials)
    for i, (f, b, s, p) in enumerate(zip(res.frequencies, res.bounds, se, res.passed)):
        rep.add(i, m, cfg.seed, f, b, 3.0 * s, bool(p))
    rep.summary.update(lmax=res.lmax, solver_slack=res.slack, rho=rho, rho_bar=rho_bar)
    return rep


RUNNERS = {
    "stability": run_stability,
    "attouch": run_attouch,
    "envelope_rate": run_envelope_rate,
    "functional_rate": run_functional_rate,
    "robust_landscape": run_robust_landscape,
    "rademacher": run_rademacher,
    "mcdiarmid": run_mcdiarmid,
}


def _out_dir(cfg, config_path):
    p = Path(cfg.output_dir)
    return p if p.is_absolute() else (Path(config_path).resolve().parent / p).resolve()


def cmd_run(args):
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=int(args.seed))
    threads = resolve_threads(args.threads)
    try:
        rep = RUNNERS[cfg.experiment](cfg, threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MoreauLabError as exc:
        print(f"solver failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    rep.summary["config"] = cfg.echo()
    rep.summary["seed"] = cfg.seed
    out = _out_dir(cfg, args.config)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.csv").write_text(rep.to_csv())
    (out / "summary.csv").write_text(rep.summary_csv())
    if cfg.plot:
        try:
            svg, _ = render_svg(series(rep.rows), f"{rep.experiment}: median measured vs m")
            (out / "report.svg").write_text(svg)
        except (SchemaError, InvalidParams) as exc:
            print(f"plot skipped: {exc}", file=sys.stderr)
    print(f"{rep.experiment}: {len(rep.rows)} rows, {len(rep.failures)} failed, written to {out}")
    if not rep.ok:
        for r in rep.failures:
            print("violation: " + ",".join(r.cells()), file=sys.stderr)
        return EXIT_VIOLATION
    return EXIT_OK


def cmd_plot(args):
    src = Path(args.inp)
    if not src.is_file():
        print(f"report not found: {src}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        rows = read_rows(src.read_text())
        if not rows:
            raise SchemaError("report has no rows")
        svg, fit = render_svg(series(rows))
    except (SchemaError, InvalidParams) as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    Path(args.out).write_text(svg)
    print(f"slope {fit.slope:.3f}, r^2 {fit.r_squared:.3f}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# bounds


def _num(v, where):
    if isinstance(v, int) and not isinstance(v, bool):
        return v
    return parse_real(v, where)


def _bound_reports(entry):
    if not isinstance(entry, dict) or "name" not in entry:
        raise ConfigError("each bound needs a name and params")
    name = entry["name"]
    raw = entry.get("params", {})
    if not isinstance(raw, dict):
        raise ConfigError(f"{name}: params must be an object")
    p = {k: _num(v, f"{name}.{k}") for k, v in raw.items()}
    try:
        if name == "attouch":
            return [bd.BoundReport(f"attouch.{k}", v, p) for k, v in sorted(bd.attouch_bounds(**p).items())]
        if name == "covering_l2":
            return [bd.BoundReport("log_covering_l2", bd.covering_number(bd.L2Ball(p["B"], p["d"]), p["delta"]), p)]
        if name == "covering_l1":
            return [bd.BoundReport("log_covering_l1", bd.covering_number(bd.L1Setup(p["B"], p["d"]), p["delta"]), p)]
        if name == "robust_gaussian":
            from .losses import make_link

            link = make_link(entry.get("link", "identity"))
            out = bd.gaussian_robust_constants(link, **p)
            return [bd.BoundReport(f"robust.{k}", v, p) for k, v in sorted(out.items()) if math.isfinite(v)]
        fn = _BOUND_FNS.get(name)
        if fn is None:
            raise ConfigError(f"unknown bound {name!r}")
        return [bd.BoundReport(name, fn(**p), p)]
    except TypeError as exc:
        raise ConfigError(f"{name}: {exc}") from None


_BOUND_FNS = {
    "stability": bd.stability_bound,
    "expected_prox_error": bd.expected_prox_error_bound,
    "envelope_gap": bd.envelope_gap_bound,
    "stationarity_concentration": bd.stationarity_concentration_bound,
    "envelope_concentration": bd.envelope_concentration_bound,
    "glm_concentration": bd.glm_concentration_bound,
    "glm_envelope": bd.glm_envelope_bound,
    "glm_graph": bd.glm_graph_bound,
    "default_delta": bd.default_delta,
    "gaussian_tau": bd.gaussian_tau,
}


def cmd_bounds(args):
    src = Path(args.spec)
    try:
        if not src.is_file():
            raise ConfigError(f"spec file not found: {src}")
        try:
            doc = json.loads(src.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{src}: invalid JSON ({exc})") from None
        entries = doc.get("bounds", [doc]) if isinstance(doc, dict) else doc
        reports = [r for e in entries for r in _bound_reports(e)]
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MoreauLabError as exc:
        print(f"invalid parameters: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    width = max(len(r.name) for r in reports) if reports else 4
    print(f"{'name':<{width}}  {'rhs':>24}  {'log_rhs':>24}  probability")
    for r in reports:
        print(f"{r.name:<{width}}  {r.rhs!r:>24}  {r.log_rhs!r:>24}  {r.probability!r}")
    return EXIT_OK


def build_parser():
    ap = argparse.ArgumentParser(prog="moreaulab", description="Experiments on prox maps of weakly convex risks.")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run an experiment from a JSON config")
    r.add_argument("--config", required=True)
    r.add_argument("--threads", type=int, default=None)
    r.add_argument("--seed", type=int, default=None)
    p = sub.add_parser("plot", help="log-log plot of a report")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    b = sub.add_parser("bounds", help="evaluate bounds without running experiments")
    b.add_argument("--spec", required=True)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    return {"run": cmd_run, "plot": cmd_plot, "bounds": cmd_bounds}[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
