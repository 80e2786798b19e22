"""JSON run configurations.

Every real-valued field is written as a decimal string (``"0.5"``) so
configs diff cleanly; integers stay JSON integers.  Unknown keys are
rejected before anything is computed.
"""

import json
import math
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from pathlib import Path

from .bregman import Euclidean, LpSquared, NormTag, PolyGrowth, l1_setup
from .errors import ConfigError
from .losses import LOSS_KINDS, Regularizer

EXPERIMENTS = (
    "stability",
    "attouch",
    "envelope_rate",
    "functional_rate",
    "robust_landscape",
    "rademacher",
    "mcdiarmid",
)

_TOP = {
    "experiment",
    "loss",
    "phi",
    "regularizer",
    "rho_bar",
    "rho_bar_multiplier",
    "rho_bar_offset",
    "m",
    "trials",
    "seed",
    "delta_rule",
    "tol",
    "output_dir",
    "options",
    "plot",
}

# option name -> kind; "real" options are decimal strings
_OPTIONS = {
    "stability": {"swaps": "int", "center": "reals"},
    "attouch": {"delta": "real", "probes": "int", "probe_range": "real"},
    "envelope_rate": {"B": "real", "mega": "int", "rho": "real", "gamma": "real", "c": "real"},
    "functional_rate": {"B": "real", "mega": "int", "rho": "real", "gamma": "real", "c": "real"},
    "robust_landscape": {"n_inits": "int", "a": "real", "gamma": "real", "max_outer": "int"},
    "rademacher": {"n_sets": "int", "n_eps": "int", "dim": "int"},
    "mcdiarmid": {"center": "reals", "lmax_z": "real", "rho": "real", "mega": "int", "grid": "int"},
}

_LOSS_PARAMS = {
    "noise": "real",
    "xbar_norm": "real",
    "xbar": "reals",
    "design": "str",
    "K": "int",
    "k": "int",
    "d1": "int",
    "p_fail": "real",
    "corruption": "str",
    "scale": "real",
    "x0": "reals",
    "link": "str",
    "link_k": "real",
}


def parse_real(value, where):
    """A decimal string as a float; bare JSON numbers are rejected."""
    if not isinstance(value, str):
        raise ConfigError(f"{where}: real values must be decimal strings, got {value!r}")
    try:
        Decimal(value)
    except InvalidOperation:
        raise ConfigError(f"{where}: {value!r} is not a decimal number") from None
    out = float(value)
    if math.isnan(out):
        raise ConfigError(f"{where}: NaN is not allowed")
    return out


def _parse_int(value, where):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{where}: expected an integer, got {value!r}")
    return value


def _parse(kind, value, where):
    if kind == "real":
        return parse_real(value, where)
    if kind == "reals":
        if not isinstance(value, list):
            raise ConfigError(f"{where}: expected a list of decimal strings")
        return [parse_real(v, f"{where}[{i}]") for i, v in enumerate(value)]
    if kind == "int":
        return _parse_int(value, where)
    if not isinstance(value, str):
        raise ConfigError(f"{where}: expected a string")
    return value


def _reject_unknown(obj, allowed, where):
    if not isinstance(obj, dict):
        raise ConfigError(f"{where}: expected an object")
    extra = sorted(set(obj) - set(allowed))
    if extra:
        raise ConfigError(f"{where}: unknown keys {extra}")


@dataclass(frozen=True)
class RunConfig:
    """A validated run configuration; ``raw`` is the parsed JSON, echoed into reports."""

    experiment: str
    loss_kind: str
    d: int
    loss_params: dict
    phi_spec: dict
    regularizer: Regularizer
    rho_bar: float = None
    rho_bar_multiplier: float = 2.0
    rho_bar_offset: float = 0.0
    m: tuple = ()
    trials: int = 1
    seed: int = 0
    delta_rule: str = "default"
    tol: float = 1e-8
    output_dir: str = "out"
    options: dict = field(default_factory=dict)
    plot: bool = False
    raw: dict = field(default_factory=dict)

    def phi(self):
        return make_phi(self.phi_spec, self.d)

    def rho_bar_for(self, rho):
        """``rho_bar`` if fixed, else ``multiplier * rho + offset``."""
        if self.rho_bar is not None:
            return self.rho_bar
        return self.rho_bar_multiplier * rho + self.rho_bar_offset

    def echo(self):
        return json.dumps(self.raw, sort_keys=True, separators=(",", ":"))


def make_phi(spec, d):
    kind = spec.get("kind", "euclidean")
    if kind == "euclidean":
        return Euclidean(d)
    if kind == "l1":
        return l1_setup(d)
    if kind == "lp":
        return LpSquared(d, spec["p"], spec.get("scale", 1.0), NormTag.L2)
    if kind == "poly":
        return PolyGrowth(d, tuple(spec["coeffs"]))
    raise ConfigError(f"phi: unknown kind {kind!r}")


def _phi_spec(obj):
    if obj is None:
        return {"kind": "euclidean"}
    _reject_unknown(obj, {"kind", "p", "scale", "coeffs"}, "phi")
    out = {"kind": obj.get("kind", "euclidean")}
    if out["kind"] not in ("euclidean", "l1", "lp", "poly"):
        raise ConfigError(f"phi: unknown kind {out['kind']!r}")
    if "p" in obj:
        out["p"] = parse_real(obj["p"], "phi.p")
    if "scale" in obj:
        out["scale"] = parse_real(obj["scale"], "phi.scale")
    if "coeffs" in obj:
        out["coeffs"] = _parse("reals", obj["coeffs"], "phi.coeffs")
    if out["kind"] == "lp" and "p" not in out:
        raise ConfigError("phi: lp needs p")
    if out["kind"] == "poly" and "coeffs" not in out:
        raise ConfigError("phi: poly needs coeffs")
    return out


def _regularizer(obj):
    if obj is None:
        return Regularizer.zero()
    _reject_unknown(obj, {"kind", "weight", "radius"}, "regularizer")
    kind = obj.get("kind", "zero")
    try:
        if kind == "zero":
            return Regularizer.zero()
        if kind == "l1":
            return Regularizer.l1(parse_real(obj["weight"], "regularizer.weight"))
        if kind == "ball":
            return Regularizer.ball(parse_real(obj["radius"], "regularizer.radius"))
    except KeyError as exc:
        raise ConfigError(f"regularizer: missing {exc.args[0]!r}") from None
    raise ConfigError(f"regularizer: unknown kind {kind!r}")


def parse_config(doc):
    """Validate a parsed JSON document into a :class:`RunConfig`."""
    _reject_unknown(doc, _TOP, "config")
    exp = doc.get("experiment")
    if exp not in EXPERIMENTS:
        raise ConfigError(f"experiment must be one of {list(EXPERIMENTS)}, got {exp!r}")
    loss = doc.get("loss", {})
    _reject_unknown(loss, {"kind", "d", "params"}, "loss")
    kind = loss.get("kind", "phase")
    if kind not in LOSS_KINDS:
        raise ConfigError(f"loss.kind must be one of {list(LOSS_KINDS)}")
    d = _parse_int(loss.get("d", 2), "loss.d")
    if d < 1:
        raise ConfigError("loss.d must be positive")
    params = loss.get("params", {})
    _reject_unknown(params, _LOSS_PARAMS, "loss.params")
    lp = {k: _parse(_LOSS_PARAMS[k], v, f"loss.params.{k}") for k, v in params.items()}
    opts = doc.get("options", {})
    _reject_unknown(opts, _OPTIONS[exp], "options")
    options = {k: _parse(_OPTIONS[exp][k], v, f"options.{k}") for k, v in opts.items()}
    ms = doc.get("m", [])
    if not isinstance(ms, list) or not all(isinstance(v, int) and not isinstance(v, bool) and v >= 1 for v in ms):
        raise ConfigError("m must be a list of positive integers")
    trials = _parse_int(doc.get("trials", 1), "trials")
    if trials < 1:
        raise ConfigError("trials must be positive")
    rule = doc.get("delta_rule", "default")
    if rule != "default":
        raise ConfigError("delta_rule supports only 'default' (sqrt(d/m)/rho)")
    plot = doc.get("plot", False)
    if not isinstance(plot, bool):
        raise ConfigError("plot must be true or false")
    cfg = RunConfig(
        experiment=exp,
        loss_kind=kind,
        d=d,
        loss_params=lp,
        phi_spec=_phi_spec(doc.get("phi")),
        regularizer=_regularizer(doc.get("regularizer")),
        rho_bar=parse_real(doc["rho_bar"], "rho_bar") if "rho_bar" in doc else None,
        rho_bar_multiplier=parse_real(doc.get("rho_bar_multiplier", "2"), "rho_bar_multiplier"),
        rho_bar_offset=parse_real(doc.get("rho_bar_offset", "0"), "rho_bar_offset"),
        m=tuple(ms),
        trials=trials,
        seed=_parse_int(doc.get("seed", 0), "seed"),
        delta_rule=rule,
        tol=parse_real(doc.get("tol", "1e-8"), "tol"),
        output_dir=_parse("str", doc.get("output_dir", "out"), "output_dir"),
        options=options,
        plot=plot,
        raw=doc,
    )
    if not cfg.tol > 0:
        raise ConfigError("tol must be positive")
    return cfg


def load_config(path):
    """Read and validate a config file.

    Raises
    ------
    ConfigError
        If the file is missing, is not JSON, or fails validation.
    """
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    try:
        doc = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}: invalid JSON ({exc})") from None
    return parse_config(doc)
