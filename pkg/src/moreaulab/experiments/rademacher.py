"""Rademacher complexity of the unit-ball linear class."""

import itertools
import math

import numpy as np

from ..errors import InvalidParams

LINEAR = "linear"


def _sup_linear(E, Z):
    # sup over ||w|| <= 1 of <w, sum_i eps_i z_i> is the norm of the sum
    return np.linalg.norm(E @ Z, axis=1)


def rademacher_estimate(class_cfg, S, n_eps, seed=0):
    """Estimate ``(1/m) E sup_w sum_i eps_i <w, z_i>`` for ``{<w, .> : ||w||_2 <= 1}``.

    Enumerates every sign vector when ``2^m <= n_eps`` (standard error
    zero); otherwise averages ``n_eps`` random sign vectors.

    Returns
    -------
    dict
        ``estimate``, ``std_err``, ``draws`` and ``exact``.
    """
    if class_cfg not in (LINEAR, {"kind": LINEAR}):
        raise InvalidParams("only the unit-ball linear class has an exact inner supremum")
    Z = np.asarray(S, dtype=float)
    if Z.ndim == 1:
        Z = Z[:, None]
    m = Z.shape[0]
    if m == 0:
        raise InvalidParams("the sample is empty")
    if n_eps < 1:
        raise InvalidParams("n_eps must be positive")
    if m < 63 and 2**m <= n_eps:
        E = np.array(list(itertools.product((-1.0, 1.0), repeat=m)))
        vals = _sup_linear(E, Z) / m
        return {"estimate": float(np.mean(vals)), "std_err": 0.0, "draws": len(E), "exact": True}
    rng = np.random.default_rng(seed)
    E = rng.choice((-1.0, 1.0), size=(int(n_eps), m))
    vals = _sup_linear(E, Z) / m
    se = float(np.std(vals, ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else math.inf
    return {"estimate": float(np.mean(vals)), "std_err": se, "draws": int(n_eps), "exact": False}
