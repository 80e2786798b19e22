"""Closed-form right-hand sides of the stability, concentration and graph bounds.

Every calculator is a pure function of its arguments.  Unnamed absolute
constants are explicit keyword arguments (``c`` for sub-Gaussian and
sub-exponential tails, ``kappa`` for the Gaussian norm helper) defaulting
to 1.  Covering numbers are handled in log form.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CorruptionTooHigh, InvalidLink, InvalidParams, NotStronglyConvex

__all__ = [
    "BoundReport",
    "TailModel",
    "L2Ball",
    "L1Setup",
    "stability_bound",
    "expected_prox_error_bound",
    "envelope_gap_bound",
    "divergence_to_distance",
    "psi_star",
    "mcdiarmid_tail",
    "covering_number",
    "default_delta",
    "stationarity_concentration_bound",
    "failure_probability",
    "envelope_concentration_bound",
    "attouch_bounds",
    "glm_concentration_bound",
    "glm_envelope_bound",
    "glm_graph_bound",
    "robust_regression_constants",
    "gaussian_robust_constants",
    "gaussian_tau",
    "rademacher_linear_bound",
    "tail_level",
]


@dataclass(frozen=True)
class BoundReport:
    name: str
    rhs: float
    params: dict = field(default_factory=dict)
    probability: float = 1.0
    log_rhs: float = None

    def __post_init__(self):
        if self.rhs < 0:
            raise InvalidParams(f"{self.name}: negative right-hand side")
        if not 0.0 <= self.probability <= 1.0:
            raise InvalidParams(f"{self.name}: probability outside [0, 1]")
        if self.log_rhs is None:
            object.__setattr__(self, "log_rhs", math.log(self.rhs) if self.rhs > 0 else -math.inf)


def _margin(rho, rho_bar):
    if not rho_bar > rho:
        raise NotStronglyConvex(f"rho_bar = {rho_bar} must exceed rho = {rho}")
    return rho_bar - rho


def _nonneg(**kw):
    for k, v in kw.items():
        if v < 0:
            raise InvalidParams(f"{k} must be nonnegative, got {v}")


def _pos_m(m):
    if m < 1:
        raise InvalidParams(f"m must be at least 1, got {m}")


# ---------------------------------------------------------------------------
# regularized ERM


def stability_bound(L_i, L_i_prime, rho, rho_bar, m):
    """``(L(z_i) + L(z_i')) / ((rho_bar - rho) m)``, a bound on ``sqrt(Dsym)`` after one swap."""
    _pos_m(m)
    _nonneg(L_i=L_i, L_i_prime=L_i_prime)
    return (L_i + L_i_prime) / (_margin(rho, rho_bar) * m)


def expected_prox_error_bound(sigma, rho, rho_bar, m):
    """``2 sigma^2 / ((rho_bar - rho)^2 m)``, bound on ``E D(A(S), A*)``."""
    _pos_m(m)
    _nonneg(sigma=sigma)
    return 2.0 * sigma**2 / (_margin(rho, rho_bar) ** 2 * m)


def envelope_gap_bound(sigma, rho, rho_bar, m):
    """``2 sigma^2 / ((rho_bar - rho) m)``, bound on the expected envelope gap."""
    _pos_m(m)
    _nonneg(sigma=sigma)
    return 2.0 * sigma**2 / (_margin(rho, rho_bar) * m)


def divergence_to_distance(bound, alpha):
    """Distance bound ``sqrt(2 bound / alpha)`` implied by ``D <= bound`` and strong convexity."""
    return math.sqrt(2.0 * bound / alpha)


# ---------------------------------------------------------------------------
# tails


@dataclass(frozen=True)
class TailModel:
    """Tail model for the symmetrized Lipschitz constant ``eps * L``.

    ``kind`` is ``"subgaussian"``, ``"subexponential"`` or ``"bounded"``.
    ``nu`` is the sub-Gaussian (or sub-exponential) norm of ``L - E L``,
    ``sigma = sqrt(E L^2)``, ``Lmax`` the almost-sure bound and ``c`` the
    unnamed absolute constant.
    """

    kind: str
    sigma: float = 0.0
    nu: float = 0.0
    Lmax: float = 0.0
    c: float = 1.0

    def __post_init__(self):
        if self.kind not in ("subgaussian", "subexponential", "bounded"):
            raise InvalidParams(f"unknown tail model {self.kind!r}")
        _nonneg(sigma=self.sigma, nu=self.nu, Lmax=self.Lmax)
        if not self.c > 0:
            raise InvalidParams("c must be positive")
        if self.kind == "bounded" and self.sigma > self.Lmax * (1 + 1e-12):
            raise InvalidParams("a bounded model needs sigma <= Lmax")

    @property
    def eta(self):
        return self.c * (self.nu + self.sigma)


def psi_star(model, t):
    """Lower bound on the conjugate log-MGF of ``eps * L`` at ``t >= 0``.

    * sub-Gaussian: ``t^2 / (c (nu + sigma)^2)``;
    * sub-exponential: ``min(t^2 / (4 eta^2), t / (2 eta))``, ``eta = c (nu + sigma)``;
    * bounded: ``t^2 / (2 Lmax^2)`` (Hoeffding's lemma for ``|eps L| <= Lmax``).
    """
    if t < 0:
        raise InvalidParams("psi_star is evaluated at t >= 0")
    if t == 0:
        return 0.0
    if model.kind == "subgaussian":
        s = model.nu + model.sigma
        return math.inf if s == 0 else t * t / (model.c * s * s)
    if model.kind == "subexponential":
        eta = model.eta
        return math.inf if eta == 0 else min(t * t / (4 * eta * eta), t / (2 * eta))
    L = model.Lmax
    return math.inf if L == 0 else t * t / (2.0 * L * L)


def mcdiarmid_tail(psi_star_fn, m, t):
    """``exp(-m psi*(t/m))``: tail of ``g(S) - E g(S)`` under the bounded-difference property."""
    _pos_m(m)
    if t < 0:
        raise InvalidParams("t must be nonnegative")
    return min(1.0, math.exp(-m * psi_star_fn(t / m)))


def tail_level(model, m, gamma, scale=1.0, copies=1.0):
    """Smallest ``t`` with ``copies * exp(-m psi*(t / scale)) <= gamma``.

    Solved in closed form for the sub-Gaussian and bounded models and by
    bisection otherwise.
    """
    _pos_m(m)
    if not 0 < gamma < 1:
        raise InvalidParams("gamma must lie in (0, 1)")
    level = math.log(copies / gamma) / m
    if level <= 0:
        return 0.0
    lo, hi = 0.0, 1.0
    while psi_star(model, hi / scale) < level:
        hi *= 2.0
        if hi > 1e300:
            raise InvalidParams("degenerate tail model")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if psi_star(model, mid / scale) >= level:
            hi = mid
        else:
            lo = mid
    return hi


# ---------------------------------------------------------------------------
# covering numbers


@dataclass(frozen=True)
class L2Ball:
    B: float
    d: int


@dataclass(frozen=True)
class L1Setup:
    B: float
    d: int


def covering_number(region, delta):
    """``log N(C, Phi, delta)``.

    * ``L2Ball(B, d)``: ``d log(1 + 2B/delta)``;
    * ``L1Setup(B, d)``: ``d ln d * log(1 + 32 B^2 ln d / delta)`` (needs ``B >= 1``).
    """
    if not delta > 0:
        raise InvalidParams("delta must be positive")
    if isinstance(region, L2Ball):
        if region.B < 0 or region.d < 1:
            raise InvalidParams("invalid ball")
        return region.d * math.log1p(2.0 * region.B / delta)
    if isinstance(region, L1Setup):
        if region.B < 1:
            raise InvalidParams("the l1 covering estimate assumes B >= 1")
        if region.d < 2:
            raise InvalidParams("the l1 setup needs d >= 2")
        ld = math.log(region.d)
        return region.d * ld * math.log1p(32.0 * region.B**2 * ld / delta)
    raise InvalidParams(f"unknown region {region!r}")


def default_delta(rho, d, m):
    """``delta = sqrt(d / m) / rho``."""
    _pos_m(m)
    if not rho > 0:
        raise InvalidParams("rho must be positive")
    return math.sqrt(d / m) / rho


# ---------------------------------------------------------------------------
# uniform concentration of the prox map


def stationarity_concentration_bound(alpha, sigma, s, rho, rho_bar, delta, m):
    """``sqrt(4 (sigma + s)^2 / (alpha (rho_bar - rho)^2 m)) + 2 rho_bar delta / (alpha (rho_bar - rho))``."""
    _pos_m(m)
    _nonneg(sigma=sigma, s=s, delta=delta)
    if not alpha > 0:
        raise InvalidParams("alpha must be positive")
    mg = _margin(rho, rho_bar)
    return math.sqrt(4.0 * (sigma + s) ** 2 / (alpha * mg**2 * m)) + 2.0 * rho_bar * delta / (alpha * mg)


def envelope_concentration_bound(alpha, sigma, s, rho, delta, m):
    """Envelope-gradient version at ``rho_bar = 2 rho``: ``sqrt(16 (sigma + s)^2 / (alpha m)) + 8 rho delta / alpha``."""
    _pos_m(m)
    _nonneg(sigma=sigma, s=s, delta=delta, rho=rho)
    return math.sqrt(16.0 * (sigma + s) ** 2 / (alpha * m)) + 8.0 * rho * delta / alpha


def failure_probability(region, delta, s, m, model):
    """``N(C, Phi, delta) exp(-m psi*(s / sqrt(m)))``.

    Returns ``(clamped, log_unclamped)``; the clamped value lies in [0, 1].
    """
    _pos_m(m)
    logp = covering_number(region, delta) - m * psi_star(model, s / math.sqrt(m))
    return (min(1.0, math.exp(min(logp, 0.0))), logp)


# ---------------------------------------------------------------------------
# graphical convergence


def attouch_bounds(u, l, rho, rho_bar, alpha=1.0):
    """Bounds implied by ``l <= h - g <= u``.

    Returns a dict with ``dsym = (u - l)/(rho_bar - rho)``,
    ``grad = rho_bar sqrt((u - l)/(alpha (rho_bar - rho)))`` and
    ``hausdorff = sqrt((u - l)/(rho_bar - rho))``.
    """
    if u < l:
        raise InvalidParams(f"need u >= l, got u = {u}, l = {l}")
    mg = _margin(rho, rho_bar)
    gap = u - l
    return {
        "dsym": gap / mg,
        "grad": rho_bar * math.sqrt(gap / (alpha * mg)),
        "hausdorff": math.sqrt(gap / mg),
    }


def glm_concentration_bound(B, K, moment, m, t):
    """``2 sqrt(2 B^2 K moment / m) + t`` with ``moment = max_k E[L^2 ||phi_k||^2]``."""
    _pos_m(m)
    _nonneg(B=B, K=K, moment=moment, t=t)
    return 2.0 * math.sqrt(2.0 * B * B * K * moment / m) + t


def _glm_width(B, K, moment, m, t):
    # u - l for the shifted risks: twice the functional deviation
    return math.sqrt(32.0 * B * B * K * moment / m) + 2.0 * t


def glm_envelope_bound(B, K, moment, m, t, rho, rho_bar):
    """``rho_bar sqrt((sqrt(32 B^2 K moment / m) + 2t) / (rho_bar - rho))``."""
    _pos_m(m)
    _nonneg(B=B, K=K, moment=moment, t=t)
    mg = _margin(rho, rho_bar)
    return rho_bar * math.sqrt(_glm_width(B, K, moment, m, t) / mg)


def glm_graph_bound(B, K, moment, m, t, rho, rho_bar):
    """``sqrt((sqrt(32 B^2 K moment / m) + 2t) / (rho_bar - rho))``."""
    _pos_m(m)
    mg = _margin(rho, rho_bar)
    return math.sqrt(_glm_width(B, K, moment, m, t) / mg)


# ---------------------------------------------------------------------------
# robust regression


def gaussian_tau(d, m):
    """``tau_m = 4 + d/m + 4 sqrt(d/m)`` for standard Gaussian measurements."""
    _pos_m(m)
    return 4.0 + d / m + 4.0 * math.sqrt(d / m)


def robust_regression_constants(c_sigma, C_sigma, c, C, p_fail, L, tau_m, a, xbar_norm, Ez2, m, t):
    """Constants of the robust-regression landscape dichotomy.

    Returns
    -------
    dict
        ``D``, ``near_opt_radius``, ``large_subgrad``, ``rho``, ``t_max``
        and ``m_min``.

    Raises
    ------
    CorruptionTooHigh
        If ``p_fail >= c_sigma c / (2 C_sigma C)``.
    InvalidLink
        If the link constants are inconsistent.
    """
    if not (0 < c_sigma <= C_sigma) or L < 0:
        raise InvalidLink(f"need 0 < c_sigma <= C_sigma and L >= 0, got {c_sigma}, {C_sigma}, {L}")
    if not (c > 0 and C > 0):
        raise InvalidParams("support constants must be positive")
    if not 0 <= p_fail <= 1:
        raise InvalidParams("p_fail must lie in [0, 1]")
    if not a > 1:
        raise InvalidParams("a must exceed 1")
    _pos_m(m)
    _nonneg(tau_m=tau_m, xbar_norm=xbar_norm, Ez2=Ez2, t=t)
    limit = c_sigma * c / (2.0 * C_sigma * C)
    if not p_fail < limit:
        raise CorruptionTooHigh(f"p_fail = {p_fail} must be below {limit:.6g}")
    D = c_sigma * c - 2.0 * p_fail * C_sigma * C
    rho = max(2.0 * L * C * C, 2.0 * L * tau_m)
    radius = 16.0 / D * (math.sqrt(8.0 * a * a * xbar_norm**2 * C_sigma**2 * Ez2 / m) + t)
    t_max = math.inf if rho == 0 else D * D / (256.0 * rho)
    m_min = 2.0**21 * rho**2 * C_sigma**2 * a * a * xbar_norm**2 * Ez2 / D**4
    return {
        "D": D,
        "near_opt_radius": radius,
        "large_subgrad": 0.5 * D,
        "rho": rho,
        "t_max": t_max,
        "m_min": m_min,
    }


def gaussian_robust_constants(link, d, p_fail, a, xbar_norm, m, t):
    """The Gaussian instantiation: ``c = sqrt(2/pi)``, ``C = 1``, ``E||z||^2 = d``."""
    return robust_regression_constants(
        c_sigma=link.c_sigma,
        C_sigma=link.C_sigma,
        c=math.sqrt(2.0 / math.pi),
        C=1.0,
        p_fail=p_fail,
        L=link.lip_deriv,
        tau_m=gaussian_tau(d, m),
        a=a,
        xbar_norm=xbar_norm,
        Ez2=float(d),
        m=m,
        t=t,
    )


# ---------------------------------------------------------------------------
# Rademacher complexity


def rademacher_linear_bound(samples):
    """``sqrt(sum_i ||z_i||^2) / m`` for the unit-ball linear class."""
    Z = np.asarray(samples, dtype=float)
    if Z.ndim != 2 or Z.shape[0] == 0:
        raise InvalidParams("need a nonempty list of vectors")
    return float(math.sqrt(float(np.sum(Z * Z))) / Z.shape[0])
