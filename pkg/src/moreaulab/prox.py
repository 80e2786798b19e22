"""Certified Bregman proximal points and Moreau envelopes.

The prox subproblem

    minimize_y  F(y) = g(y) + rho_bar * D(y, x)

is solved by a smoothing homotopy.  Each ``|c|`` in ``g`` is replaced by
the shifted Huber function ``h_mu(c) >= |c|``, which overestimates by at most
``mu/2``, and the resulting smooth, strongly convex problem is minimized by
damped Newton steps while ``mu`` shrinks geometrically.  Ball constraints are
handled through a scalar Lagrange multiplier located by bracketing.

Strong convexity of ``F`` relative to ``Phi`` turns a computable
upper bound on ``F(y) - min F`` into the certificate
``D(y, y*) <= gap / (rho_bar - rho)``.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve, LinAlgError
from scipy.optimize import brentq

from .bregman import Euclidean, LpSquared, norm
from .composite import Composite
from .errors import InvalidParams, MaxIterations, NotStronglyConvex, NotTwiceDifferentiable

__all__ = [
    "Certificate",
    "ProxResult",
    "as_composite",
    "relative_modulus",
    "prox_point",
    "envelope_value",
    "envelope_grad",
    "stationarity_measure",
    "graph_point",
]

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 3000


@dataclass(frozen=True)
class Certificate:
    duality_gap: float
    guaranteed_D_phi_error: float

    def distance(self, alpha):
        """Bound on ``||y - y*||`` implied by the certificate, ``sqrt(2 err / alpha)``."""
        return float(np.sqrt(2.0 * max(self.guaranteed_D_phi_error, 0.0) / alpha))


@dataclass(frozen=True)
class ProxResult:
    x: np.ndarray
    prox_point: np.ndarray
    envelope_value: float
    envelope_grad: object
    stationarity: float
    certificate: Certificate
    iterations: int
    rho_bar: float
    rho: float
    phi: object = None


def as_composite(obj):
    if isinstance(obj, Composite):
        return obj
    if hasattr(obj, "composite"):
        return obj.composite()
    raise InvalidParams(f"cannot interpret {type(obj).__name__} as an objective")


def relative_modulus(phi, comp):
    """Weak-convexity modulus of ``comp`` relative to ``phi``."""
    if comp.rho_e == 0.0:
        return 0.0
    if phi.alpha_l2 <= 0.0:
        raise InvalidParams("weak convexity relative to this Legendre function is undefined")
    return comp.rho_e / phi.alpha_l2


def _huber(c, mu):
    a = np.abs(c)
    inside = a < mu
    val = np.where(inside, c * c / (2.0 * mu) + 0.5 * mu, a)
    d1 = np.clip(c / mu, -1.0, 1.0)
    return val, d1, inside


def _newton_metric(phi, y):
    if phi.twice_differentiable:
        return phi.hess_matrix(y)
    if isinstance(phi, LpSquared):
        # Hessian of the lp-squared function away from coordinate hyperplanes,
        # used only as a preconditioner; the line search keeps steps safe
        p = phi.p
        a = np.maximum(np.abs(y), 1e-12 * max(1.0, np.max(np.abs(y))))
        N = float(a.max() * np.sum((a / a.max()) ** p) ** (1.0 / p))
        u = np.sign(y) * (a / N) ** (p - 1.0)
        H = (p - 1.0) * np.diag((a / N) ** (p - 2.0)) + (2.0 - p) * np.outer(u, u)
        H *= phi.scale / (p - 1.0)
        return H + 1e-12 * np.eye(phi.d)
    raise NotTwiceDifferentiable(f"no Newton metric for {type(phi).__name__}")


class _Problem:
    """Smoothed subproblem state for one prox call."""

    def __init__(self, phi, comp, rho_bar, x):
        self.phi = phi
        self.comp = comp
        self.rho_bar = float(rho_bar)
        self.x = x
        self.gx = phi.grad(x)
        self.phix = phi.value(x)

    def div(self, y):
        return self.phi.value(y) - self.phix - float(self.gx @ (y - self.x))

    def true_value(self, y):
        return self.comp.value(y, enforce_domain=False) + self.rho_bar * self.div(y)

    def evaluate(self, y, mu, lam, order=2):
        comp = self.comp
        F = self.rho_bar * self.div(y) + 0.5 * lam * float(y @ y)
        g = self.rho_bar * (self.phi.grad(y) - self.gx) + lam * y
        H = None
        if order >= 2:
            H = self.rho_bar * _newton_metric(self.phi, y) + lam * np.eye(comp.d)
        for blk in comp.blocks:
            c = blk.residual(y)
            val, d1, inside = _huber(c, mu)
            w = blk.weights
            F += float(w @ val)
            s = w * d1
            g += blk.jvp_t(y, s)
            if order >= 2:
                rows = np.flatnonzero(inside)
                if rows.size:
                    J = blk.jacobian(y, rows)
                    H += (J.T * (w[rows] / mu)) @ J
                C = blk.curvature(y, s)
                if C is not None:
                    H += C
        for sm in comp.smooth:
            F += sm.value(y)
            g += sm.grad(y)
            if order >= 2:
                H += sm.hess(y)
        return F, g, H


def _solve_direction(H, g):
    try:
        return -cho_solve(cho_factor(H), g)
    except (LinAlgError, ValueError):
        w, V = np.linalg.eigh(0.5 * (H + H.T))
        floor = max(1e-12 * np.max(np.abs(w)), 1e-300)
        return -(V @ ((V.T @ g) / np.maximum(w, floor)))


class _Solver:
    def __init__(self, prob, kappa, max_iter):
        self.prob = prob
        self.kappa = kappa
        self.max_iter = max_iter
        self.iterations = 0
        self.dual = prob.phi.dual_norm

    def grad_term(self, g):
        return norm(g, self.dual) ** 2 / (2.0 * self.kappa)

    def minimize(self, y, mu, lam, target, certify=None):
        """Damped Newton until ``||grad||_*^2 / (2 kappa) <= target`` or ``certify(y)`` succeeds.

        Returns ``(y, converged)``.
        """
        prob = self.prob
        F, g, H = prob.evaluate(y, mu, lam)
        while True:
            if self.grad_term(g) <= target:
                return y, True
            if certify is not None and certify(y, F, g):
                return y, True
            if self.iterations >= self.max_iter:
                return y, False
            self.iterations += 1
            p = _solve_direction(H, g)
            slope = float(g @ p)
            if slope >= 0.0:
                p, slope = -g, -float(g @ g)
            # below this the objective cannot resolve the predicted decrease
            noise = 1e-12 * max(1.0, abs(F))
            gn = float(g @ g)
            t = 1.0
            accepted = False
            for _ in range(60):
                yt = y + t * p
                Ft, gt, _ = prob.evaluate(yt, mu, lam, order=1)
                if Ft <= F + 1e-4 * t * slope:
                    accepted = True
                    break
                if -t * slope <= noise and Ft <= F + noise and float(gt @ gt) < gn:
                    accepted = True
                    break
                t *= 0.5
            if not accepted:
                # no representable decrease left in floating point
                return y, False
            y = yt
            F, g, H = prob.evaluate(y, mu, lam)


def prox_point(phi, obj, rho_bar, x, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER, rho=None):
    """Certified ``prox(x) = argmin_y g(y) + rho_bar * D(y, x)``.

    Parameters
    ----------
    phi : LegendreSpec
    obj : RiskObjective or Composite
    rho_bar : float
        Must exceed the weak-convexity modulus of ``obj`` relative to ``phi``.
    x : array_like
    tol : float
        Required bound on ``D(y, y*)`` for the returned point ``y``.
    max_iter : int
        Budget of Newton steps across all smoothing stages.
    rho : float, optional
        Modulus override (relative to ``phi``).

    Returns
    -------
    ProxResult

    Raises
    ------
    NotStronglyConvex
        If ``rho_bar <= rho``.
    MaxIterations
        If the budget runs out first; ``exc.result`` holds the best point.
    """
    comp = as_composite(obj)
    x = phi._check(x)
    if rho is None:
        rho = relative_modulus(phi, comp)
    rho_bar = float(rho_bar)
    if not rho_bar > rho:
        raise NotStronglyConvex(f"rho_bar = {rho_bar} must exceed the weak-convexity modulus {rho}")
    if not tol > 0:
        raise InvalidParams("tol must be positive")
    alpha = phi.alpha
    if not alpha > 0:
        raise InvalidParams("the Legendre function must be strongly convex to certify the prox")
    margin = rho_bar - rho
    kappa = margin * alpha
    prob = _Problem(phi, comp, rho_bar, x)
    solver = _Solver(prob, kappa, max_iter)
    W = comp.total_weight
    budget = tol * margin  # allowed gap in function value
    mu_final = 0.25 * budget / W if W > 0 else 1.0
    if W > 0:
        scales = [np.median(np.abs(b.residual(x))) for b in comp.blocks if b.weights.size]
        mu0 = max(max(scales) if scales else 1.0, 10.0 * mu_final, 1e-300)
    else:
        mu0 = mu_final
    mus = []
    mu = mu0
    while mu > mu_final:
        mus.append(mu)
        mu /= 10.0
    mus.append(mu_final)

    R = comp.radius

    def gap_of(y, mu, lam, F=None, g=None):
        if F is None:
            F, g, _ = prob.evaluate(y, mu, lam, order=1)
        lower = F - 0.5 * lam * R * R - solver.grad_term(g) if lam > 0 else F - solver.grad_term(g)
        yh = y
        if R is not None:
            n = float(np.linalg.norm(y))
            if n > R:
                yh = y * (R / n)
        upper = prob.true_value(yh)
        return upper + 0.5 * mu * W - lower, yh

    def certify_final(mu, lam):
        def check(y, F, g):
            gap, _ = gap_of(y, mu, lam, F, g)
            return gap <= budget
        return check

    y = x.copy()
    if R is not None and np.linalg.norm(y) > R:
        y = y * (R / np.linalg.norm(y))
    lam = 0.0
    ok = True
    mu_last = mus[-1]
    for k, mu in enumerate(mus):
        final = k == len(mus) - 1
        target = 0.25 * budget if final else mu * max(W, 1e-300)
        check = certify_final(mu, 0.0) if final else None
        y, ok = solver.minimize(y, mu, 0.0, target, check)
        mu_last = mu
        if not ok and not final:
            break
    if R is not None and np.linalg.norm(y) > R * (1 + 1e-15):
        y, lam, ok = _ball_multiplier(solver, prob, y, mus, R, budget, certify_final)

    gap, yh = gap_of(y, mus[-1], lam)
    if gap > budget and lam == 0.0 and W > 0:
        polished = _polish(prob, solver, y, mu_last, budget)
        if polished is not None and polished[1] < gap:
            yh, gap = polished
    result = _finish(phi, comp, prob, x, yh, gap, margin, solver.iterations, rho_bar, rho)
    if gap > budget * (1 + 1e-9):
        raise MaxIterations(
            f"prox certificate {result.certificate.guaranteed_D_phi_error:.3g} above tol {tol:.3g} "
            f"after {solver.iterations} Newton steps",
            result,
        )
    return result


def _active_certificate(prob, solver, y, thresh):
    """Gradient pieces at ``y`` with near-zero residuals treated as free.

    Returns ``(g0, H, J, c_A, w_A)``: ``g0`` and ``H`` hold the Bregman and
    smooth terms plus ``w sign(c)`` for rows with ``|c| > thresh``; the
    remaining rows contribute Jacobian rows ``J``, residuals and weights.
    """
    phi, comp = prob.phi, prob.comp
    g0 = prob.rho_bar * (phi.grad(y) - prob.gx)
    H = prob.rho_bar * _newton_metric(phi, y)
    Js, cs, ws = [], [], []
    for blk in comp.blocks:
        c = blk.residual(y)
        act = np.abs(c) <= thresh
        sgn = blk.weights * np.sign(c)
        sgn[act] = 0.0
        g0 = g0 + blk.jvp_t(y, sgn)
        C = blk.curvature(y, sgn)
        if C is not None:
            H = H + C
        rows = np.flatnonzero(act)
        if rows.size:
            Js.append(blk.jacobian(y, rows))
            cs.append(c[rows])
            ws.append(blk.weights[rows])
    for sm in comp.smooth:
        g0 = g0 + sm.grad(y)
        H = H + sm.hess(y)
    d = comp.d
    if not Js:
        return g0, H, np.zeros((0, d)), np.zeros(0), np.zeros(0)
    return g0, H, np.vstack(Js), np.concatenate(cs), np.concatenate(ws)


def _subgradient_gap(solver, g0, J, c, w):
    """Certified gap from the best multipliers ``t`` in ``[-1, 1]`` on the free rows.

    Replacing ``|c|`` by ``max(|c|, t c + beta)`` (convex, 1-Lipschitz, at most
    ``|c| - t c`` above ``|c|`` at the current point) yields a strongly convex
    majorant whose gradient is ``g0 + J^T (w t)``, so
    ``gap <= ||g0 + J^T (w t)||_*^2 / (2 kappa) + sum w (|c| - t c)``.
    """
    if J.shape[0] == 0:
        return solver.grad_term(g0)
    sigma = np.linalg.lstsq(J.T, -g0, rcond=None)[0]
    t = np.clip(sigma / w, -1.0, 1.0)
    v = g0 + J.T @ (w * t)
    return solver.grad_term(v) + float(np.sum(w * (np.abs(c) - t * c)))


def _polish(prob, solver, y, mu, budget, steps=6, widen=10):
    """Active-set Newton refinement for residuals stuck near zero.

    Rows with ``|c|`` below a threshold are driven to zero by a KKT step
    (least squares when there are more of them than unknowns) and the result
    is certified through :func:`_subgradient_gap`.  The threshold starts at
    ``mu`` and grows by factors of ten, since rows that vanish at the
    solution can sit well above the smoothing level.  Returns the best
    ``(y, gap)`` found, or ``None``.
    """
    best = None
    y0 = y
    for j in range(widen):
        y = y0
        thresh = max(mu, 1e-300) * 10.0**j
        try:
            for _ in range(steps):
                g0, H, J, c, w = _active_certificate(prob, solver, y, thresh)
                gap = _subgradient_gap(solver, g0, J, c, w)
                if math.isfinite(gap) and (best is None or gap < best[1]):
                    best = (y, gap)
                if gap <= budget:
                    return best
                k, d = J.shape
                if k == 0:
                    delta = _solve_direction(H, g0)
                elif k < d:
                    K = np.block([[H, J.T], [J, np.zeros((k, k))]])
                    delta = np.linalg.lstsq(K, -np.concatenate([g0, c]), rcond=None)[0][:d]
                else:
                    delta = np.linalg.lstsq(J, -c, rcond=None)[0]
                if not np.all(np.isfinite(delta)):
                    break
                y = y + delta
                # keep the same rows free while the step settles them
                if c.size:
                    thresh = max(thresh, float(np.max(np.abs(c))))
        except (LinAlgError, ValueError):
            continue
    return best


def _ball_multiplier(solver, prob, y, mus, R, budget, certify_final):
    """Find ``lam`` with ``||y(lam)|| = R`` where ``y(lam)`` minimizes the penalized problem."""
    W = max(prob.comp.total_weight, 1e-300)
    state = {"y": y, "ok": True}

    def radius_excess(lam, mu, final):
        # tight inner solves keep the bracketing function continuous
        target = 1e-3 * budget if final else 1e-2 * mu * W
        yy, ok = solver.minimize(state["y"], mu, lam, target)
        state["ok"] = ok
        state["y"] = yy
        return float(np.linalg.norm(yy)) - R

    lam = 0.0
    for k, mu in enumerate(mus):
        final = k == len(mus) - 1
        start = state["y"]
        if radius_excess(0.0, mu, final) <= 0:
            lam = 0.0
            continue
        hi = max(lam, 1e-6) * 2.0
        while radius_excess(hi, mu, final) > 0:
            hi *= 4.0
            if hi > 1e300:
                raise InvalidParams("could not bracket the ball multiplier")
        state["y"] = start
        lam = brentq(lambda t: radius_excess(t, mu, final), 0.0, hi, xtol=1e-15 * hi, rtol=1e-15, maxiter=300)
        radius_excess(lam, mu, final)
    y, ok = solver.minimize(state["y"], mus[-1], lam, 1e-3 * budget, certify_final(mus[-1], lam))
    return y, lam, ok


def _finish(phi, comp, prob, x, y, gap, margin, iterations, rho_bar, rho):
    gval = comp.value(y, enforce_domain=False)
    div = phi.divergence(y, x)
    env = gval + rho_bar * div
    grad = None
    if phi.twice_differentiable:
        grad = rho_bar * phi.hess_apply(x, x - y)
    cert = Certificate(duality_gap=float(max(gap, 0.0)), guaranteed_D_phi_error=float(max(gap, 0.0) / margin))
    return ProxResult(
        x=x.copy(),
        prox_point=y,
        envelope_value=float(env),
        envelope_grad=grad,
        stationarity=float(div),
        certificate=cert,
        iterations=int(iterations),
        rho_bar=float(rho_bar),
        rho=float(rho),
        phi=phi,
    )


def envelope_value(phi, obj, rho_bar, x, tol=DEFAULT_TOL, **kw):
    return prox_point(phi, obj, rho_bar, x, tol, **kw).envelope_value


def envelope_grad(phi, obj, rho_bar, x, tol=DEFAULT_TOL, **kw):
    """``rho_bar * hess Phi(x) (x - prox(x))``."""
    if not phi.twice_differentiable:
        raise NotTwiceDifferentiable(f"{type(phi).__name__} has no Hessian; use the stationarity measure")
    return prox_point(phi, obj, rho_bar, x, tol, **kw).envelope_grad


def stationarity_measure(phi, obj, rho_bar, x, tol=DEFAULT_TOL, **kw):
    """``D(prox(x), x)``."""
    return prox_point(phi, obj, rho_bar, x, tol, **kw).stationarity


def graph_point(x, result, rho_bar=None):
    """Map a prox evaluation to the subdifferential graph: ``(y, rho_bar (x - y))``."""
    if result.phi is not None and not isinstance(result.phi, Euclidean):
        raise InvalidParams("the prox/subdifferential graph correspondence is Euclidean only")
    rho_bar = result.rho_bar if rho_bar is None else float(rho_bar)
    x = np.asarray(x, dtype=float)
    y = result.prox_point
    return y.copy(), rho_bar * (x - y)
