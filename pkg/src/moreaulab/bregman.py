"""Legendre functions and the Bregman geometry they induce.

Three families are supported:

* :class:`Euclidean`, ``Phi(x) = 0.5 * ||x||_2^2``;
* :class:`LpSquared`, ``Phi(x) = scale / (2 (p - 1)) * ||x||_p^2``;
* :class:`PolyGrowth`, ``Phi(x) = sum_i a_i (3i + 7) / (i + 2) ||x||_2^{i+2}``.

Every object exposes value/gradient oracles, the inverse mirror map, and
(when it exists) Hessian actions.  Module-level functions mirror the methods
so callers may use either style.
"""

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.optimize import brentq

from .errors import DimensionMismatch, InvalidParams, NormMismatch, NotTwiceDifferentiable

__all__ = [
    "NormTag",
    "LegendreSpec",
    "Euclidean",
    "LpSquared",
    "PolyGrowth",
    "l1_setup",
    "DivergenceValue",
    "norm",
    "phi_value",
    "phi_grad",
    "phi_grad_inv",
    "phi_hess_apply",
    "phi_hess_solve",
    "divergence",
    "divergence_sym",
    "grad_metric",
    "dual_local_norm",
]


class NormTag(Enum):
    L2 = "l2"
    L1 = "l1"
    LINF = "linf"

    @property
    def dual(self):
        return {NormTag.L2: NormTag.L2, NormTag.L1: NormTag.LINF, NormTag.LINF: NormTag.L1}[self]


def norm(v, tag):
    """Evaluate the norm named by ``tag``."""
    v = np.asarray(v, dtype=float)
    if tag is NormTag.L2:
        return float(np.linalg.norm(v))
    if tag is NormTag.L1:
        return float(np.sum(np.abs(v)))
    if tag is NormTag.LINF:
        return float(np.max(np.abs(v))) if v.size else 0.0
    raise NormMismatch(f"unknown norm tag {tag!r}")


def _pnorm(x, p):
    # scale by max|x_i| first so |x_i|^p never overflows or underflows
    a = np.abs(x)
    top = a.max() if a.size else 0.0
    if top == 0.0:
        return 0.0
    return float(top * np.sum((a / top) ** p) ** (1.0 / p))


@dataclass(frozen=True)
class LegendreSpec:
    """Base class.  Subclasses fill in the oracles."""

    d: int
    norm: NormTag = NormTag.L2

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise InvalidParams(f"dimension must be a positive integer, got {self.d!r}")

    # -- helpers ---------------------------------------------------------
    def _check(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.d,):
            raise DimensionMismatch(f"expected a vector of shape ({self.d},), got {x.shape}")
        return x

    @property
    def dual_norm(self):
        return self.norm.dual

    @property
    def twice_differentiable(self):
        return False

    @property
    def alpha(self):
        """Strong-convexity constant of Phi in ``self.norm``."""
        raise NotImplementedError

    @property
    def alpha_l2(self):
        """Largest ``a`` such that ``Phi - a/2 ||.||_2^2`` is convex."""
        raise NotImplementedError

    # -- oracles ---------------------------------------------------------
    def value(self, x):
        raise NotImplementedError

    def grad(self, x):
        raise NotImplementedError

    def grad_inv(self, w):
        raise NotImplementedError

    def hess_apply(self, x, v):
        raise NotTwiceDifferentiable(f"{type(self).__name__} has no Hessian")

    def hess_solve(self, x, w):
        raise NotTwiceDifferentiable(f"{type(self).__name__} has no Hessian")

    def hess_matrix(self, x):
        raise NotTwiceDifferentiable(f"{type(self).__name__} has no Hessian")

    def divergence(self, y, x):
        y, x = self._check(y), self._check(x)
        val = self.value(y) - self.value(x) - float(self.grad(x) @ (y - x))
        return max(val, 0.0)


@dataclass(frozen=True)
class Euclidean(LegendreSpec):
    """``Phi(x) = 0.5 ||x||_2^2``."""

    norm: NormTag = field(default=NormTag.L2, init=False)

    @property
    def twice_differentiable(self):
        return True

    @property
    def alpha(self):
        return 1.0

    @property
    def alpha_l2(self):
        return 1.0

    def value(self, x):
        x = self._check(x)
        return 0.5 * float(x @ x)

    def grad(self, x):
        return self._check(x).copy()

    def grad_inv(self, w):
        return self._check(w).copy()

    def hess_apply(self, x, v):
        self._check(x)
        return self._check(v).copy()

    def hess_solve(self, x, w):
        self._check(x)
        return self._check(w).copy()

    def hess_matrix(self, x):
        self._check(x)
        return np.eye(self.d)

    def divergence(self, y, x):
        r = self._check(y) - self._check(x)
        return 0.5 * float(r @ r)


@dataclass(frozen=True)
class LpSquared(LegendreSpec):
    """``Phi(x) = scale / (2 (p - 1)) ||x||_p^2``.

    ``norm`` selects the primal norm used for strong convexity, local
    norms and the gradient metric (L1 for the non-Euclidean setup, L2
    otherwise).
    """

    p: float = 2.0
    scale: float = 1.0
    norm: NormTag = NormTag.L1

    def __post_init__(self):
        super().__post_init__()
        if not self.p > 1.0:
            raise InvalidParams(f"p must exceed 1, got {self.p}")
        if not self.scale > 0.0:
            raise InvalidParams(f"scale must be positive, got {self.scale}")
        if self.norm not in (NormTag.L1, NormTag.L2):
            raise NormMismatch("LpSquared supports L1 or L2 as primal norm")

    @property
    def q(self):
        return self.p / (self.p - 1.0)

    @property
    def _a(self):
        return self.scale / (self.p - 1.0)

    @property
    def alpha(self):
        # (1/(2(p-1)))||.||_p^2 is 1-strongly convex in ||.||_p for p <= 2
        if self.p > 2.0:
            return 0.0
        if self.norm is NormTag.L2:
            return self.scale
        return self.scale * self.d ** (2.0 / self.p - 2.0)

    @property
    def alpha_l2(self):
        return self.scale if self.p <= 2.0 else 0.0

    def value(self, x):
        x = self._check(x)
        return 0.5 * self._a * _pnorm(x, self.p) ** 2

    def grad(self, x):
        x = self._check(x)
        n = _pnorm(x, self.p)
        if n == 0.0:
            return np.zeros(self.d)
        # ||x||^{2-p} |x|^{p-1} written as ||x|| (|x|/||x||)^{p-1}
        return self._a * n * np.sign(x) * (np.abs(x) / n) ** (self.p - 1.0)

    def grad_inv(self, w):
        w = self._check(w)
        n = _pnorm(w, self.q)
        if n == 0.0:
            return np.zeros(self.d)
        return n * np.sign(w) * (np.abs(w) / n) ** (self.q - 1.0) / self._a


@dataclass(frozen=True)
class PolyGrowth(LegendreSpec):
    """Radial polynomial ``Phi(x) = sum_i a_i (3i+7)/(i+2) ||x||_2^{i+2}``."""

    coeffs: tuple = (1.0,)
    norm: NormTag = field(default=NormTag.L2, init=False)

    def __post_init__(self):
        super().__post_init__()
        a = tuple(float(c) for c in self.coeffs)
        if not a or a[0] <= 0.0 or any(c < 0.0 for c in a):
            raise InvalidParams("PolyGrowth needs a_0 > 0 and nonnegative coefficients")
        object.__setattr__(self, "coeffs", a)

    @property
    def twice_differentiable(self):
        return True

    @property
    def alpha(self):
        return 7.0 * self.coeffs[0]

    @property
    def alpha_l2(self):
        return 7.0 * self.coeffs[0]

    def _kappa(self, r):
        # grad Phi(x) = kappa(||x||) x
        return sum(a * (3 * i + 7) * r**i for i, a in enumerate(self.coeffs))

    def _r_dkappa(self, r):
        # r * kappa'(r)
        return sum(a * (3 * i + 7) * i * r**i for i, a in enumerate(self.coeffs) if i > 0)

    def value(self, x):
        r = float(np.linalg.norm(self._check(x)))
        return sum(a * (3 * i + 7) / (i + 2) * r ** (i + 2) for i, a in enumerate(self.coeffs))

    def grad(self, x):
        x = self._check(x)
        return self._kappa(float(np.linalg.norm(x))) * x

    def grad_inv(self, w):
        w = self._check(w)
        s = float(np.linalg.norm(w))
        if s == 0.0:
            return np.zeros(self.d)
        # solve kappa(r) r = s; the left side is increasing and >= 7 a_0 r
        hi = s / self.alpha
        r = brentq(lambda t: self._kappa(t) * t - s, 0.0, hi, xtol=1e-300, rtol=1e-15)
        # one Newton polish on kappa(r) r = s
        r -= (self._kappa(r) * r - s) / (self._kappa(r) + self._r_dkappa(r))
        return w / self._kappa(r)

    def _parts(self, x):
        x = self._check(x)
        r = float(np.linalg.norm(x))
        k = self._kappa(r)
        if r == 0.0:
            return x, k, 0.0, np.zeros(self.d)
        return x, k, self._r_dkappa(r), x / r

    def hess_apply(self, x, v):
        _, k, b, u = self._parts(x)
        v = self._check(v)
        return k * v + b * u * float(u @ v)

    def hess_solve(self, x, w):
        _, k, b, u = self._parts(x)
        w = self._check(w)
        # Sherman-Morrison on k I + b u u^T
        return (w - (b / (k + b)) * u * float(u @ w)) / k

    def hess_matrix(self, x):
        _, k, b, u = self._parts(x)
        return k * np.eye(self.d) + b * np.outer(u, u)


def l1_setup(d, scale=np.e**2):
    """The non-Euclidean setup: ``p = 1 + 1/ln d`` measured in the l1 norm."""
    if d < 2:
        raise InvalidParams("the l1 setup needs d >= 2")
    return LpSquared(d=d, p=1.0 + 1.0 / np.log(d), scale=scale, norm=NormTag.L1)


@dataclass(frozen=True)
class DivergenceValue:
    value: float
    symmetric: bool = False

    def __float__(self):
        return float(self.value)


# ---------------------------------------------------------------------------
# functional interface


def phi_value(spec, x):
    return spec.value(x)


def phi_grad(spec, x):
    return spec.grad(x)


def phi_grad_inv(spec, w):
    """Inverse mirror map, ``(grad Phi)^{-1}(w)``."""
    return spec.grad_inv(w)


def phi_hess_apply(spec, x, v):
    return spec.hess_apply(x, v)


def phi_hess_solve(spec, x, w):
    return spec.hess_solve(x, w)


def divergence(spec, y, x):
    """``D(y, x) = Phi(y) - Phi(x) - <grad Phi(x), y - x>``."""
    return DivergenceValue(spec.divergence(y, x), symmetric=False)


def divergence_sym(spec, x, y):
    """Symmetrized divergence, equal to ``<grad Phi(x) - grad Phi(y), x - y>``."""
    x, y = spec._check(x), spec._check(y)
    if isinstance(spec, Euclidean):
        r = x - y
        return DivergenceValue(float(r @ r), symmetric=True)
    val = float((spec.grad(x) - spec.grad(y)) @ (x - y))
    return DivergenceValue(max(val, 0.0), symmetric=True)


def grad_metric(spec, x, y, dual_norm=None):
    """``d(x, y) = ||grad Phi(x) - grad Phi(y)||_*``."""
    if dual_norm is None:
        dual_norm = spec.dual_norm
    if dual_norm is not spec.dual_norm:
        raise NormMismatch(f"{type(spec).__name__} pairs with dual norm {spec.dual_norm}, not {dual_norm}")
    return norm(spec.grad(x) - spec.grad(y), dual_norm)


def dual_local_norm(spec, x, v):
    """``||v||_x^* = ||hess Phi(x)^{-1} v||``."""
    return norm(spec.hess_solve(x, v), spec.norm)
