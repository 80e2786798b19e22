"""Structured objectives ``g(y) = sum_j w_j |c_j(y)| + s(y) + indicator(ball)``.

Every loss in the zoo is an average of absolute values of smooth residual
maps, so one representation serves the risk evaluators and the prox solver.
A residual block knows its residuals, their Jacobian, and the weighted sum
of residual Hessians; smooth terms carry their own value/grad/Hessian.
"""

import numpy as np

from .errors import DimensionMismatch, DomainError

__all__ = [
    "ResidualBlock",
    "LinearResiduals",
    "PhaseResiduals",
    "QuadFormResiduals",
    "BilinearResiduals",
    "LinkResiduals",
    "SineRipple",
    "Composite",
    "sign0",
]


def sign0(v):
    """Sign with ``sign(0) = 0``."""
    return np.sign(v)


class ResidualBlock:
    """Weighted residuals ``c_j(y)`` entering as ``sum_j w_j |c_j(y)|``."""

    linear = False

    def __init__(self, weights):
        self.weights = np.asarray(weights, dtype=float)

    @property
    def total_weight(self):
        return float(self.weights.sum())

    def residual(self, y):
        raise NotImplementedError

    def jacobian(self, y, rows=None):
        raise NotImplementedError

    def jvp_t(self, y, s):
        """``J(y)^T s`` without forming J when possible."""
        return self.jacobian(y).T @ s

    def curvature(self, y, s):
        """``sum_j s_j hess c_j(y)`` as a dense (d, d) matrix."""
        return None

    def curvature_bound(self):
        """Largest eigenvalue of ``sum_j w_j |hess c_j|``, a weak-convexity modulus."""
        return 0.0


class LinearResiduals(ResidualBlock):
    """``c = A y - b``."""

    linear = True

    def __init__(self, A, b, weights):
        super().__init__(weights)
        self.A = np.asarray(A, dtype=float)
        self.b = np.asarray(b, dtype=float)

    def residual(self, y):
        return self.A @ y - self.b

    def jacobian(self, y, rows=None):
        return self.A if rows is None else self.A[rows]

    def jvp_t(self, y, s):
        return self.A.T @ s


class PhaseResiduals(ResidualBlock):
    """``c = (a^T y)^2 - b``."""

    def __init__(self, A, b, weights):
        super().__init__(weights)
        self.A = np.asarray(A, dtype=float)
        self.b = np.asarray(b, dtype=float)

    def residual(self, y):
        return (self.A @ y) ** 2 - self.b

    def jacobian(self, y, rows=None):
        A = self.A if rows is None else self.A[rows]
        return 2.0 * (A @ y)[:, None] * A

    def jvp_t(self, y, s):
        return self.A.T @ (2.0 * (self.A @ y) * s)

    def curvature(self, y, s):
        return (self.A.T * (2.0 * s)) @ self.A

    def curvature_bound(self):
        return float(np.linalg.eigvalsh((self.A.T * (2.0 * self.weights)) @ self.A)[-1])


class QuadFormResiduals(ResidualBlock):
    """``c = ||U y||^2 - b`` with one matrix ``U`` per residual, shape (n, k, d)."""

    def __init__(self, U, b, weights):
        super().__init__(weights)
        self.U = np.asarray(U, dtype=float)
        self.b = np.asarray(b, dtype=float)
        self.G = np.einsum("nkd,nke->nde", self.U, self.U)

    def residual(self, y):
        Uy = self.U @ y
        return np.einsum("nk,nk->n", Uy, Uy) - self.b

    def jacobian(self, y, rows=None):
        G = self.G if rows is None else self.G[rows]
        return 2.0 * (G @ y)

    def curvature(self, y, s):
        return 2.0 * np.einsum("n,nde->de", s, self.G)

    def curvature_bound(self):
        return float(np.linalg.eigvalsh(self.curvature(None, self.weights))[-1])


class BilinearResiduals(ResidualBlock):
    """``c = (u^T y_1)(v^T y_2) - b`` on the stacked variable ``y = (y_1, y_2)``."""

    def __init__(self, U, V, b, weights):
        super().__init__(weights)
        self.U = np.asarray(U, dtype=float)
        self.V = np.asarray(V, dtype=float)
        self.b = np.asarray(b, dtype=float)
        self.d1 = self.U.shape[1]

    def _split(self, y):
        return y[: self.d1], y[self.d1:]

    def residual(self, y):
        y1, y2 = self._split(y)
        return (self.U @ y1) * (self.V @ y2) - self.b

    def jacobian(self, y, rows=None):
        y1, y2 = self._split(y)
        U = self.U if rows is None else self.U[rows]
        V = self.V if rows is None else self.V[rows]
        return np.hstack([(V @ y2)[:, None] * U, (U @ y1)[:, None] * V])

    def curvature(self, y, s):
        C = (self.U.T * s) @ self.V
        d1, d2 = C.shape
        H = np.zeros((d1 + d2, d1 + d2))
        H[:d1, d1:] = C
        H[d1:, :d1] = C.T
        return H

    def curvature_bound(self):
        w = self.weights
        lu = np.linalg.eigvalsh((self.U.T * w) @ self.U)[-1]
        lv = np.linalg.eigvalsh((self.V.T * w) @ self.V)[-1]
        return float(max(lu, lv))


class LinkResiduals(ResidualBlock):
    """``c = sigma(z^T y) - b`` for a scalar link ``sigma``."""

    def __init__(self, Z, b, link, weights):
        super().__init__(weights)
        self.Z = np.asarray(Z, dtype=float)
        self.b = np.asarray(b, dtype=float)
        self.link = link
        self.linear = link.lip_deriv == 0.0

    def residual(self, y):
        return self.link(self.Z @ y) - self.b

    def jacobian(self, y, rows=None):
        Z = self.Z if rows is None else self.Z[rows]
        return self.link.deriv(Z @ y)[:, None] * Z

    def jvp_t(self, y, s):
        return self.Z.T @ (self.link.deriv(self.Z @ y) * s)

    def curvature(self, y, s):
        if self.linear:
            return None
        return (self.Z.T * (s * self.link.deriv2(self.Z @ y))) @ self.Z

    def curvature_bound(self):
        if self.linear:
            return 0.0
        return float(self.link.lip_deriv * np.linalg.eigvalsh((self.Z.T * self.weights) @ self.Z)[-1])


class SineRipple:
    """Smooth term ``sum_i delta sin(y_i / sqrt(delta))``; weakly convex with modulus 1."""

    def __init__(self, delta):
        if not delta > 0:
            raise ValueError("delta must be positive")
        self.delta = float(delta)
        self.freq = 1.0 / np.sqrt(self.delta)

    def value(self, y):
        return float(np.sum(self.delta * np.sin(self.freq * y)))

    def grad(self, y):
        return self.delta * self.freq * np.cos(self.freq * y)

    def hess(self, y):
        return np.diag(-np.sin(self.freq * y))

    @property
    def modulus(self):
        return 1.0

    def bounds(self):
        """Range of the term per coordinate, ``(lower, upper)``."""
        return -self.delta, self.delta


class Composite:
    """``g(y) = sum_blocks sum_j w_j |c_j(y)| + sum smooth(y) + indicator{||y||_2 <= radius}``.

    Parameters
    ----------
    d : int
        Dimension.
    blocks : list of ResidualBlock
    smooth : list
        Objects with ``value``, ``grad``, ``hess`` and ``modulus``.
    radius : float or None
        Euclidean ball constraint.
    rho : float or None
        Euclidean weak-convexity modulus.  Computed from the blocks when
        omitted.
    """

    def __init__(self, d, blocks=(), smooth=(), radius=None, rho=None, offset=0.0):
        self.d = int(d)
        self.blocks = list(blocks)
        self.smooth = list(smooth)
        self.radius = None if radius is None else float(radius)
        self.offset = float(offset)
        if rho is None:
            rho = sum(b.curvature_bound() for b in self.blocks) + sum(s.modulus for s in self.smooth)
        self.rho_e = float(rho)

    @property
    def total_weight(self):
        return sum(b.total_weight for b in self.blocks)

    def in_domain(self, y, slack=0.0):
        if self.radius is None:
            return True
        return float(np.linalg.norm(y)) <= self.radius * (1.0 + slack) + slack

    def check(self, y):
        y = np.asarray(y, dtype=float)
        if y.shape != (self.d,):
            raise DimensionMismatch(f"expected shape ({self.d},), got {y.shape}")
        return y

    def value(self, y, enforce_domain=True):
        y = self.check(y)
        if enforce_domain and not self.in_domain(y, slack=1e-12):
            raise DomainError(f"point of norm {np.linalg.norm(y):.6g} lies outside the ball of radius {self.radius}")
        total = self.offset
        for b in self.blocks:
            total += float(b.weights @ np.abs(b.residual(y)))
        for s in self.smooth:
            total += s.value(y)
        return total

    def subgrad(self, y):
        y = self.check(y)
        if not self.in_domain(y, slack=1e-12):
            raise DomainError("point lies outside the constraint ball")
        g = np.zeros(self.d)
        for b in self.blocks:
            g += b.jvp_t(y, b.weights * sign0(b.residual(y)))
        for s in self.smooth:
            g += s.grad(y)
        return g
