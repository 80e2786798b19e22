"""The weakly convex loss zoo, regularizers, datasets and risk objectives.

Every loss is ``f(x, z) = sum_k |c_k(x, z)|`` for smooth residuals ``c``:

============== ============================================ ==========================
kind           residual                                     record fields
============== ============================================ ==========================
phase          ``<a, x>^2 - b``                             ``a (d,)``, ``b``
blind          ``<u, x1><v, x2> - b``, ``x = (x1, x2)``     ``u (d1,)``, ``v (d2,)``, ``b``
covariance     ``||U x||^2 - b``                            ``U (k, d)``, ``b``
robust         ``sigma(<z, x>) - b``                        ``z (d,)``, ``delta``, ``xi``, ``b``
glm            ``<phi_k, x> - target_k``                    ``phi (K, d)``, ``target (K,)``
============== ============================================ ==========================

Weak-convexity moduli are reported in the Euclidean geometry; divide by
``phi.alpha_l2`` for the modulus relative to another Legendre function.
"""

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .composite import (
    BilinearResiduals,
    Composite,
    LinearResiduals,
    LinkResiduals,
    PhaseResiduals,
    QuadFormResiduals,
    sign0,
)
from .errors import DimensionMismatch, DomainError, InvalidLink, InvalidParams
from .bregman import NormTag

__all__ = [
    "IdentityLink",
    "SmoothedReluLink",
    "make_link",
    "Regularizer",
    "Dataset",
    "WeaklyConvexLoss",
    "RiskObjective",
    "LOSS_KINDS",
    "loss_value",
    "loss_subgrad",
    "empirical_risk",
    "empirical_subgrad",
    "sample_dataset",
    "weak_convexity_modulus",
    "stable_hash",
]

LOSS_KINDS = ("phase", "blind", "covariance", "robust", "glm")


def stable_hash(text):
    """64-bit hash of a string that does not depend on the interpreter session."""
    return int.from_bytes(hashlib.blake2b(text.encode(), digest_size=8).digest(), "little")


# ---------------------------------------------------------------------------
# links for robust regression


class IdentityLink:
    name = "identity"
    c_sigma = 1.0
    C_sigma = 1.0
    lip_deriv = 0.0

    def __call__(self, u):
        return np.asarray(u, dtype=float)

    def deriv(self, u):
        return np.ones_like(np.asarray(u, dtype=float))

    def deriv2(self, u):
        return np.zeros_like(np.asarray(u, dtype=float))


class SmoothedReluLink:
    """``sigma(u) = u + log(1 + exp(k u)) / (2k)``.

    The derivative ``1 + logistic(k u) / 2`` lies in ``[1, 1.5]`` and is
    ``k/8``-Lipschitz.
    """

    name = "smoothed_relu"
    c_sigma = 1.0
    C_sigma = 1.5

    def __init__(self, k=1.0):
        if not k > 0:
            raise InvalidLink(f"sharpness must be positive, got {k}")
        self.k = float(k)
        self.lip_deriv = self.k / 8.0

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        return u + np.logaddexp(0.0, self.k * u) / (2.0 * self.k)

    def deriv(self, u):
        u = np.asarray(u, dtype=float)
        return 1.0 + 0.5 / (1.0 + np.exp(-self.k * u))

    def deriv2(self, u):
        s = 1.0 / (1.0 + np.exp(-self.k * np.asarray(u, dtype=float)))
        return 0.5 * self.k * s * (1.0 - s)


def make_link(name, **kw):
    if name == "identity":
        return IdentityLink()
    if name == "smoothed_relu":
        return SmoothedReluLink(**kw)
    raise InvalidLink(f"unknown link {name!r}")


# ---------------------------------------------------------------------------
# regularizers


@dataclass(frozen=True)
class Regularizer:
    """``kind`` is ``"zero"``, ``"l1"`` (weight) or ``"ball"`` (radius, norm)."""

    kind: str = "zero"
    weight: float = 0.0
    radius: float = np.inf
    norm: NormTag = NormTag.L2

    def __post_init__(self):
        if self.kind not in ("zero", "l1", "ball"):
            raise InvalidParams(f"unknown regularizer {self.kind!r}")
        if self.kind == "l1" and not self.weight >= 0:
            raise InvalidParams("l1 weight must be nonnegative")
        if self.kind == "ball" and not self.radius > 0:
            raise InvalidParams("ball radius must be positive")

    @classmethod
    def zero(cls):
        return cls("zero")

    @classmethod
    def l1(cls, weight):
        return cls("l1", weight=float(weight))

    @classmethod
    def ball(cls, radius, norm=NormTag.L2):
        return cls("ball", radius=float(radius), norm=norm)

    def contains(self, x, slack=1e-12):
        if self.kind != "ball":
            return True
        n = float(np.sum(np.abs(x))) if self.norm is NormTag.L1 else float(np.linalg.norm(x))
        return n <= self.radius * (1.0 + slack) + slack

    def value(self, x):
        x = np.asarray(x, dtype=float)
        if not self.contains(x):
            raise DomainError(f"point lies outside the {self.norm.value} ball of radius {self.radius}")
        if self.kind == "l1":
            return self.weight * float(np.sum(np.abs(x)))
        return 0.0

    def subgrad(self, x):
        x = np.asarray(x, dtype=float)
        if not self.contains(x):
            raise DomainError("point lies outside the constraint ball")
        if self.kind == "l1":
            return self.weight * sign0(x)
        return np.zeros_like(x)


# ---------------------------------------------------------------------------
# datasets

_FIELDS = {
    "phase": ("a", "b"),
    "blind": ("u", "v", "b"),
    "covariance": ("U", "b"),
    "robust": ("z", "delta", "xi", "b"),
    "glm": ("phi", "target"),
}


@dataclass(frozen=True, eq=False)
class Dataset:
    """An immutable i.i.d. sample stored column-wise.

    ``arrays[name]`` has the sample index as its leading axis.
    """

    kind: str
    arrays: dict
    seed: int = 0
    generator_id: str = ""

    def __post_init__(self):
        if self.kind not in _FIELDS:
            raise InvalidParams(f"unknown loss kind {self.kind!r}")
        missing = set(_FIELDS[self.kind]) - set(self.arrays)
        if missing:
            raise InvalidParams(f"{self.kind} records need fields {sorted(missing)}")
        frozen = {}
        sizes = set()
        for k, v in self.arrays.items():
            a = np.array(v, dtype=float)
            a.setflags(write=False)
            frozen[k] = a
            sizes.add(a.shape[0])
        if len(sizes) != 1:
            raise DimensionMismatch("all record fields must share the sample axis")
        object.__setattr__(self, "arrays", frozen)

    @property
    def m(self):
        return next(iter(self.arrays.values())).shape[0]

    def __len__(self):
        return self.m

    def __getitem__(self, name):
        return self.arrays[name]

    def record(self, i):
        return {k: v[i] for k, v in self.arrays.items()}

    def take(self, idx):
        idx = np.asarray(idx)
        return Dataset(self.kind, {k: v[idx] for k, v in self.arrays.items()}, self.seed, self.generator_id)

    def replace(self, i, record):
        """Copy with sample ``i`` swapped for ``record``."""
        arrays = {}
        for k, v in self.arrays.items():
            a = v.copy()
            a[i] = record[k]
            arrays[k] = a
        return Dataset(self.kind, arrays, self.seed, self.generator_id + f"|swap{i}")

    def split(self):
        """Two halves, used for the oracle noise floor."""
        h = self.m // 2
        return self.take(np.arange(h)), self.take(np.arange(h, 2 * h))

    def canonical_order(self):
        """Permutation sorting records lexicographically by their raw values."""
        cols = [v.reshape(self.m, -1) for _, v in sorted(self.arrays.items())]
        keys = np.hstack(cols)
        return np.lexsort(keys.T[::-1])

    def tobytes(self):
        return b"".join(self.arrays[k].tobytes() for k in sorted(self.arrays))


def _single(kind, z):
    if isinstance(z, Dataset):
        return z
    return Dataset(kind, {k: np.asarray(v, dtype=float)[None, ...] for k, v in z.items()})


# ---------------------------------------------------------------------------
# losses


@dataclass(frozen=True)
class WeaklyConvexLoss:
    """A zoo loss with its parameters.

    Parameters
    ----------
    kind : str
        One of ``LOSS_KINDS``.
    d : int
        Dimension of the decision variable (``d1 + d2`` for ``blind``).
    params : dict
        Per-kind parameters.  ``blind`` needs ``d1``; ``robust`` accepts
        ``link`` and ``link_k``; ``glm`` accepts ``K``.
    """

    kind: str
    d: int
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in LOSS_KINDS:
            raise InvalidParams(f"unknown loss kind {self.kind!r}")
        if self.kind == "blind" and not 0 < int(self.params.get("d1", 0)) < self.d:
            raise InvalidParams("blind deconvolution needs 0 < d1 < d")

    @property
    def link(self):
        return make_link(self.params.get("link", "identity"), **({"k": self.params["link_k"]} if "link_k" in self.params else {}))

    @property
    def K(self):
        return int(self.params.get("K", 1))

    # -- residual blocks --------------------------------------------------
    def block(self, data, weights=None):
        """Residual block for ``sum_i w_i f(., z_i)`` (default ``w_i = 1/m``)."""
        if data.kind != self.kind:
            raise InvalidParams(f"dataset of kind {data.kind} given to a {self.kind} loss")
        m = data.m
        w = np.full(m, 1.0 / m) if weights is None else np.asarray(weights, dtype=float)
        k = self.kind
        if k == "phase":
            return PhaseResiduals(data["a"], data["b"], w)
        if k == "blind":
            return BilinearResiduals(data["u"], data["v"], data["b"], w)
        if k == "covariance":
            return QuadFormResiduals(data["U"], data["b"], w)
        if k == "robust":
            return LinkResiduals(data["z"], data["b"], self.link, w)
        phi = data["phi"]
        K = phi.shape[1]
        return LinearResiduals(phi.reshape(m * K, -1), data["target"].reshape(m * K), np.repeat(w, K))

    def _k_per_sample(self, data):
        return data["phi"].shape[1] if self.kind == "glm" else 1

    def values(self, x, data):
        """Per-sample losses ``f(x, z_i)``."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.d,):
            raise DimensionMismatch(f"expected shape ({self.d},), got {x.shape}")
        blk = self.block(data)
        r = np.abs(blk.residual(x))
        return r.reshape(data.m, self._k_per_sample(data)).sum(axis=1)

    def subgrads(self, x, data):
        """Per-sample subgradients (rows), with ``sign(0) = 0``."""
        x = np.asarray(x, dtype=float)
        blk = self.block(data)
        c = blk.residual(x)
        J = blk.jacobian(x)
        G = sign0(c)[:, None] * J
        return G.reshape(data.m, self._k_per_sample(data), self.d).sum(axis=1)

    def rho(self, data):
        """Euclidean weak-convexity modulus of ``x -> mean_i f(x, z_i)``."""
        return self.block(data).curvature_bound()

    def lipschitz(self, data, radius=None):
        """Per-sample Euclidean Lipschitz constants ``L(z_i)`` on the ball of ``radius``.

        Only ``robust`` with the identity link and ``glm`` are globally
        Lipschitz; the other kinds require a finite radius.
        """
        k = self.kind
        if k == "glm":
            return np.linalg.norm(data["phi"], axis=2).sum(axis=1)
        if k == "robust":
            return self.link.C_sigma * np.linalg.norm(data["z"], axis=1)
        if radius is None or not np.isfinite(radius):
            raise InvalidParams(f"{k} loss is Lipschitz only on bounded sets; pass a radius")
        if k == "phase":
            return 2.0 * radius * np.sum(data["a"] ** 2, axis=1)
        if k == "blind":
            return radius * np.linalg.norm(data["u"], axis=1) * np.linalg.norm(data["v"], axis=1)
        G = np.einsum("nkd,nke->nde", data["U"], data["U"])
        return 2.0 * radius * np.linalg.eigvalsh(G)[:, -1]


def loss_value(loss, x, z):
    """``f(x, z)`` for one record ``z`` (a mapping of field -> array)."""
    return float(loss.values(x, _single(loss.kind, z))[0])


def loss_subgrad(loss, x, z):
    """One subgradient of ``f(., z)`` at ``x``."""
    return loss.subgrads(x, _single(loss.kind, z))[0]


def weak_convexity_modulus(loss_kind, **params):
    """Analytic weak-convexity modulus.

    ``composite`` uses ``ell * beta``.  ``robust`` uses ``2 L C^2`` for the
    population, or ``2 L tau_m`` when ``tau_m`` is given.
    """
    try:
        if loss_kind == "composite":
            return float(params["ell"]) * float(params["beta"])
        if loss_kind == "robust":
            L = float(params["L"])
            if "tau_m" in params:
                return 2.0 * L * float(params["tau_m"])
            return 2.0 * L * float(params["C"]) ** 2
    except KeyError as exc:
        raise InvalidParams(f"missing constant {exc.args[0]!r}") from None
    raise InvalidParams(f"no analytic modulus for {loss_kind!r}")


# ---------------------------------------------------------------------------
# sampling


def _rng(seed, generator_id):
    return np.random.default_rng(np.random.SeedSequence([int(seed) & (2**64 - 1), stable_hash(generator_id)]))


def default_xbar(d, norm=1.0):
    return np.full(d, float(norm) / np.sqrt(d))


def sample_dataset(kind, params, m, seed):
    """Draw ``m`` i.i.d. records.

    Common parameters: ``d``, ``xbar`` (defaults to a constant vector of
    norm ``xbar_norm``), ``noise`` (Gaussian additive noise level).

    ``phase``
        ``design`` is ``"gaussian"`` or ``"sphere"`` (rows uniform on the
        sphere of radius ``sqrt(d)``).
    ``blind``
        ``d1``; the signal is ``xbar`` split as ``(x1, x2)``.
    ``covariance``
        ``k`` rows per sketch matrix.
    ``robust``
        ``p_fail``, ``corruption`` in ``{"cauchy", "gaussian", "planted"}``,
        ``scale`` of the outliers, ``x0`` for the planted signal, ``link``.
    ``glm``
        ``K`` feature maps per sample.
    """
    if kind not in LOSS_KINDS:
        raise InvalidParams(f"unknown loss kind {kind!r}")
    m = int(m)
    if m < 1:
        raise InvalidParams("m must be at least 1")
    params = dict(params)
    d = int(params["d"])
    gid = params.get("generator_id") or f"{kind}:{params.get('design', 'gaussian')}"
    rng = _rng(seed, gid)
    xbar = np.asarray(params["xbar"], dtype=float) if "xbar" in params else default_xbar(d, params.get("xbar_norm", 1.0))
    if xbar.shape != (d,):
        raise DimensionMismatch("xbar must have length d")
    noise = float(params.get("noise", 0.0))
    if noise < 0:
        raise InvalidParams("noise must be nonnegative")

    if kind == "phase":
        A = rng.standard_normal((m, d))
        if params.get("design", "gaussian") == "sphere":
            A *= np.sqrt(d) / np.linalg.norm(A, axis=1, keepdims=True)
        b = (A @ xbar) ** 2 + noise * rng.standard_normal(m)
        arrays = {"a": A, "b": b}
    elif kind == "blind":
        d1 = int(params["d1"])
        U = rng.standard_normal((m, d1))
        V = rng.standard_normal((m, d - d1))
        b = (U @ xbar[:d1]) * (V @ xbar[d1:]) + noise * rng.standard_normal(m)
        arrays = {"u": U, "v": V, "b": b}
    elif kind == "covariance":
        k = int(params.get("k", 2))
        U = rng.standard_normal((m, k, d)) / np.sqrt(k)
        Ux = U @ xbar
        b = np.einsum("nk,nk->n", Ux, Ux) + noise * rng.standard_normal(m)
        arrays = {"U": U, "b": b}
    elif kind == "robust":
        p_fail = float(params.get("p_fail", 0.0))
        if not 0.0 <= p_fail <= 1.0:
            raise InvalidParams(f"p_fail must lie in [0, 1], got {p_fail}")
        link = make_link(params.get("link", "identity"), **({"k": params["link_k"]} if "link_k" in params else {}))
        Z = rng.standard_normal((m, d))
        delta = (rng.random(m) < p_fail).astype(float)
        mode = params.get("corruption", "cauchy")
        scale = float(params.get("scale", 10.0))
        if mode == "cauchy":
            xi = scale * rng.standard_cauchy(m)
        elif mode == "gaussian":
            xi = scale * rng.standard_normal(m)
        elif mode == "planted":
            x0 = np.asarray(params["x0"], dtype=float) if "x0" in params else -xbar
            xi = link(Z @ x0) - link(Z @ xbar)
        else:
            raise InvalidParams(f"unknown corruption mode {mode!r}")
        b = link(Z @ xbar) + delta * xi + noise * rng.standard_normal(m)
        arrays = {"z": Z, "delta": delta, "xi": xi, "b": b}
    else:
        K = int(params.get("K", 1))
        phi = rng.standard_normal((m, K, d))
        target = phi @ xbar + noise * rng.standard_normal((m, K))
        arrays = {"phi": phi, "target": target}
    return Dataset(kind, arrays, seed=int(seed), generator_id=gid)


# ---------------------------------------------------------------------------
# risk objectives


class RiskObjective:
    """``phi_S(x) = (1/m) sum_i f(x, z_i) + r(x)``.

    The sample is stored in a canonical (sorted) order so every quantity
    computed from it is invariant under permutations of the input.

    Parameters
    ----------
    loss : WeaklyConvexLoss
    reg : Regularizer
    data : Dataset
        The sample, or a frozen mega-sample standing in for the population.
    population : bool
        Marks ``data`` as a population oracle (informational only).
    rho : float, optional
        Override for the Euclidean weak-convexity modulus, for example
        the maximum over a family of swapped samples.
    """

    def __init__(self, loss, reg, data, population=False, rho=None):
        self.loss = loss
        self.reg = reg if reg is not None else Regularizer.zero()
        self.data = data.take(data.canonical_order())
        self.population = bool(population)
        self._rho = None if rho is None else float(rho)
        self._block = None

    @property
    def d(self):
        return self.loss.d

    @property
    def m(self):
        return self.data.m

    @property
    def block(self):
        if self._block is None:
            self._block = self.loss.block(self.data)
        return self._block

    @property
    def rho_e(self):
        """Euclidean weak-convexity modulus of ``f_S + r``."""
        if self._rho is None:
            self._rho = self.block.curvature_bound()
        return self._rho

    def rho_total(self, phi=None):
        """Weak-convexity modulus relative to ``phi`` (Euclidean when omitted)."""
        if phi is None or self.rho_e == 0.0:
            return self.rho_e
        if phi.alpha_l2 <= 0.0:
            raise InvalidParams("the Legendre function is not strongly convex; no relative modulus")
        return self.rho_e / phi.alpha_l2

    def per_sample(self, x):
        return self.loss.values(x, self.data)

    def value(self, x):
        x = np.asarray(x, dtype=float)
        r = self.reg.value(x)
        # sorted summation makes the result independent of sample order
        # beyond the canonical ordering; np.sum is pairwise
        return float(np.sum(np.sort(self.per_sample(x))) / self.m) + r

    def subgrad(self, x):
        x = np.asarray(x, dtype=float)
        r = self.reg.subgrad(x)
        return self.loss.subgrads(x, self.data).sum(axis=0) / self.m + r

    def composite(self):
        """The objective in the structured form consumed by the prox solver."""
        blocks = [self.block]
        radius = None
        if self.reg.kind == "l1" and self.reg.weight > 0:
            blocks.append(LinearResiduals(np.eye(self.d), np.zeros(self.d), np.full(self.d, self.reg.weight)))
        elif self.reg.kind == "ball":
            if self.reg.norm is not NormTag.L2:
                raise InvalidParams("only Euclidean balls are supported as constraints")
            radius = self.reg.radius
        return Composite(self.d, blocks, radius=radius, rho=self.rho_e)


def empirical_risk(obj, x):
    return obj.value(x)


def empirical_subgrad(obj, x):
    return obj.subgrad(x)
