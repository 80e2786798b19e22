"""Axis-aligned lattice nets over balls, with probe verification."""

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from ..bregman import Euclidean, LpSquared, NormTag, PolyGrowth
from ..errors import InvalidParams, NetTooLarge

DEFAULT_CAP = 10**6


@dataclass(frozen=True)
class Region:
    """A centered ball ``{x : ||x - center|| <= B}`` in the l2 or l1 norm, or a box."""

    B: float
    d: int
    norm: str = "l2"
    center: tuple = None

    def __post_init__(self):
        if not self.B >= 0 or self.d < 1:
            raise InvalidParams("region needs B >= 0 and d >= 1")
        if self.norm not in ("l2", "l1", "box"):
            raise InvalidParams(f"unknown region norm {self.norm!r}")
        c = (0.0,) * self.d if self.center is None else tuple(float(v) for v in self.center)
        if len(c) != self.d:
            raise InvalidParams("center has the wrong dimension")
        object.__setattr__(self, "center", c)

    @property
    def c(self):
        return np.asarray(self.center)

    def distance(self, X):
        """Euclidean distance from the rows of ``X`` to the region."""
        Y = np.atleast_2d(X) - self.c
        if self.norm == "l2":
            return np.maximum(np.linalg.norm(Y, axis=1) - self.B, 0.0)
        if self.norm == "box":
            return np.linalg.norm(np.maximum(np.abs(Y) - self.B, 0.0), axis=1)
        # l1 ball: project each row
        return np.array([np.linalg.norm(y - _project_l1(y, self.B)) for y in Y])

    def sample(self, n, rng):
        """``n`` uniform points of the region."""
        d = self.d
        if self.norm == "box":
            return self.c + rng.uniform(-self.B, self.B, size=(n, d))
        if self.norm == "l2":
            G = rng.standard_normal((n, d))
            G /= np.linalg.norm(G, axis=1, keepdims=True)
            return self.c + G * (self.B * rng.random(n) ** (1.0 / d))[:, None]
        E = rng.exponential(size=(n, d + 1))
        S = E[:, :d] / E.sum(axis=1, keepdims=True)
        return self.c + self.B * S * rng.choice([-1.0, 1.0], size=(n, d))

    def enlarged(self, r):
        return Region(self.B + r, self.d, self.norm, self.center)


def _project_l1(y, B):
    if np.sum(np.abs(y)) <= B:
        return y
    u = np.sort(np.abs(y))[::-1]
    cs = np.cumsum(u)
    k = np.nonzero(u * np.arange(1, len(u) + 1) > cs - B)[0][-1]
    theta = (cs[k] - B) / (k + 1.0)
    return np.sign(y) * np.maximum(np.abs(y) - theta, 0.0)


@dataclass(frozen=True)
class CoveringNet:
    points: np.ndarray
    delta: float
    metric: str
    region: Region
    spacing: float

    def __len__(self):
        return len(self.points)


def metric_lipschitz(phi, region):
    """Euclidean Lipschitz constant of ``grad Phi`` on the region (twice-differentiable specs)."""
    if isinstance(phi, Euclidean):
        return 1.0
    if isinstance(phi, PolyGrowth):
        r = float(np.linalg.norm(region.c)) + region.B * (1.0 if region.norm != "box" else math.sqrt(region.d))
        return phi._kappa(r) + phi._r_dkappa(r)
    raise InvalidParams(f"no Lipschitz bound for {type(phi).__name__}")


def l1_radius_for(delta, B, d):
    """l1 radius whose cover is a delta cover in the gradient metric of the l1 setup."""
    ld = math.log(d)
    return (delta / (4.0 * ld)) ** ld / (2.0 * B)


def build_net(region, phi, delta, cap=DEFAULT_CAP):
    """Lattice net of ``region`` with covering radius ``delta`` in the metric of ``phi``.

    Euclidean-type specs use spacing ``delta_2 / sqrt(d)`` where
    ``delta_2 = delta / Lip(grad Phi)``, which leaves covering radius
    ``delta_2 / 2``; lattice points farther than that from the region are
    dropped.  The l1 setup converts ``delta`` to an l1 radius through the
    Hoelder estimate and uses spacing ``eps / d``.

    Raises
    ------
    NetTooLarge
        If the net would exceed ``cap`` points.
    """
    if not delta > 0:
        raise InvalidParams("delta must be positive")
    d = region.d
    if isinstance(phi, LpSquared) and phi.norm is NormTag.L1:
        eps = l1_radius_for(delta, max(region.B, 1.0), d)
        h = eps / d
        keep = eps / 2.0
        metric = "l1grad"
        reach = region.B * {"l1": 1.0, "l2": math.sqrt(d), "box": d}[region.norm]
    else:
        eps = delta / metric_lipschitz(phi, region)
        h = eps / math.sqrt(d)
        keep = eps / 2.0
        metric = "euclidean" if isinstance(phi, Euclidean) else "grad"
        reach = region.B * (math.sqrt(d) if region.norm == "box" else 1.0)
    # the lattice covers within keep, so a lone center does whenever reach <= keep
    if reach <= keep:
        return CoveringNet(region.c[None, :].copy(), float(delta), metric, region, float(h))
    half = region.B + h
    n_axis = 2 * int(math.floor(half / h)) + 1
    if n_axis ** d > 50 * cap:
        raise NetTooLarge(f"a lattice of {n_axis}^{d} points exceeds the cap {cap}; raise delta")
    ticks = h * np.arange(-(n_axis // 2), n_axis // 2 + 1)
    grid = np.stack(np.meshgrid(*([ticks] * d), indexing="ij"), axis=-1).reshape(-1, d) + region.c
    mask = region.distance(grid) <= keep * (1 + 1e-12)
    pts = grid[mask]
    if len(pts) > cap:
        raise NetTooLarge(f"net of {len(pts)} points exceeds the cap {cap}; raise delta")
    return CoveringNet(pts, float(delta), metric, region, float(h))


def verify_net(net, phi, n_probes=10_000, seed=0):
    """Largest metric distance from ``n_probes`` random region points to the net."""
    rng = np.random.default_rng(seed)
    probes = net.region.sample(n_probes, rng)
    if net.metric == "euclidean":
        dist, _ = cKDTree(net.points).query(probes)
        return float(dist.max())
    if net.metric == "l1grad":
        G = np.array([phi.grad(p) for p in net.points])
        Q = np.array([phi.grad(p) for p in probes])
        dist, _ = cKDTree(G).query(Q, p=np.inf)
        return float(dist.max())
    G = np.array([phi.grad(p) for p in net.points])
    Q = np.array([phi.grad(p) for p in probes])
    dist, _ = cKDTree(G).query(Q)
    return float(dist.max())
