"""Loss configurations and the frozen mega-sample population oracle."""

from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidParams
from ..losses import Regularizer, RiskObjective, WeaklyConvexLoss, sample_dataset
from .seeding import POPULATION_SEED

DEFAULT_MEGA = 2**20

_POPULATION_CACHE = {}


@dataclass(frozen=True)
class LossConfig:
    """Everything needed to draw samples and build risk objectives.

    ``data`` holds the sampling parameters passed to
    :func:`~moreaulab.losses.sample_dataset`; loss parameters that matter
    to the residual model (``K``, ``d1``, ``link``...) are read from it too.
    """

    kind: str
    d: int
    data: dict = field(default_factory=dict)
    reg: Regularizer = field(default_factory=Regularizer.zero)
    mega: int = DEFAULT_MEGA

    def __post_init__(self):
        if self.mega < 2:
            raise InvalidParams("the population oracle needs at least two samples")

    @property
    def loss(self):
        keys = ("K", "d1", "link", "link_k")
        return WeaklyConvexLoss(self.kind, self.d, {k: self.data[k] for k in keys if k in self.data})

    @property
    def sampling(self):
        return {"d": self.d, **self.data}

    def sample(self, m, seed):
        return sample_dataset(self.kind, self.sampling, m, seed)

    def objective(self, data, population=False, rho=None):
        return RiskObjective(self.loss, self.reg, data, population=population, rho=rho)

    def _key(self):
        return (self.kind, self.d, tuple(sorted((k, repr(v)) for k, v in self.data.items())), self.mega)

    def population_data(self):
        """The mega-sample, drawn once per configuration from the reserved seed."""
        key = self._key()
        if key not in _POPULATION_CACHE:
            params = dict(self.sampling)
            gid = params.pop("generator_id", None) or f"{self.kind}:{params.get('design', 'gaussian')}"
            params["generator_id"] = gid + ":population"
            _POPULATION_CACHE[key] = sample_dataset(self.kind, params, self.mega, POPULATION_SEED)
        return _POPULATION_CACHE[key]

    def population(self, rho=None):
        return self.objective(self.population_data(), population=True, rho=rho)


def clear_population_cache():
    _POPULATION_CACHE.clear()


def subgaussian_norm(samples):
    """Empirical sub-Gaussian norm ``inf{t > 0 : mean exp(X^2/t^2) <= 2}`` by bisection."""
    x = np.asarray(samples, dtype=float)
    x2 = x * x
    top = float(x2.max()) if x.size else 0.0
    if top == 0.0:
        return 0.0

    def excess(t):
        # log-mean-exp for stability
        a = x2 / (t * t)
        amax = a.max()
        return amax + np.log(np.mean(np.exp(a - amax))) - np.log(2.0)

    lo, hi = 1e-12, np.sqrt(top / np.log(2.0)) + 1e-12
    while excess(hi) > 0:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if excess(mid) > 0:
            lo = mid
        else:
            hi = mid
    return float(hi)
