"""Prox points of a phase-retrieval risk under three Legendre functions.

Prints each prox point, its certified accuracy and the envelope value.
"""

import numpy as np

from moreaulab import Euclidean, PolyGrowth, Regularizer, RiskObjective, WeaklyConvexLoss, l1_setup, sample_dataset
from moreaulab.prox import prox_point, relative_modulus


def main():
    d = 3
    data = sample_dataset("phase", {"d": d, "noise": 0.1}, 40, seed=1)
    comp = RiskObjective(WeaklyConvexLoss("phase", d), Regularizer.zero(), data).composite()
    x = np.array([0.6, -0.2, 0.4])
    for name, phi in [("euclidean", Euclidean(d)), ("poly", PolyGrowth(d, (1.0, 0.3))), ("l1 setup", l1_setup(d))]:
        rho = relative_modulus(phi, comp)
        r = prox_point(phi, comp, 2 * rho + 1, x)
        err = r.certificate.guaranteed_D_phi_error
        print(f"{name:10s} prox={np.array2string(r.prox_point, precision=5)}  D-error<={err:.1e}  envelope={r.envelope_value:.6f}")


if __name__ == "__main__":
    main()
