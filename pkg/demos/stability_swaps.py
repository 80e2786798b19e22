"""One-sample swaps on a constrained phase-retrieval sample.

Shows the measured change of the regularized minimizer next to the
stability bound for a handful of swaps, then the worst ratio over 50.
"""

import numpy as np

from moreaulab import Euclidean, Regularizer
from moreaulab.experiments import LossConfig, random_swaps, stability_check, swap_modulus


def main():
    cfg = LossConfig("phase", 3, {"noise": 0.0}, reg=Regularizer.ball(2.0), mega=64)
    S = cfg.sample(20, 7)
    swaps = random_swaps(cfg, S, 50, 11)
    rho = swap_modulus(cfg, S, swaps)
    res = stability_check(cfg, Euclidean(3), 2 * rho + 1, np.array([0.5, -0.3, 0.2]), S, swaps)
    print(f"rho = {rho:.4f}, rho_bar = {2 * rho + 1:.4f}")
    for r in res[:5]:
        print(f"swap i={r.index:2d}  measured={r.measured:.3e}  bound={r.bound:.3e}")
    print(f"all passed: {all(r.passed for r in res)}, worst ratio {max(r.measured / r.bound for r in res):.3f}")


if __name__ == "__main__":
    main()
