"""Prox-point runs on a corrupted robust-regression sample, classified by the landscape dichotomy."""

from collections import Counter

from moreaulab.experiments import LossConfig, robust_landscape


def main():
    cfg = LossConfig("robust", 10, {"p_fail": 0.1, "corruption": "cauchy", "link": "identity"}, mega=2)
    runs, consts = robust_landscape(cfg, 10**4, 10)
    print(f"D = {consts['D']:.5f}, near-optimality radius = {consts['near_opt_radius']:.3f}")
    print(Counter(r.classification for r in runs))
    dists = [r.dist_to_xbar for r in runs if r.dist_to_xbar == r.dist_to_xbar]
    if dists:
        print(f"largest distance to xbar: {max(dists):.2e}")


if __name__ == "__main__":
    main()
