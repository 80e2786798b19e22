"""Small version of the GLM rate experiments (a few minutes on one core).

Writes ``glm_rates.svg`` next to this script with the envelope-gradient
deviation against m.
"""

from pathlib import Path

from moreaulab import Euclidean
from moreaulab.experiments import LossConfig, envelope_rate_experiment, functional_rate_experiment
from moreaulab.plotting import render_svg, series


def main():
    cfg = LossConfig("glm", 5, {"K": 1, "noise": 0.5}, mega=2**16)
    ms = [2**k for k in range(6, 12)]
    env = envelope_rate_experiment(cfg, Euclidean(5), ms, 10, 0.01)
    fun = functional_rate_experiment(cfg, ms, 10, 0.01)
    for rep in (env, fun):
        s = rep.summary
        print(f"{rep.experiment:16s} slope {s['slope']:+.3f}  r2 {s['r_squared']:.3f}  rows within bound {len(rep.rows) - len(rep.failures)}/{len(rep.rows)}")
    svg, _ = render_svg(series(env.rows), "envelope-gradient deviation vs m")
    out = Path(__file__).with_name("glm_rates.svg")
    out.write_text(svg)
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
