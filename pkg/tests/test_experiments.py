import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from moreaulab.bounds import attouch_bounds, rademacher_linear_bound, stability_bound
from moreaulab.bregman import Euclidean, PolyGrowth, l1_setup
from moreaulab.composite import Composite, LinearResiduals, SineRipple
from moreaulab.errors import InvalidParams, NetTooLarge, SchemaError
from moreaulab.experiments import (
    ExperimentReport,
    LossConfig,
    Region,
    attouch_check,
    build_net,
    derive_seed,
    envelope_rate_experiment,
    functional_rate_experiment,
    graph_hausdorff,
    mcdiarmid_experiment,
    rademacher_estimate,
    random_swaps,
    rate_fit,
    robust_landscape,
    stability_check,
    stability_report,
    sup_prox_deviation,
    swap_modulus,
    trial_seed,
)
from moreaulab.experiments.landscape import NEAR_OPTIMAL, THEORY_VIOLATION, landscape_report
from moreaulab.experiments.pool import parallel_map, resolve_threads
from moreaulab.experiments.report import HEADER, read_rows, rows_to_csv
from moreaulab.experiments.seeding import splitmix64
from moreaulab.losses import Dataset, Regularizer


def absolute(shift=0.0):
    return Composite(1, [LinearResiduals(np.eye(1), np.full(1, shift), np.ones(1))])


class TestSeeding:
    def test_splitmix_reference_vectors(self):
        # published outputs of the SplitMix64 generator
        assert splitmix64(0) == 0xE220A8397B1DCDAF
        assert splitmix64(1234567) == 6457827717110365317
        assert splitmix64((1234567 + 0x9E3779B97F4A7C15) % 2**64) == 3203168211198807973

    def test_derive_seed(self):
        assert derive_seed(5, 1, 2) == derive_seed(5, 1, 2)
        assert derive_seed(5, 1, 2) != derive_seed(5, 2, 1)
        assert derive_seed(5, "a") != derive_seed(5, "b")
        assert trial_seed(3, 4, 64) == derive_seed(3, 4, 64)
        seeds = {trial_seed(0, t, 64) for t in range(1000)}
        assert len(seeds) == 1000


class TestPool:
    def test_order_preserved(self):
        xs = list(range(12))
        assert parallel_map(math.sqrt, xs, threads=2) == [math.sqrt(x) for x in xs]

    def test_env_override(self, monkeypatch):
        monkeypatch.setenv("MOREAULAB_THREADS", "3")
        assert resolve_threads(8) == 3
        monkeypatch.delenv("MOREAULAB_THREADS")
        assert resolve_threads(None) == 1


class TestNets:
    def test_one_dimensional_lattice(self):
        net = build_net(Region(1.0, 1), Euclidean(1), 1.0)
        assert sorted(net.points[:, 0].tolist()) == [-1.0, 0.0, 1.0]

    def test_single_point(self):
        net = build_net(Region(1.0, 3), Euclidean(3), 2.0)
        assert len(net) == 1
        np.testing.assert_array_equal(net.points[0], np.zeros(3))

    @pytest.mark.parametrize(
        "phi,region",
        [
            (Euclidean(2), Region(1.0, 2)),
            (Euclidean(3), Region(0.5, 3, "box")),
            (PolyGrowth(2, (1.0, 0.3)), Region(1.0, 2)),
            (Euclidean(2), Region(1.0, 2, center=(0.3, -0.2))),
        ],
        ids=["ball", "box", "poly", "shifted"],
    )
    def test_probe_verification(self, phi, region):
        net = build_net(region, phi, 0.5)
        assert verify(net, phi) <= 0.5

    def test_l1_setup_net(self):
        phi = l1_setup(3)
        net = build_net(Region(1.0, 3, "l1"), phi, 6.0)
        assert verify(net, phi, 2000) <= 6.0

    def test_cap(self):
        with pytest.raises(NetTooLarge):
            build_net(Region(1.0, 6), Euclidean(6), 0.01, cap=1000)
        with pytest.raises(InvalidParams):
            build_net(Region(1.0, 2), Euclidean(2), 0.0)


def verify(net, phi, n=10_000):
    from moreaulab.experiments import verify_net

    return verify_net(net, phi, n)


class TestRateFit:
    def test_examples(self):
        f = rate_fit([(10, 1.0), (100, 10**-0.5), (1000, 0.1)])
        assert f.slope == pytest.approx(-0.5, abs=1e-12)
        assert f.r_squared == pytest.approx(1.0, abs=1e-12)
        assert rate_fit([(10, 2.0), (100, 2.0), (1000, 2.0)]).slope == pytest.approx(0.0, abs=1e-12)
        assert rate_fit([(10, 1.0), (160, 0.5)]).slope == pytest.approx(math.log(0.5) / math.log(16))

    def test_errors(self):
        with pytest.raises(InvalidParams):
            rate_fit([(10, 1.0), (10, 2.0)])
        with pytest.raises(InvalidParams):
            rate_fit([(10, 1.0), (20, 0.0)])

    @given(st.floats(-2, 2), st.floats(-5, 5), st.lists(st.integers(2, 10**6), min_size=3, max_size=8, unique=True))
    def test_power_law_recovered(self, slope, icpt, ms):
        f = rate_fit([(m, math.exp(icpt) * m**slope) for m in ms])
        assert f.slope == pytest.approx(slope, abs=1e-10)
        assert f.predict(ms[0]) == pytest.approx(math.exp(icpt) * ms[0] ** slope, rel=1e-9)

    def test_residual_orthogonality(self, rng):
        ms = [2**k for k in range(4, 12)]
        pts = [(m, m**-0.4 * math.exp(rng.normal(0, 0.1))) for m in ms]
        f = rate_fit(pts)
        x = np.log(ms)
        r = np.log([v for _, v in pts]) - (f.intercept + f.slope * x)
        assert abs(r.sum()) < 1e-12
        assert abs((r * x).sum()) < 1e-11


class TestReport:
    def test_csv_roundtrip(self):
        rep = ExperimentReport("demo")
        rep.add(0, 10, 123, 0.1, 0.2)
        rep.add(1, 10, 124, 0.3, 0.2, 0.05)
        text = rep.to_csv()
        assert text.splitlines()[0] == ",".join(HEADER)
        rows = read_rows(text)
        assert rows == rep.rows
        assert rows_to_csv(rows) == text
        assert not rep.ok and len(rep.failures) == 1

    def test_soft_gamma(self):
        rep = ExperimentReport("demo", hard=False, gamma=0.5)
        rep.add(0, 1, 1, 2.0, 1.0)
        rep.add(1, 1, 1, 0.0, 1.0)
        assert rep.ok

    def test_schema_errors(self):
        with pytest.raises(SchemaError):
            read_rows("")
        with pytest.raises(SchemaError):
            read_rows("a,b\n1,2\n")
        with pytest.raises(SchemaError):
            read_rows(",".join(HEADER) + "\nx,1,2\n")


@pytest.fixture(scope="module")
def phase_setup():
    cfg = LossConfig("phase", 2, {"noise": 0.0}, reg=Regularizer.ball(1.5), mega=64)
    S = cfg.sample(20, 3)
    swaps = random_swaps(cfg, S, 50, 5)
    rho = swap_modulus(cfg, S, swaps)
    return cfg, S, swaps, rho


class TestStability:
    def test_all_swaps_pass(self, phase_setup):
        cfg, S, swaps, rho = phase_setup
        res = stability_check(cfg, Euclidean(2), rho + 1, np.array([0.4, -0.2]), S, swaps)
        assert len(res) == 50
        assert all(r.passed for r in res)

    def test_identity_swap(self, phase_setup):
        cfg, S, _, rho = phase_setup
        swaps = [(i, S.record(i)) for i in range(3)]
        for r in stability_check(cfg, Euclidean(2), 2 * rho + 1, np.zeros(2), S, swaps, rho=rho):
            assert r.measured <= r.slack

    def test_bound_halves_with_duplicated_sample(self, phase_setup):
        cfg, S, swaps, rho = phase_setup
        S2 = S.take(list(range(S.m)) * 2)
        a = stability_check(cfg, Euclidean(2), 2 * rho + 1, np.zeros(2), S, swaps[:5], rho=rho)
        b = stability_check(cfg, Euclidean(2), 2 * rho + 1, np.zeros(2), S2, swaps[:5], rho=rho)
        for x, y in zip(a, b):
            assert y.bound == pytest.approx(x.bound / 2)

    def test_bound_is_calculator(self, phase_setup):
        cfg, S, swaps, rho = phase_setup
        L = cfg.loss.lipschitz(S, 1.5)
        (r,) = stability_check(cfg, Euclidean(2), 2 * rho + 1, np.zeros(2), S, swaps[:1], rho=rho)
        i, z = swaps[0]
        Lp = cfg.loss.lipschitz(S.replace(i, z).take([i]), 1.5)[0]
        assert r.bound == pytest.approx(stability_bound(L[i], Lp, rho, 2 * rho + 1, 20))

    def test_poly_geometry(self, phase_setup):
        cfg, S, swaps, _ = phase_setup
        phi = PolyGrowth(2, (1.0, 0.2))
        rho = swap_modulus(cfg, S, swaps[:10]) / phi.alpha_l2
        res = stability_check(cfg, phi, 2 * rho + 1, np.zeros(2), S, swaps[:10], rho=rho)
        assert all(r.passed for r in res)

    def test_report_deterministic(self, phase_setup):
        cfg, S, swaps, rho = phase_setup
        a = stability_report(cfg, Euclidean(2), 2 * rho + 1, np.zeros(2), S, swaps[:5])
        b = stability_report(cfg, Euclidean(2), 2 * rho + 1, np.zeros(2), S, swaps[:5])
        assert a.to_csv() == b.to_csv()
        assert a.ok


def grid_prox(h, x, rho_bar, width=0.6, step=1e-5):
    ys = np.arange(x - width, x + width, step)
    vals = h(ys) + 0.5 * rho_bar * (ys - x) ** 2
    return ys[np.argmin(vals)]


class TestAttouch:
    def test_identical(self):
        h = Composite(1, smooth=[SineRipple(1e-2)])
        r = attouch_check(h, h, Euclidean(1), 2.0, np.linspace(-1, 1, 20), 0.0, 0.0)
        assert r["max_dsym"] <= r["slack_dsym"]
        assert r["dsym_pass"] and r["grad_pass"]

    def test_sine_against_grid_oracle(self):
        dl = 1e-2
        g, h = Composite(1), Composite(1, smooth=[SineRipple(dl)])
        probes = np.linspace(-1, 1, 41)
        r = attouch_check(g, h, Euclidean(1), 2.0, probes, dl, -dl)
        assert r["bound_report"]["dsym"] == pytest.approx(2 * dl / (2.0 - 1.0))
        worst = max((x - grid_prox(lambda y: dl * np.sin(y / math.sqrt(dl)), x, 2.0)) ** 2 for x in probes)
        assert r["max_dsym"] == pytest.approx(worst, abs=1e-4 * math.sqrt(worst) + 1e-9)
        assert r["dsym_pass"]
        assert r["max_dsym"] >= 0.05 * r["bound_report"]["dsym"]

    def test_translates_within_attouch(self):
        # |y| and |y - 0.05| differ by at most 0.05 in sup norm
        r = attouch_check(absolute(), absolute(0.05), Euclidean(1), 1.0, np.linspace(-2, 2, 30), 0.05, -0.05, rho=0.0)
        assert r["dsym_pass"] and r["grad_pass"]


class TestHausdorff:
    def test_identical(self):
        r = graph_hausdorff(absolute(), absolute(), Region(1.0, 1), 1.0, 16)
        assert r["estimate"] <= r["solver_slack"] + 1e-12

    def test_translate(self):
        vals = [graph_hausdorff(absolute(), absolute(0.1), Region(1.5, 1), 1.0, n)["estimate"] for n in (16, 32, 64)]
        for v in vals:
            assert v == pytest.approx(0.1, abs=1e-5)
        assert all(b <= a + 1e-9 for a, b in zip(vals, vals[1:]))

    def test_within_attouch_bound(self):
        est = graph_hausdorff(absolute(), absolute(0.1), Region(1.5, 1), 1.0, 32)["estimate"]
        assert est <= attouch_bounds(0.1, -0.1, 0.0, 1.0)["hausdorff"]


class TestDeviation:
    def test_point_mass_population(self):
        cfg = LossConfig("glm", 1, {"K": 1}, mega=2)
        pop = Dataset("glm", {"phi": np.zeros((1, 1, 1)), "target": np.zeros((1, 1))})
        one = Dataset("glm", {"phi": np.ones((1, 1, 1)), "target": np.ones((1, 1))})
        (res,) = sup_prox_deviation(cfg, Euclidean(1), 1.0, [[0.0]], 1, 1, population=pop, sampler=lambda m, s: one)
        assert res.sup_dev == pytest.approx(1.0, abs=1e-6)

    def test_population_itself(self):
        cfg = LossConfig("glm", 2, {"K": 1, "noise": 0.3}, mega=512)
        pts = build_net(Region(0.5, 2), Euclidean(2), 0.5).points
        res = sup_prox_deviation(cfg, Euclidean(2), 2.0, pts, 512, 2, sampler=lambda m, s: cfg.population_data())
        for r in res:
            assert r.sup_dev <= 2 * math.sqrt(2 * 1e-8) + 1e-12

    def test_permutation_invariance(self):
        cfg = LossConfig("glm", 2, {"K": 2, "noise": 0.3}, mega=256)
        pts = np.array([[0.1, 0.2], [-0.3, 0.0]])
        base = sup_prox_deviation(cfg, Euclidean(2), 2.0, pts, 40, 3, root_seed=4)

        def permuted(m, s):
            S = cfg.sample(m, s)
            return S.take(np.random.default_rng(1).permutation(m))

        perm = sup_prox_deviation(cfg, Euclidean(2), 2.0, pts, 40, 3, root_seed=4, sampler=permuted)
        for a, b in zip(base, perm):
            assert abs(a.sup_dev - b.sup_dev) <= a.slack + b.slack

    def test_median_decreases_with_m(self):
        cfg = LossConfig("glm", 2, {"K": 1, "noise": 0.5}, mega=2**15)
        pts = np.array([[0.0, 0.0], [0.2, -0.1]])
        med = [np.median([r.sup_dev for r in sup_prox_deviation(cfg, Euclidean(2), 2.0, pts, m, 20)]) for m in (64, 256)]
        assert med[1] < med[0]


class TestRateExperiments:
    def test_envelope_small(self):
        cfg = LossConfig("glm", 2, {"K": 1, "noise": 0.5}, mega=2**12)
        rep = envelope_rate_experiment(cfg, Euclidean(2), [64, 256], 3, 0.05)
        assert len(rep.rows) == 6
        for key in ("slope", "r_squared", "oracle_noise_floor", "min_median_over_floor", "solver_errors"):
            assert key in rep.summary
        assert rep.summary["solver_errors"] == 0
        again = envelope_rate_experiment(cfg, Euclidean(2), [64, 256], 3, 0.05)
        assert rep.to_csv() == again.to_csv()

    def test_functional_small(self):
        cfg = LossConfig("glm", 2, {"K": 1, "noise": 0.5}, mega=2**12)
        rep = functional_rate_experiment(cfg, [64, 256, 1024], 10, 0.5)
        assert len(rep.rows) == 30
        assert all(r.bound > 0 for r in rep.rows)
        assert rep.ok


class TestRademacher:
    def test_exact(self):
        r = rademacher_estimate("linear", [[1, 0], [0, 1]], 100)
        assert r["exact"] and r["estimate"] == math.sqrt(2) / 2

    def test_antipodal(self):
        z = np.array([3.0, 4.0])
        r = rademacher_estimate("linear", [z, -z], 10)
        assert r["estimate"] == pytest.approx(2.5)

    def test_bound_on_random_samples(self, rng):
        for k in range(50):
            S = rng.normal(size=(rng.integers(5, 40), 3))
            r = rademacher_estimate("linear", S, 400, seed=k)
            assert r["estimate"] <= rademacher_linear_bound(S) + 3 * r["std_err"]

    def test_errors(self):
        with pytest.raises(InvalidParams):
            rademacher_estimate("quadratic", [[1.0]], 10)
        with pytest.raises(InvalidParams):
            rademacher_estimate("linear", np.zeros((0, 2)), 10)


class TestMcDiarmid:
    def test_phase_sphere(self):
        cfg = LossConfig("phase", 2, {"design": "sphere", "noise": 0.1}, reg=Regularizer.ball(1.0), mega=2**12)
        r = mcdiarmid_experiment(cfg, Euclidean(2), 9.0, np.array([0.3, 0.2]), 50, 200, lmax_z=4.0, rho=4.0)
        assert r.ok
        assert r.bounds[0] == 1.0 and r.bound_tail(0.0) == 1.0
        assert np.all(np.diff(r.bounds) <= 0)

    def test_degenerate_loss(self):
        # every record is zero, so g(S) is the same for every sample
        zero = Dataset("glm", {"phi": np.zeros((30, 1, 2)), "target": np.zeros((30, 1))})

        class Const(LossConfig):
            def sample(self, m, seed):
                return zero.take(list(range(m)))

        c = Const("glm", 2, {"K": 1}, mega=2**10)
        r = mcdiarmid_experiment(c, Euclidean(2), 2.0, np.array([0.3, 0.1]), 30, 20, lmax_z=1.0, rho=0.0)
        assert np.ptp(r.values) <= 2 * r.slack + 1e-12
        assert all(r.empirical_tail(t) == 0.0 for t in r.grid[1:] if t > r.slack)


class TestLandscape:
    def test_clean_data_near_optimal(self):
        cfg = LossConfig("robust", 3, {"p_fail": 0.0, "noise": 0.0, "link": "identity"}, mega=2)
        runs, consts = robust_landscape(cfg, 2000, 4)
        assert all(r.classification == NEAR_OPTIMAL for r in runs)
        assert all(r.dist_to_xbar <= 1e-4 for r in runs)
        rep = landscape_report(runs, consts, 2000, 0)
        assert rep.ok and rep.summary["near_optimal_fraction"] == 1.0

    def test_no_violation_with_outliers(self):
        cfg = LossConfig("robust", 3, {"p_fail": 0.1, "corruption": "cauchy", "link": "identity"}, mega=2)
        runs, _ = robust_landscape(cfg, 3000, 4)
        assert not any(r.classification == THEORY_VIOLATION for r in runs)
