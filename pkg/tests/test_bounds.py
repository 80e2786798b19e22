import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from moreaulab.bounds import (
    BoundReport,
    L1Setup,
    L2Ball,
    TailModel,
    attouch_bounds,
    covering_number,
    default_delta,
    divergence_to_distance,
    envelope_concentration_bound,
    envelope_gap_bound,
    expected_prox_error_bound,
    failure_probability,
    gaussian_robust_constants,
    gaussian_tau,
    glm_concentration_bound,
    glm_envelope_bound,
    glm_graph_bound,
    mcdiarmid_tail,
    psi_star,
    rademacher_linear_bound,
    robust_regression_constants,
    stability_bound,
    stationarity_concentration_bound,
    tail_level,
)
from moreaulab.errors import CorruptionTooHigh, InvalidLink, InvalidParams, NotStronglyConvex
from moreaulab.losses import make_link

# sqrt(2/pi) - 2 * 0.1, evaluated with mpmath at 30 digits
GAUSSIAN_IDENTITY_D = 0.597884560802865355879892119869

pos = st.floats(1e-3, 1e3, allow_nan=False)
ms = st.integers(1, 10**6)


class TestRegularizedERM:
    def test_stability_examples(self):
        assert stability_bound(1, 1, 0.0, 1.0, 10) == pytest.approx(0.2)
        assert stability_bound(0, 0, 0.0, 1.0, 10) == 0.0
        assert stability_bound(1, 2, 1.0, 3.0, 20) == pytest.approx(stability_bound(1, 2, 1.0, 3.0, 10) / 2)

    def test_stability_needs_margin(self):
        with pytest.raises(NotStronglyConvex):
            stability_bound(1, 1, 2.0, 2.0, 5)
        with pytest.raises(InvalidParams):
            stability_bound(1, 1, 0.0, 1.0, 0)

    def test_expected_error_examples(self):
        assert expected_prox_error_bound(1, 0, 1, 8) == pytest.approx(0.25)
        assert envelope_gap_bound(1, 0, 1, 8) == pytest.approx(0.25)
        assert expected_prox_error_bound(0, 0, 1, 8) == 0.0
        assert expected_prox_error_bound(1, 0, 2, 8) == pytest.approx(0.25 / 4)
        assert envelope_gap_bound(1, 0, 2, 8) == pytest.approx(0.25 / 2)

    def test_divergence_to_distance(self):
        assert divergence_to_distance(0.5, 1.0) == pytest.approx(1.0)
        assert divergence_to_distance(0.5, 4.0) == pytest.approx(0.5)

    @given(pos, pos, pos, ms)
    def test_stability_scaling(self, L, rho, gap, m):
        b = stability_bound(L, L, rho, rho + gap, m)
        assert stability_bound(2 * L, 2 * L, rho, rho + gap, m) == pytest.approx(2 * b)
        assert stability_bound(L, L, rho, rho + gap, m + 1) <= b


class TestTails:
    def test_psi_star_examples(self):
        assert psi_star(TailModel("subgaussian", sigma=0.5, nu=0.5), 1.0) == pytest.approx(1.0)
        assert psi_star(TailModel("subgaussian", sigma=0.5, nu=0.5), 0.0) == 0.0
        se = TailModel("subexponential", sigma=0.5, nu=0.5)
        assert psi_star(se, 1.0) == pytest.approx(0.25)
        assert psi_star(se, 4.0) == pytest.approx(2.0)
        # both branches agree at the switch t = 2 eta
        assert psi_star(se, 2.0) == pytest.approx(1.0)
        assert psi_star(TailModel("bounded", sigma=1.0, Lmax=2.0), 2.0) == pytest.approx(0.5)

    def test_psi_star_rejects_negative(self):
        with pytest.raises(InvalidParams):
            psi_star(TailModel("subgaussian", sigma=1.0), -1.0)

    def test_tail_model_validation(self):
        with pytest.raises(InvalidParams):
            TailModel("bounded", sigma=2.0, Lmax=1.0)
        with pytest.raises(InvalidParams):
            TailModel("cauchy")
        with pytest.raises(InvalidParams):
            TailModel("subgaussian", sigma=-1.0)

    def test_mcdiarmid_examples(self):
        assert mcdiarmid_tail(lambda s: s * s, 4, 0.0) == 1.0
        assert mcdiarmid_tail(lambda s: s * s, 4, 4.0) == pytest.approx(math.exp(-4))

    @given(st.floats(0.1, 10), ms)
    def test_mcdiarmid_monotone(self, nu, m):
        model = TailModel("subexponential", sigma=nu)
        vals = [mcdiarmid_tail(lambda s: psi_star(model, s), m, t) for t in (0, 0.1, 1, 10, 100)]
        assert all(0 <= v <= 1 for v in vals)
        assert all(b <= a for a, b in zip(vals, vals[1:]))

    @pytest.mark.parametrize(
        "model",
        [TailModel("subgaussian", sigma=1.0, nu=0.3), TailModel("subexponential", sigma=1.0, nu=1.0), TailModel("bounded", sigma=1, Lmax=3)],
        ids=["sg", "se", "bd"],
    )
    def test_tail_level_is_smallest(self, model):
        m, gamma, copies = 50, 0.05, 7.0
        t = tail_level(model, m, gamma, copies=copies)
        assert copies * math.exp(-m * psi_star(model, t)) <= gamma * (1 + 1e-9)
        assert copies * math.exp(-m * psi_star(model, t * (1 - 1e-6))) > gamma

    def test_tail_level_closed_form_subgaussian(self):
        model = TailModel("subgaussian", sigma=1.0, nu=1.0)
        t = tail_level(model, 100, 0.05)
        assert t == pytest.approx(2.0 * math.sqrt(math.log(20) / 100), rel=1e-12)


class TestCovering:
    def test_examples(self):
        assert covering_number(L2Ball(1, 1), 2.0) == pytest.approx(math.log(2))
        assert covering_number(L2Ball(1, 5), 3.0) <= 5 * math.log(2)
        assert covering_number(L1Setup(1, 4), 32 * math.log(4)) == pytest.approx(4 * math.log(4) * math.log(2))

    def test_errors(self):
        with pytest.raises(InvalidParams):
            covering_number(L1Setup(0.5, 4), 1.0)
        with pytest.raises(InvalidParams):
            covering_number(L2Ball(1, 3), 0.0)

    @given(st.floats(0.01, 10), st.integers(1, 50), st.floats(1e-3, 10))
    def test_monotone_in_delta(self, B, d, delta):
        assert covering_number(L2Ball(B, d), 2 * delta) <= covering_number(L2Ball(B, d), delta)

    def test_default_delta(self):
        assert default_delta(2.0, 4, 16) == pytest.approx(0.25)


class TestConcentration:
    def test_examples(self):
        assert stationarity_concentration_bound(1, 0.5, 0.5, 0, 1, 0, 4) == pytest.approx(1.0)
        assert stationarity_concentration_bound(1, 1, 0, 1, 3, 0, 9) == pytest.approx(math.sqrt(4 / (4 * 9)))

    def test_m_half_scaling_with_default_delta(self):
        rho, d = 1.5, 5
        vals = [stationarity_concentration_bound(1, 0.7, 0.2, rho, 2 * rho, default_delta(rho, d, m), m) for m in (64, 256)]
        assert vals[1] == pytest.approx(vals[0] / 2)

    def test_envelope_version_matches_stationarity(self):
        rho, m, delta = 1.3, 50, 0.01
        a = envelope_concentration_bound(1, 0.5, 0.1, rho, delta, m)
        b = 2 * rho * stationarity_concentration_bound(1, 0.5, 0.1, rho, 2 * rho, delta, m)
        assert a == pytest.approx(b, rel=1e-12)

    def test_failure_probability(self):
        model = TailModel("subgaussian", sigma=1.0)
        p, logp = failure_probability(L2Ball(1, 3), 0.1, 5.0, 100, model)
        assert logp == pytest.approx(3 * math.log(21) - 25.0)
        assert p == pytest.approx(math.exp(logp))
        p, logp = failure_probability(L2Ball(1, 3), 0.1, 0.0, 100, model)
        assert p == 1.0 and logp > 0


class TestGraphs:
    def test_attouch_examples(self):
        assert attouch_bounds(0.3, 0.3, 0, 1) == {"dsym": 0.0, "grad": 0.0, "hausdorff": 0.0}
        r = attouch_bounds(0.01, -0.01, 1.0, 2.0)
        assert r["dsym"] == pytest.approx(0.02)
        assert r["hausdorff"] == pytest.approx(0.1414213562, abs=1e-9)
        assert r["grad"] == pytest.approx(0.2828427125, abs=1e-9)
        assert attouch_bounds(0.04, -0.04, 1.0, 2.0)["hausdorff"] == pytest.approx(2 * r["hausdorff"])

    def test_attouch_errors(self):
        with pytest.raises(InvalidParams):
            attouch_bounds(0, 1, 0, 1)
        with pytest.raises(NotStronglyConvex):
            attouch_bounds(1, 0, 1, 1)

    def test_glm_examples(self):
        assert glm_concentration_bound(1, 1, 1, 8, 0) == pytest.approx(1.0)
        assert glm_concentration_bound(1, 1, 0, 8, 0.3) == pytest.approx(0.3)
        assert glm_concentration_bound(1, 1, 1, 32, 0) == pytest.approx(0.5)
        assert glm_envelope_bound(1, 1, 0, 8, 0, 0.5, 1.0) == 0.0
        assert glm_envelope_bound(1, 1, 1, 32, 0, 0.5, 1.0) == pytest.approx(math.sqrt(2))
        assert glm_envelope_bound(1, 1, 1, 16 * 32, 0, 0.5, 1.0) == pytest.approx(math.sqrt(2) / 2)

    @given(pos, st.integers(1, 5), pos, ms, st.floats(0, 10), st.floats(0, 10), pos)
    def test_envelope_is_attouch_of_functional(self, B, K, moment, m, t, rho, gap):
        rho_bar = rho + gap
        f = glm_concentration_bound(B, K, moment, m, t)
        via = attouch_bounds(f, -f, rho, rho_bar)
        assert abs(glm_envelope_bound(B, K, moment, m, t, rho, rho_bar) - via["grad"]) <= 1e-12 * max(1.0, via["grad"])
        assert abs(glm_graph_bound(B, K, moment, m, t, rho, rho_bar) - via["hausdorff"]) <= 1e-12 * max(1.0, via["hausdorff"])

    @given(pos, pos, ms)
    def test_glm_no_dimension_and_monotone(self, B, moment, m):
        assert glm_concentration_bound(B, 1, moment, m + 1, 0) <= glm_concentration_bound(B, 1, moment, m, 0)


class TestRobust:
    def test_gaussian_identity(self):
        c = gaussian_robust_constants(make_link("identity"), 10, 0.1, 2.0, 1.0, 10_000, 0.0)
        assert c["D"] == pytest.approx(GAUSSIAN_IDENTITY_D, abs=1e-15)
        assert c["large_subgrad"] == pytest.approx(c["D"] / 2)
        assert c["rho"] == 0.0
        assert c["t_max"] == math.inf

    def test_p_fail_zero(self):
        c = robust_regression_constants(1, 1, 0.7, 1, 0.0, 0, 4, 2, 1, 3, 100, 0)
        assert c["D"] == pytest.approx(0.7)

    def test_radius_formula(self):
        c = robust_regression_constants(1, 1, 0.8, 1, 0.1, 0, 4, 2, 1.5, 3, 100, 0.05)
        D = 0.8 - 0.2
        assert c["near_opt_radius"] == pytest.approx(16 / D * (math.sqrt(8 * 4 * 2.25 * 3 / 100) + 0.05))

    def test_rho_and_admissibility(self):
        c = robust_regression_constants(1, 1.5, 0.8, 1, 0.1, 0.125, 5.0, 2, 1, 10, 100, 0)
        assert c["rho"] == pytest.approx(max(2 * 0.125, 2 * 0.125 * 5))
        D = 0.8 - 2 * 0.1 * 1.5
        assert c["t_max"] == pytest.approx(D * D / (256 * c["rho"]))
        assert c["m_min"] == pytest.approx(2**21 * c["rho"] ** 2 * 2.25 * 4 * 10 / D**4)

    def test_errors(self):
        with pytest.raises(CorruptionTooHigh):
            gaussian_robust_constants(make_link("identity"), 10, 0.4, 2.0, 1.0, 100, 0.0)
        with pytest.raises(InvalidLink):
            robust_regression_constants(2, 1, 1, 1, 0.1, 0, 4, 2, 1, 1, 10, 0)
        with pytest.raises(InvalidParams):
            robust_regression_constants(1, 1, 1, 1, 0.1, 0, 4, 1.0, 1, 1, 10, 0)

    def test_tau(self):
        assert gaussian_tau(4, 4) == pytest.approx(9.0)


class TestRademacherBound:
    def test_examples(self):
        assert rademacher_linear_bound([[1, 0], [0, 1]]) == pytest.approx(math.sqrt(2) / 2)
        assert rademacher_linear_bound([[0, 0], [0, 0]]) == 0.0
        assert rademacher_linear_bound([[3, 0], [0, 3]]) == pytest.approx(3 * math.sqrt(2) / 2)
        with pytest.raises(InvalidParams):
            rademacher_linear_bound([])


def test_bound_report_validation():
    r = BoundReport("x", 2.0, {"a": 1}, 0.9)
    assert r.log_rhs == pytest.approx(math.log(2))
    assert BoundReport("z", 0.0).log_rhs == -math.inf
    with pytest.raises(InvalidParams):
        BoundReport("x", -1.0)
    with pytest.raises(InvalidParams):
        BoundReport("x", 1.0, probability=1.5)
