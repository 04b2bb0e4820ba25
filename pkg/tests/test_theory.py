import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import constrained_sup_numeric
from shortcut_shield.errors import ConfigurationError
from shortcut_shield.model import linear_params
from shortcut_shield.simulator import DistributionSpec, core_direction, ideal_spec, sample_dataset, true_delta
from shortcut_shield.theory import (
    THEORY_CHECKS,
    TheoryConfig,
    TheorySettings,
    analytic_bounds,
    bias_tradeoff_demo,
    check_projection_bound,
    constrained_sup,
    eq7_ordering_check,
    eq7_threshold,
    lemma_componentwise_check,
    project_decompose,
    projection_identity_check,
    projection_matrix,
    rademacher_estimate,
    run_theory,
    structural_gap_check,
)
from shortcut_shield.trainer import MethodSpec, TrainConfig, objective_for, train_many
from shortcut_shield.weights import compute_weights, estimate_stats

GRID = [round(0.1 * k, 1) for k in range(1, 10)]


def constant_model(d):
    return linear_params(np.zeros(d))


class TestProjection:
    def test_axis_example(self):
        wp, wq = project_decompose([3.0, 4.0], [1.0, 0.0])
        np.testing.assert_array_equal(wp, [3.0, 0.0])
        np.testing.assert_array_equal(wq, [0.0, 4.0])

    def test_orthogonal_w(self):
        wp, _ = project_decompose([0.0, 2.0], [5.0, 0.0])
        np.testing.assert_array_equal(wp, 0.0)

    def test_zero_delta(self):
        with pytest.raises(ConfigurationError):
            project_decompose([1.0, 2.0], [0.0, 0.0])

    @given(seed=st.integers(0, 10**6))
    @settings(max_examples=100, deadline=None)
    def test_identities(self, seed):
        rng = np.random.default_rng(seed)
        w, delta = rng.standard_normal(20), rng.standard_normal(20)
        P = projection_matrix(delta)
        np.testing.assert_allclose(P @ P @ w, P @ w, atol=1e-12)
        wp, wq = project_decompose(w, delta)
        np.testing.assert_allclose(wp, P @ w, atol=1e-12)
        assert abs(wp @ wq) < 1e-10
        assert abs(np.linalg.norm(wp) - abs(w @ delta) / np.linalg.norm(delta)) < 1e-10

    def test_identity_check_report(self):
        rep = projection_identity_check(100, 20, 0)
        assert rep.satisfied and rep["max_norm_error"] < 1e-10

    def test_bound_identity_instance(self):
        from shortcut_shield.simulator import Dataset

        x = np.array([[0.5, 0.0], [0.5, 1.0], [-0.5, 0.0], [-0.5, -1.0]])
        ds = Dataset(x, np.array([0, 1, 0, 1]), np.array([0, 0, 1, 1]))
        rep = check_projection_bound(linear_params([3.0, 4.0]), ds)
        # group mean gap is (1, 1)
        assert rep.satisfied
        assert rep["tau_hat"] == pytest.approx(7.0)
        assert rep["w_perp_norm"] * rep["delta_norm"] == pytest.approx(rep["tau_hat"], abs=1e-12)

    def test_core_only_model_has_small_perp(self):
        spec = DistributionSpec(rho=0.5)
        ds = sample_dataset(spec, 4000, 0)
        rep = check_projection_bound(linear_params(core_direction(spec)), ds)
        # sampling error of the core block of delta_hat is ~ sqrt(10 * 4 / n)
        assert rep["w_perp_norm"] < 4 * math.sqrt(4 / 4000)
        assert rep.satisfied

    def test_rejects_mlp(self):
        from shortcut_shield.model import init_params

        ds = sample_dataset(DistributionSpec(d_core=2, d_shortcut=2), 100, 0)
        with pytest.raises(ConfigurationError):
            check_projection_bound(init_params("mlp", 4, hidden=3), ds)


class TestRademacher:
    def test_eq7_arithmetic(self):
        assert eq7_threshold(1.0, 1.0, 3.0, 3.0) == pytest.approx(math.sqrt(10) - 1, abs=1e-12)
        assert eq7_threshold(1.0, 1.0, 3.0, 3.0) == pytest.approx(2.16228, abs=1e-5)

    @pytest.mark.parametrize("seed", range(10))
    def test_closed_form_matches_numeric(self, seed):
        rng = np.random.default_rng(seed)
        d = 6
        s, delta = rng.standard_normal(d), rng.standard_normal(d)
        A = float(rng.uniform(0.5, 2))
        tau = float(rng.uniform(0, A * np.linalg.norm(delta)))
        closed = constrained_sup(s, delta, A, tau)[0]
        assert abs(closed - constrained_sup_numeric(s, delta, A, tau)) < 1e-6

    def test_tau_zero(self, rng):
        s, delta = rng.standard_normal((20, 5)), rng.standard_normal(5)
        e = delta / np.linalg.norm(delta)
        s_par = s - np.outer(s @ e, e)
        np.testing.assert_allclose(constrained_sup(s, delta, 2.0, 0.0), 2 * np.linalg.norm(s_par, axis=1), atol=1e-12)
        assert np.all(constrained_sup(s, delta, 2.0, 0.0) <= 2 * np.linalg.norm(s, axis=1))

    def test_vacuous_warning(self, rng):
        x = rng.standard_normal((50, 3))
        delta = np.array([1.0, 0.0, 0.0])
        with pytest.warns(RuntimeWarning, match="vacuous"):
            rep = rademacher_estimate(x, TheoryConfig(A=1.0, tau=5.0, n_rademacher_draws=20), delta=delta)
        assert rep["vacuous"] and rep["r_l2"] == pytest.approx(rep["r_l2mmd"])

    def test_default_simulator(self):
        spec = DistributionSpec(rho=0.5)
        ds = sample_dataset(spec, 500, 0)
        x = ds.x - ds.x.mean(axis=0)
        delta = true_delta(spec)
        cfg = TheoryConfig(A=1.0, n_rademacher_draws=200)
        rhs = rademacher_estimate(x, cfg, delta=delta)["eq7_rhs"]
        rep = rademacher_estimate(x, TheoryConfig(A=1.0, tau=0.5 * rhs, n_rademacher_draws=200), delta=delta)
        assert rep.satisfied and rep["pointwise_dominance"]
        assert rep["r_l2mmd"] < rep["r_l2"]
        assert json.loads(rep.to_json())["name"] == "rademacher"

    def test_empirical_delta_needs_v(self, rng):
        with pytest.raises(ConfigurationError):
            rademacher_estimate(rng.standard_normal((10, 2)), TheoryConfig(delta_source="empirical"))

    def test_config_validation(self):
        with pytest.raises(ConfigurationError):
            TheoryConfig(A=0.0)
        with pytest.raises(ConfigurationError):
            TheoryConfig(delta_source="oracle")

    def test_eq7_ordering(self):
        rhs = eq7_threshold(1.0, 2.0, 5.0, 4.0)
        rep = eq7_ordering_check(1.0, 2.0, 5.0, 4.0, np.linspace(0, 2 * rhs, 50))
        assert rep.satisfied
        for row in rep["rows"]:
            if row["tau"] < rhs - 1e-9:
                assert row["smaller"]

    def test_bounds_at_threshold_coincide(self):
        rhs = eq7_threshold(1.0, 2.0, 5.0, 4.0)
        a, b = analytic_bounds(1.0, 2.0, 5.0, 4.0, rhs, 7)
        assert a == pytest.approx(b, rel=1e-12)


class TestStructuralGap:
    def test_constant_predictor(self):
        spec = DistributionSpec(rho=0.9)
        rep = structural_gap_check(constant_model(spec.dim), spec, GRID, 2000, 0)
        assert rep["tau_hat"] == pytest.approx(0.0, abs=1e-7)
        assert abs(rep["max_gap"]) < 1e-12
        assert rep.satisfied and not rep.strict

    def test_core_only_oracle(self):
        spec = DistributionSpec(rho=0.9)
        rep = structural_gap_check(linear_params(0.5 * core_direction(spec)), spec, GRID, 10000, 0)
        assert abs(rep["max_gap"]) <= rep["slack"]

    def test_shortcut_model_violates(self):
        spec = DistributionSpec(rho=0.9)
        w = np.zeros(spec.dim)
        w[spec.d_core :] = 0.3
        rep = structural_gap_check(linear_params(w), spec, GRID, 5000, 0)
        assert rep["max_gap"] > 0.1


class TestLemma:
    def test_constant(self):
        spec = DistributionSpec(rho=0.5)
        ds = sample_dataset(spec, 2000, 0)
        for y in (0, 1):
            rep = lemma_componentwise_check(constant_model(spec.dim), ds, y)
            assert rep["lhs"] == pytest.approx(0.0, abs=1e-15) and rep.satisfied

    def test_core_only(self):
        spec = DistributionSpec(rho=0.5)
        ds = sample_dataset(spec, 20000, 1)
        for y in (0, 1):
            rep = lemma_componentwise_check(linear_params(0.5 * core_direction(spec)), ds, y)
            assert abs(rep["lhs"]) <= rep["slack"]

    def test_bad_y(self):
        spec = DistributionSpec()
        with pytest.raises(ConfigurationError):
            lemma_componentwise_check(constant_model(spec.dim), sample_dataset(spec, 100, 0), 2)


class TestTradeoff:
    def test_rejects_ideal_source(self):
        with pytest.raises(ConfigurationError):
            bias_tradeoff_demo(DistributionSpec(rho=0.5), [0.0], 0)

    def test_alpha_zero_rows_are_l2_baselines(self):
        spec = DistributionSpec(rho=0.9, mu_core=0.25)
        cfg = TrainConfig(lr=0.01, epochs=2)
        rep = bias_tradeoff_demo(spec, [0.0], 0, n_train=1000, n_eval=2000, train_cfg=cfg)
        ds = sample_dataset(spec, 1000, 0)
        w = compute_weights(estimate_stats(ds), ds)
        from shortcut_shield.evaluation import auroc, derive_seed
        from shortcut_shield.model import forward

        p0 = sample_dataset(ideal_spec(spec), 2000, derive_seed(0, 10_000))
        for name, weighted in (("L2", False), ("wL2", True)):
            m = MethodSpec(name)
            fit = train_many(ds, w, m, cfg, [objective_for(m)])[0]
            row = [r for r in rep["rows"] if r["weighted"] == weighted][0]
            assert row["train_p0_auroc"] == pytest.approx(auroc(forward(fit.params, p0.x)[1], p0.y), abs=1e-12)


def test_run_theory_smoke():
    settings_ = TheorySettings(
        seeds=[0], n_rademacher=200, n_rademacher_draws=20, n_ideal=400, n_gap=1000, tradeoff_alphas=[0.0, 1e3]
    )
    reports = run_theory(DistributionSpec(rho=0.9), settings_, TrainConfig(lr=0.01, epochs=2))
    assert [r.name for r in reports] == list(THEORY_CHECKS)
    for r in reports:
        d = json.loads(r.to_json())
        assert set(d) == {"name", "inputs", "statistics", "satisfied", "strict"}
    assert reports[0].satisfied


def test_settings_from_dict():
    s = TheorySettings.from_dict({"seeds": [3], "gamma": 10.0})
    assert s.seeds == [3] and s.gamma == 10.0
    with pytest.raises(ConfigurationError):
        TheorySettings.from_dict({"checks": ["astrology"]})
