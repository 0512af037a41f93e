import numpy as np
import pytest

from srl.errors import ConfigError, DimensionError, DivergenceError, EmptyDataError
from srl.estimators import (Dataset, FitConfig, empirical_mse, fit, objective, penalty,
                            predict_truncated, project_kappa_ball, regularizer_equivalence_report)
from srl.network import Parameterization, evaluate, path_norm, rescale_balanced

from conftest import random_net

RELU = Parameterization.from_atoms(1, [(1.0, (1.0, 0.0))])
TOY = Dataset([[0.0], [1.0], [-1.0]], [0.0, 1.0, 0.0], 1.0)
DATASETS = {
    "relu": TOY,
    "zeros": Dataset([[0.0], [0.5], [-0.5]], [0.0, 0.0, 0.0], 1.0),
    "constant": Dataset([[0.0], [0.5]], [1.0, 1.0], 1.0),
}


class TestDataset:
    def test_validation(self):
        with pytest.raises(EmptyDataError):
            Dataset(np.zeros((0, 1)), [], 1.0)
        with pytest.raises(DimensionError):
            Dataset([[0.0], [0.1]], [1.0], 1.0)
        with pytest.raises(ConfigError):
            Dataset([[2.0]], [0.0], 1.0)
        with pytest.raises(ConfigError):
            Dataset([[0.0]], [3.0], 1.0)

    def test_read_only(self):
        with pytest.raises(ValueError):
            TOY.y[0] = 1.0


class TestEmpiricalMSE:
    def test_zero_net(self):
        assert empirical_mse(Parameterization.zero(1), Dataset([[0.0], [0.5]], [1.0, 1.0], 1.0)) == 1.0

    def test_exact_interpolation(self):
        assert empirical_mse(RELU, Dataset([[0.0], [1.0]], [0.0, 1.0], 1.0)) == 0.0

    def test_single_residual(self):
        assert empirical_mse(RELU, Dataset([[1.0]], [0.0], 1.0)) == 1.0

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            empirical_mse(Parameterization.zero(2), TOY)


class TestProjection:
    def test_halves_outer_weights(self):
        net = Parameterization.from_atoms(1, [(4.0, (1.0, 0.0)), (-6.0, (0.0, 1.0))])
        proj = project_kappa_ball(net, 5.0)
        np.testing.assert_allclose(proj.outer, [2.0, -3.0])
        assert path_norm(proj) == pytest.approx(5.0, abs=1e-12)

    def test_interior_unchanged(self):
        net = Parameterization.from_atoms(1, [(3.0, (1.0, 0.0))])
        assert project_kappa_ball(net, 5.0) is net

    def test_zero_net(self):
        assert path_norm(project_kappa_ball(Parameterization.zero(1, 2), 1.0)) == 0.0

    def test_kappa_is_min(self, rng):
        for _ in range(200):
            net = random_net(rng, 2, 6)
            M = float(rng.uniform(0.1, 10))
            assert path_norm(project_kappa_ball(net, M)) == pytest.approx(min(path_norm(net), M), abs=1e-12)

    def test_bad_radius(self):
        with pytest.raises(ConfigError):
            project_kappa_ball(RELU, 0.0)


class TestFitConfig:
    @pytest.mark.parametrize("kwargs", [
        {"width": 0, "M": 1.0},
        {"width": 2, "mode": "bogus"},
        {"width": 2, "mode": "constrained"},
        {"width": 2, "mode": "path"},
        {"width": 2, "M": 1.0, "step_size": 0.0},
        {"width": 2, "M": 1.0, "batch": 0},
    ])
    def test_rejects(self, kwargs):
        with pytest.raises(ConfigError):
            FitConfig(**kwargs)


class TestFit:
    @pytest.mark.parametrize("step", [0.05, 0.1, 0.2])
    def test_feasible_relu_reached(self, step):
        res = fit(TOY, FitConfig(width=4, mode="constrained", M=2.0, step_size=step))
        assert res.train_mse <= 1e-4
        assert path_norm(res.net) <= 2.0 + 1e-12

    def test_zero_labels_path_mode(self):
        lam = 0.1
        res = fit(DATASETS["zeros"], FitConfig(width=4, mode="path", lam=lam))
        assert res.objective <= lam * 1e-6

    def test_l2_output_is_balanced(self):
        lam = 0.05
        res = fit(TOY, FitConfig(width=6, mode="l2", lam=lam, tolerance=0.0, max_epochs=4000))
        bal = rescale_balanced(res.net)
        path_obj = empirical_mse(bal, TOY) + lam * path_norm(bal)
        assert path_obj == pytest.approx(res.objective, abs=1e-9)

    @pytest.mark.parametrize("name", sorted(DATASETS))
    def test_monotone_descent_constrained(self, name):
        res = fit(DATASETS[name], FitConfig(width=4, mode="constrained", M=2.0))
        assert np.max(np.diff(res.history)) <= 1e-10

    @pytest.mark.parametrize("mode,kw", [("constrained", {"M": 2.0}), ("path", {"lam": 0.01}),
                                         ("l2", {"lam": 0.01})])
    def test_objective_consistent(self, mode, kw):
        cfg = FitConfig(width=5, mode=mode, max_epochs=300, **kw)
        res = fit(TOY, cfg)
        assert objective(res.net, TOY, cfg) == pytest.approx(res.objective, abs=1e-10)
        assert res.train_mse + res.penalty_value == pytest.approx(res.objective, abs=1e-15)

    def test_deterministic_and_thread_independent(self):
        cfg = FitConfig(width=4, mode="constrained", M=2.0, restarts=3, max_epochs=200, seed=7)
        a, b, c = fit(TOY, cfg), fit(TOY, cfg), fit(TOY, cfg, threads=3)
        np.testing.assert_array_equal(a.net.flat(), b.net.flat())
        np.testing.assert_array_equal(a.net.flat(), c.net.flat())
        assert a.restart_index == c.restart_index

    def test_best_restart_chosen(self):
        cfg = FitConfig(width=2, mode="constrained", M=2.0, restarts=4, max_epochs=50)
        res = fit(TOY, cfg)
        singles = [fit(TOY, FitConfig(width=2, mode="constrained", M=2.0, restarts=r + 1, max_epochs=50))
                   for r in range(4)]
        assert res.objective == min(s.objective for s in singles)

    def test_minibatch_runs(self):
        data = Dataset(np.linspace(-1, 1, 20).reshape(-1, 1), np.abs(np.linspace(-1, 1, 20)), 1.0)
        res = fit(data, FitConfig(width=4, mode="constrained", M=3.0, batch=5, max_epochs=200))
        assert res.train_mse < 0.05

    def test_divergence_names_step_size(self):
        with pytest.raises(DivergenceError, match="step_size=1000000.0"):
            fit(TOY, FitConfig(width=4, mode="l2", lam=1.0, step_size=1e6, max_epochs=200))


class TestPredictTruncated:
    CONST5 = Parameterization.from_atoms(1, [(5.0, (0.0, 1.0))])

    def test_constant_clamped(self):
        assert predict_truncated(self.CONST5, 0.3, 1.0) == 1.0

    def test_inside_band_identical(self):
        X = np.linspace(-1, 1, 11).reshape(-1, 1)
        np.testing.assert_array_equal(predict_truncated(RELU, X, 2.0), evaluate(RELU, X))

    def test_negative_clamped(self):
        net = Parameterization.from_atoms(1, [(-2.0, (0.0, 1.0))])
        assert predict_truncated(net, 0.0, 1.0) == -1.0


class TestRegularizerEquivalence:
    def test_random_theta(self, rng):
        for _ in range(1000):
            d = int(rng.integers(1, 4))
            net = random_net(rng, d, int(rng.integers(1, 10)))
            data = Dataset(rng.uniform(-0.5, 0.5, (5, d)), rng.uniform(-1, 1, 5), 1.0)
            lam = float(rng.uniform(0.01, 2))
            rep = regularizer_equivalence_report(net, data, lam)
            assert rep.l2_objective_balanced <= rep.l2_objective + 1e-12 * (1 + rep.l2_objective)
            assert rep.path_objective >= rep.l2_objective_balanced - 1e-10 * (1 + rep.path_objective)
            # weight decay dominates the path penalty pointwise
            assert penalty(net, "l2", lam) >= penalty(net, "path", lam) - 1e-12 * (1 + rep.kappa)
            assert rep.checks["kappa_invariant"] and rep.checks["balanced_sq_norm_is_twice_kappa"]

    def test_balanced_all_equal(self, rng):
        net = rescale_balanced(random_net(rng, 2, 6))
        data = Dataset(rng.uniform(-0.5, 0.5, (4, 2)), rng.uniform(-1, 1, 4), 1.0)
        rep = regularizer_equivalence_report(net, data, 0.3)
        assert rep.ok
        vals = [rep.path_objective, rep.path_objective_balanced, rep.l2_objective, rep.l2_objective_balanced]
        np.testing.assert_allclose(vals, vals[0], rtol=0, atol=1e-10)

    def test_zero_atom(self):
        net = Parameterization.from_atoms(1, [(0.0, (3.0, 1.0)), (2.0, (0.5, 0.0))])
        assert regularizer_equivalence_report(net, TOY, 0.5).ok
