import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra import numpy as hnp

from srl.errors import ConfigError, DimensionError, DomainError
from srl.network import (Parameterization, check_points, evaluate, lift, path_norm,
                         rescale_balanced, truncate)
from srl.rng import stream

from conftest import random_net


def net_of(d, *atoms):
    return Parameterization.from_atoms(d, atoms)


finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


@st.composite
def networks(draw, max_width=8):
    d = draw(st.integers(1, 3))
    N = draw(st.integers(0, max_width))
    a = draw(hnp.arrays(np.float64, N, elements=finite))
    W = draw(hnp.arrays(np.float64, (N, d + 1), elements=finite))
    return Parameterization(d, a, W)


class TestEvaluate:
    def test_pure_bias_atom_is_constant(self):
        assert evaluate(net_of(1, (1, (0, 1))), 0.3) == 1.0

    def test_relu_definition(self):
        net = net_of(1, (1, (1, 0)))
        assert evaluate(net, 0.5) == 0.5
        assert evaluate(net, -0.5) == 0.0

    def test_odd_pair_gives_identity(self):
        net = net_of(1, (1, (1, 0)), (-1, (-1, 0)))
        assert evaluate(net, -0.7) == pytest.approx(-0.7, abs=1e-15)

    def test_relu_at_kink_is_zero(self):
        assert evaluate(net_of(1, (3, (1, 0))), 0.0) == 0.0

    def test_batch_matches_pointwise(self, rng):
        net = random_net(rng, 2, 5)
        X = rng.uniform(-0.5, 0.5, (7, 2))
        np.testing.assert_allclose(evaluate(net, X), [evaluate(net, x) for x in X], rtol=0, atol=1e-15)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            evaluate(net_of(2, (1, (1, 0, 0))), np.array([0.1]))

    def test_outside_ball_rejected(self):
        with pytest.raises(ConfigError):
            evaluate(net_of(1, (1, (1, 0))), 1.5)

    def test_empty_network_is_zero(self):
        np.testing.assert_array_equal(evaluate(Parameterization.zero(2), np.zeros((3, 2))), 0.0)

    def test_zero_inner_weight_contributes_nothing(self):
        net = net_of(1, (5, (0, 0)), (1, (1, 0)))
        assert evaluate(net, 0.4) == 0.4
        assert path_norm(net) == 1.0

    def test_lift_appends_one(self):
        np.testing.assert_array_equal(lift(np.array([[0.2, 0.3]])), [[0.2, 0.3, 1.0]])

    def test_boundary_points_accepted(self):
        x = np.array([[1 / math.sqrt(2), 1 / math.sqrt(2)]])
        check_points(x, 2)


class TestParameterization:
    def test_arrays_are_read_only(self):
        net = net_of(1, (1, (1, 0)))
        with pytest.raises(ValueError):
            net.outer[0] = 2.0

    def test_shape_validation(self):
        with pytest.raises(DimensionError):
            Parameterization(2, np.ones(2), np.ones((2, 2)))
        with pytest.raises(DimensionError):
            Parameterization(1, np.ones(3), np.ones((2, 2)))

    def test_nonfinite_rejected(self):
        with pytest.raises(ConfigError):
            Parameterization(1, np.array([np.nan]), np.ones((1, 2)))

    def test_sq_norm_and_flat(self):
        net = net_of(1, (4, (1, 0)))
        assert net.sq_norm() == 17.0
        np.testing.assert_array_equal(net.flat(), [4, 1, 0])


class TestPathNorm:
    @pytest.mark.parametrize("atoms,d,expected", [
        ([(2, (3, 4, 0))], 2, 10.0),
        ([], 1, 0.0),
        ([(1, (1, 0)), (-2, (0, 1))], 1, 3.0),
    ])
    def test_examples(self, atoms, d, expected):
        assert path_norm(Parameterization.from_atoms(d, atoms)) == expected

    @given(networks(), st.floats(1e-3, 1e3))
    def test_positive_homogeneity(self, net, c):
        scaled = Parameterization(net.dim_input, net.outer * c, net.inner / c)
        X = stream(0, "homog", net.dim_input).uniform(-0.5, 0.5, (50, net.dim_input))
        f, g = evaluate(net, X), evaluate(scaled, X)
        np.testing.assert_allclose(g, f, rtol=1e-12, atol=1e-12 * (1 + path_norm(net)))
        assert path_norm(scaled) == pytest.approx(path_norm(net), rel=1e-12, abs=1e-300)

    def test_lipschitz_two_kappa(self, rng):
        for _ in range(20):
            d = int(rng.integers(1, 4))
            net = random_net(rng, d, 10)
            X = rng.uniform(-0.5, 0.5, (200, d))
            Y = X + rng.normal(scale=1e-3, size=X.shape)
            ratio = np.abs(evaluate(net, X) - evaluate(net, Y)) / np.linalg.norm(X - Y, axis=1)
            assert ratio.max() <= 2 * path_norm(net) + 1e-9


class TestRescaleBalanced:
    def test_single_atom(self):
        bal = rescale_balanced(net_of(1, (4, (1, 0))))
        np.testing.assert_allclose(bal.outer, [2.0])
        np.testing.assert_allclose(bal.inner, [[2.0, 0.0]])
        assert path_norm(bal) == 4.0
        assert net_of(1, (4, (1, 0))).sq_norm() / 2 == 8.5
        assert bal.sq_norm() / 2 == pytest.approx(4.0, abs=1e-15)

    def test_zero_product_atom(self):
        bal = rescale_balanced(net_of(1, (0, (5, 5))))
        np.testing.assert_array_equal(bal.outer, [0.0])
        np.testing.assert_array_equal(bal.inner, [[0.0, 0.0]])

    def test_balanced_is_fixed_point(self):
        bal = rescale_balanced(net_of(1, (2, (2, 0))))
        np.testing.assert_array_equal(bal.outer, [2.0])
        np.testing.assert_array_equal(bal.inner, [[2.0, 0.0]])

    @given(networks(max_width=12))
    def test_identities(self, net):
        bal = rescale_balanced(net)
        k = path_norm(net)
        assert abs(path_norm(bal) - k) <= 1e-12 * max(1.0, k)
        assert abs(bal.sq_norm() / 2 - k) <= 1e-12 * max(1.0, k)
        assert bal.sq_norm() <= net.sq_norm() * (1 + 1e-12) + 1e-300
        X = stream(1, "rescale", net.dim_input).uniform(-0.5, 0.5, (100, net.dim_input))
        np.testing.assert_allclose(evaluate(bal, X), evaluate(net, X), rtol=0, atol=1e-9 * max(1.0, k))


class TestTruncate:
    @pytest.mark.parametrize("v,expected", [(2, 1), (-3, -1), (0.5, 0.5)])
    def test_examples(self, v, expected):
        assert truncate(v, 1.0) == expected

    def test_bad_level(self):
        with pytest.raises(ConfigError):
            truncate(1.0, 0.0)

    @given(st.floats(-100, 100), st.floats(-1, 1), st.floats(1, 5))
    def test_contraction(self, f, h, b):
        # targets bounded by b are never moved further away by truncation
        assert abs(truncate(f, b) - h) <= abs(f - h) + 1e-12
