import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dartboost import Dataset, LambdaRank, Logistic, QueryGroups, Squared, loss_value, negative_gradient
from dartboost.errors import ConfigError, LabelDomainError
from dartboost.loss import loss_from_dict, make_loss, pointwise_loss, pointwise_negative_gradient
from dartboost.metrics import ndcg_at_k, ndcg_swap_delta

from oracles import central_difference


def one_row(y):
    return Dataset([[0.0]], [y])


class TestExamples:
    def test_squared_target_is_residual(self):
        assert negative_gradient(Squared(), one_row(3.0), [1.0])[0] == 2.0
        fd = central_difference(lambda p: pointwise_loss(Squared(), 3.0, p), 1.0, 1e-6)
        assert fd == pytest.approx(-2.0, rel=1e-6)

    def test_logistic_target_at_zero(self):
        assert negative_gradient(Logistic(1.0), one_row(1.0), [0.0])[0] == 0.25
        fd = central_difference(lambda p: pointwise_loss(Logistic(1.0), 1.0, p), 0.0, 1e-6)
        assert -fd == pytest.approx(0.25, rel=1e-6)

    def test_logistic_saturation(self):
        assert 0.0 <= negative_gradient(Logistic(1.0), one_row(1.0), [30.0])[0] < 1e-10

    def test_lambdarank_two_docs(self):
        ds = Dataset([[0.0], [0.0]], [1, 0], QueryGroups.from_sizes([2]))
        s = ndcg_swap_delta([1, 0], [0.0, 0.0], 0, 1)
        g = negative_gradient(LambdaRank(1.0), ds, [0.0, 0.0])
        assert s > 0
        np.testing.assert_allclose(g, [s / 2, -s / 2], rtol=0, atol=1e-15)

    def test_loss_values(self):
        ds = Dataset([[0.0]] * 3, [1.0, -2.0, 5.5])
        assert loss_value(Squared(), ds, ds.labels) == 0.0
        assert loss_value(Logistic(1.0), one_row(1.0), [0.0]) == 0.5
        rk = Dataset([[0.0]] * 3, [2, 1, 0], QueryGroups.from_sizes([3]))
        assert loss_value(LambdaRank(), rk, [3.0, 2.0, 1.0]) == 0.0
        assert loss_value(LambdaRank(), rk, [1.0, 2.0, 3.0]) > 0.0


class TestDomains:
    def test_logistic_labels(self):
        with pytest.raises(LabelDomainError):
            negative_gradient(Logistic(), Dataset([[0.0]] * 2, [1, 0]), [0, 0])

    def test_lambdarank_needs_groups(self):
        with pytest.raises(LabelDomainError):
            negative_gradient(LambdaRank(), Dataset([[0.0]] * 2, [1, 0]), [0, 0])

    def test_lambdarank_integer_grades(self):
        ds = Dataset([[0.0]] * 2, [1.5, 0], QueryGroups.from_sizes([2]))
        with pytest.raises(LabelDomainError):
            negative_gradient(LambdaRank(), ds, [0, 0])

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            negative_gradient(Squared(), one_row(1.0), [0.0, 1.0])

    @pytest.mark.parametrize("bad", [0.0, -1.0, float("nan")])
    def test_lambda_positive(self, bad):
        with pytest.raises(ConfigError):
            Logistic(bad)
        with pytest.raises(ConfigError):
            LambdaRank(bad)

    def test_truncation(self):
        with pytest.raises(ConfigError):
            LambdaRank(1.0, 0)

    def test_make_and_round_trip(self):
        for loss in (Squared(), Logistic(0.4), LambdaRank(1.2, 5)):
            assert loss_from_dict(loss.to_dict()) == loss
        assert make_loss("logistic", 0.2) == Logistic(0.2)
        with pytest.raises(ConfigError):
            make_loss("hinge")


class TestGradientCheck:
    @pytest.mark.parametrize("loss", [Squared(), Logistic(0.2), Logistic(1.0), Logistic(3.0)])
    def test_finite_difference_grid(self, loss):
        rng = np.random.default_rng(5)
        p = rng.uniform(-20, 20, 1000)
        if isinstance(loss, Squared):
            y = rng.normal(0, 10, 1000)
        else:
            y = rng.choice([-1.0, 1.0], 1000)
        analytic = pointwise_negative_gradient(loss, y, p)
        h = 1e-5 * np.maximum(1.0, np.abs(p))
        fd = -(pointwise_loss(loss, y, p + h) - pointwise_loss(loss, y, p - h)) / (2 * h)
        # near-zero gradients sit under the difference quotient's rounding floor
        scale = np.maximum(np.abs(analytic), 1e-4 * loss.lam if isinstance(loss, Logistic) else 1e-4)
        assert np.max(np.abs(fd - analytic) / scale) < 1e-6

    @settings(max_examples=300, deadline=None)
    @given(
        lam=st.floats(0.05, 5.0),
        y=st.sampled_from([-1.0, 1.0]),
        p=st.floats(-20, 20),
    )
    def test_logistic_scaling_identity(self, lam, y, p):
        lhs = pointwise_negative_gradient(Logistic(lam), y, p)
        rhs = lam * pointwise_negative_gradient(Logistic(1.0), y, lam * p)
        assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-300)


class TestLambdaRank:
    @settings(max_examples=150, deadline=None)
    @given(st.data())
    def test_query_sums_zero_and_antisymmetry(self, data):
        sizes = data.draw(st.lists(st.integers(1, 8), min_size=1, max_size=5))
        n = sum(sizes)
        rel = data.draw(st.lists(st.integers(0, 4), min_size=n, max_size=n))
        scores = data.draw(st.lists(st.floats(-5, 5), min_size=n, max_size=n))
        lam = data.draw(st.floats(0.1, 3.0))
        trunc = data.draw(st.one_of(st.none(), st.integers(1, 8)))
        ds = Dataset(np.zeros((n, 1)), rel, QueryGroups.from_sizes(sizes))
        g = negative_gradient(LambdaRank(lam, trunc), ds, scores)
        for sl in ds.query_groups.slices():
            assert abs(g[sl].sum()) <= 1e-12

    def test_pair_contribution_matches_formula(self):
        rel = np.array([3, 0, 1, 2])
        scores = np.array([0.2, 1.5, -0.3, 0.9])
        lam = 0.7
        ds = Dataset(np.zeros((4, 1)), rel, QueryGroups.from_sizes([4]))
        g = negative_gradient(LambdaRank(lam), ds, scores)
        expected = np.zeros(4)
        for i in range(4):
            for j in range(4):
                if rel[i] > rel[j]:
                    s = ndcg_swap_delta(rel, scores, i, j)
                    c = s * lam / (1 + np.exp(lam * (scores[i] - scores[j])))
                    expected[i] += c
                    expected[j] -= c
        np.testing.assert_allclose(g, expected, rtol=1e-12, atol=1e-15)
        assert g[0] > 0 and g[1] < 0

    def test_all_zero_grades_give_zero_targets(self):
        ds = Dataset(np.zeros((3, 1)), [0, 0, 0], QueryGroups.from_sizes([3]))
        assert not np.any(negative_gradient(LambdaRank(), ds, [1.0, 2.0, 3.0]))

    def test_surrogate_is_one_minus_ndcg(self):
        rel, scores = [2, 0, 1], [0.1, 0.5, 0.3]
        ds = Dataset(np.zeros((3, 1)), rel, QueryGroups.from_sizes([3]))
        assert loss_value(LambdaRank(), ds, scores) == pytest.approx(1 - ndcg_at_k(rel, scores), abs=1e-15)
