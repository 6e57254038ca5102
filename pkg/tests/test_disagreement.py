import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from hypnoeval.core import Hypnodensity, Hypnogram
from hypnoeval.disagreement import (
    MAX_ENTROPY,
    RecordingFeatures,
    consensus_disagreement_labels,
    epoch_features,
    first_principal_component,
    fit_logistic,
    logistic_objective,
    loro_auc,
    pairwise_cosine_distances,
    roc_auc,
    shannon_entropy,
    transition_proximity,
)
from hypnoeval.errors import DegenerateCovariance, DegenerateLabels, NoEvaluableFolds, TooFewMembers

W, N1, N2, N3, REM, M = 0, 1, 2, 3, 4, -1


class TestEntropy:
    def test_one_hot(self):
        assert shannon_entropy([0, 0, 1, 0, 0]) == 0.0

    def test_uniform(self):
        assert shannon_entropy([0.2] * 5) == pytest.approx(math.log(5), abs=1e-12)
        assert MAX_ENTROPY == pytest.approx(1.60944, abs=1e-5)

    def test_two_point(self):
        assert shannon_entropy([0.5, 0.5, 0, 0, 0]) == pytest.approx(math.log(2))

    def test_rowwise(self):
        out = shannon_entropy(np.array([[1, 0, 0, 0, 0], [0.2] * 5]))
        np.testing.assert_allclose(out, [0, math.log(5)], atol=1e-12)


class TestPairwiseDistances:
    def test_identical(self):
        np.testing.assert_allclose(pairwise_cosine_distances(np.tile([0.1, 0.2, 0.3, 0.2, 0.2], (3, 1))), 0, atol=1e-15)

    def test_disjoint(self):
        np.testing.assert_array_equal(pairwise_cosine_distances(np.eye(5)[[0, 3]]), [1.0])

    def test_half(self):
        d = pairwise_cosine_distances(np.array([[1, 0, 0, 0, 0], [0.5, 0.5, 0, 0, 0]]))
        np.testing.assert_allclose(d, [1 - 1 / math.sqrt(2)])
        assert d[0] == pytest.approx(0.29289, abs=1e-5)

    def test_pair_count(self):
        assert pairwise_cosine_distances(np.random.default_rng(0).dirichlet(np.ones(5), 6)).shape == (15,)


class TestEpochFeatures:
    def test_values(self):
        a = Hypnodensity([[1, 0, 0, 0, 0], [0.2] * 5])
        b = Hypnodensity([[0, 1, 0, 0, 0], [0.2] * 5])
        f = epoch_features([a, b])
        np.testing.assert_allclose(f.entropy, [math.log(2), math.log(5)])
        np.testing.assert_allclose(f.d_mean, [1, 0], atol=1e-12)
        np.testing.assert_allclose(f.d_std, [0, 0], atol=1e-12)
        np.testing.assert_allclose(f.d_max, [1, 0], atol=1e-12)

    def test_population_std(self):
        ms = [Hypnodensity([np.eye(5)[k]]) for k in (0, 0, 1)]
        f = epoch_features(ms)
        # distances {0, 1, 1}
        assert f.d_mean[0] == pytest.approx(2 / 3)
        assert f.d_std[0] == pytest.approx(np.std([0, 1, 1]))

    def test_too_few(self):
        with pytest.raises(TooFewMembers):
            epoch_features([Hypnodensity([[1, 0, 0, 0, 0]])])


class TestPCA:
    def test_line(self):
        x = np.outer(np.arange(5.0), [1, 1, 1])
        scores, axis = first_principal_component(x, return_loadings=True)
        np.testing.assert_allclose(axis, np.ones(3) / math.sqrt(3), atol=1e-12)
        np.testing.assert_allclose(scores, (np.arange(5) - 2) * math.sqrt(3), atol=1e-12)

    def test_two_rows_symmetric(self):
        s = first_principal_component([[0.1, 0.2, 0.3], [0.4, 0.1, 0.9]])
        assert s[0] == pytest.approx(-s[1])

    def test_constant(self):
        with pytest.raises(DegenerateCovariance):
            first_principal_component(np.ones((4, 3)))

    @pytest.mark.parametrize("seed", range(5))
    def test_closed_form_oracle(self, seed):
        x = np.random.default_rng(seed).random((50, 3))
        scores, axis = first_principal_component(x, return_loadings=True)
        c = x - x.mean(axis=0)
        _, v = oracles.eig_sym3(c.T @ c / 49)
        v = v if v[0] > 0 else -v
        np.testing.assert_allclose(axis, v, atol=1e-9)
        np.testing.assert_allclose(scores, c @ v, atol=1e-9)


class TestLogistic:
    def test_intercept_only(self):
        m = fit_logistic(np.empty((10, 0)), [0, 1] * 5, allow_empty=True)
        np.testing.assert_allclose(m.predict_proba(np.empty((3, 0))), 0.5)

    def test_empty_needs_flag(self):
        with pytest.raises(ValueError):
            fit_logistic(np.empty((10, 0)), [0, 1] * 5)

    def test_single_class(self):
        with pytest.raises(DegenerateLabels):
            fit_logistic(np.arange(5.0), [1] * 5)

    def test_separable(self):
        x = np.arange(20.0)
        y = (x >= 10).astype(int)
        m = fit_logistic(x, y)
        assert np.isfinite(m.weights).all()
        assert roc_auc(m.decision_function(x), y) == 1.0

    def test_constant_column_dropped(self):
        rng = np.random.default_rng(2)
        x = np.column_stack([rng.normal(size=40), np.full(40, 3.0)])
        y = (x[:, 0] + rng.normal(size=40) > 0).astype(int)
        m = fit_logistic(x, y)
        assert m.kept.tolist() == [True, False]
        assert m.decision_function(x).shape == (40,)

    # 0.16489610018 is the BFGS minimum from oracles.logistic_oracle on this set
    def test_small_set_matches_oracle(self):
        rng = np.random.default_rng(11)
        x = rng.normal(size=(20, 2))
        y = (x @ [1.0, -0.5] + rng.normal(size=20) > 0).astype(int)
        m = fit_logistic(x, y)
        z = (x - m.mean) / m.scale
        got = logistic_objective(z, y, m.weights, m.intercept, 1e-4)
        assert got == pytest.approx(0.16489610018, abs=1e-6)
        assert got == pytest.approx(oracles.logistic_oracle(x, y, 1e-4), abs=1e-6)
        assert m.grad_norm <= 1e-8


class TestRocAuc:
    def test_perfect(self):
        assert roc_auc([0.9, 0.8, 0.1, 0.2], [1, 1, 0, 0]) == 1.0

    def test_all_tied(self):
        assert roc_auc([0.3] * 6, [1, 0, 1, 0, 0, 1]) == 0.5

    def test_single_class(self):
        with pytest.raises(DegenerateLabels):
            roc_auc([0.1, 0.2], [1, 1])

    def test_pair_oracle(self):
        rng = np.random.default_rng(5)
        scores = rng.random(100).round(2)  # rounding forces ties
        labels = np.r_[np.ones(30), np.zeros(70)].astype(int)
        assert roc_auc(scores, labels) == pytest.approx(oracles.pair_count_auc(scores, labels), abs=1e-12)

    @settings(max_examples=100)
    @given(st.lists(st.tuples(st.integers(0, 6), st.integers(0, 1)), min_size=2, max_size=40))
    def test_pair_oracle_property(self, data):
        scores, labels = zip(*data)
        if len(set(labels)) < 2:
            return
        assert roc_auc(scores, labels) == pytest.approx(oracles.pair_count_auc(scores, labels), abs=1e-12)


class TestLabels:
    def test_unanimous(self):
        assert consensus_disagreement_labels([Hypnogram([N2])] * 4).tolist() == [0]

    def test_split(self):
        s = [Hypnogram([N2])] * 4 + [Hypnogram([N1])]
        assert consensus_disagreement_labels(s).tolist() == [1]

    def test_mask_ignored(self):
        s = [Hypnogram([N2])] * 4 + [Hypnogram([M])]
        assert consensus_disagreement_labels(s).tolist() == [0]


class TestTransitionProximity:
    def test_constant(self):
        assert transition_proximity(Hypnogram([N2] * 8)).tolist() == [0] * 8

    def test_window_60(self):
        # change between epochs 4 and 5
        h = Hypnogram([N2] * 5 + [N3] * 5)
        assert np.flatnonzero(transition_proximity(h, 60)).tolist() == [3, 4, 5, 6]

    def test_window_0(self):
        h = Hypnogram([N2] * 5 + [N3] * 5)
        assert np.flatnonzero(transition_proximity(h, 0)).tolist() == [4, 5]

    def test_mask_is_not_a_transition(self):
        h = Hypnogram([N2, N2, M, N2, N2])
        assert transition_proximity(h).tolist() == [0] * 5


def _synthetic_corpus(n_rec=10, n=120, seed=0, shuffle=False):
    """Disagreement labels driven by entropy; distance features are noise."""
    rng = np.random.default_rng(seed)
    out = []
    for r in range(n_rec):
        ent = rng.uniform(0, MAX_ENTROPY, n)
        y = (rng.random(n) < 1 / (1 + np.exp(-6 * (ent - 0.8)))).astype(int)
        if shuffle:
            y = rng.permutation(y)
        X = np.column_stack([ent, rng.random((n, 3))])
        out.append((X, y, f"r{r}"))
    return out


class TestLoro:
    def test_informative(self):
        assert loro_auc(_synthetic_corpus()).mean_auc > 0.85

    def test_needs_two(self):
        with pytest.raises(NoEvaluableFolds):
            loro_auc(_synthetic_corpus(n_rec=1))

    def test_single_class_fold_skipped(self):
        data = _synthetic_corpus(n_rec=3)
        data.append((np.random.default_rng(0).random((5, 4)), np.zeros(5, dtype=int), "flat"))
        res = loro_auc(data)
        assert "flat" in res.skipped and len(res.per_recording) == 3

    def test_feature_sets(self):
        rng = np.random.default_rng(1)
        recs = []
        for r in range(4):
            ms = [Hypnodensity(rng.dirichlet(np.ones(5) * 0.5, 30)) for _ in range(3)]
            recs.append(RecordingFeatures(f"r{r}", epoch_features(ms), rng.integers(0, 2, 30)))
        for fs, width in (("entropy", 1), ("distance", 3), ("both", 4)):
            assert recs[0].matrix(fs).shape == (30, width)
            assert 0 <= loro_auc(recs, fs).mean_auc <= 1
