import numpy as np
import pytest

from nlcs import (LinearSoftmaxClassifier, MLPClassifier, TrainConfig,
                  TrainingDivergence, build_graph, normalized_adjacency,
                  spectral_embedding, train_linear_softmax, train_mlp)
from nlcs.models import (init_mlp_params, linear_loss_and_grads, mlp_loss_and_grads,
                         _mlp_batch_stats, _Optimizer, softmax_rows)

from conftest import make_sbm, random_graph


def finite_diff(loss_fn, params, h=1e-5):
    """Central finite differences over every entry of every parameter."""
    grads = {}
    for key, val in params.items():
        g = np.zeros_like(val)
        flat, gf = val.ravel(), g.ravel()
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + h
            lp = loss_fn()
            flat[idx] = orig - h
            lm = loss_fn()
            flat[idx] = orig
            gf[idx] = (lp - lm) / (2 * h)
        grads[key] = g
    return grads


def max_rel_error(analytic, numeric):
    worst = 0.0
    for key in analytic:
        a, f = analytic[key], numeric[key]
        denom = np.maximum(np.maximum(np.abs(a), np.abs(f)), 1e-5)
        worst = max(worst, float((np.abs(a - f) / denom).max()))
    return worst


class TestSpectralEmbedding:
    def test_orthonormal_columns(self):
        rng = np.random.default_rng(0)
        g = random_graph(rng, 30, 0.3)
        emb = spectral_embedding(normalized_adjacency(g), 6, seed=1)
        assert np.abs(emb.vectors.T @ emb.vectors - np.eye(6)).max() < 1e-6

    def test_eigenvalues_match_dense_solver(self):
        rng = np.random.default_rng(1)
        g = random_graph(rng, 30, 0.3)
        S = normalized_adjacency(g)
        emb = spectral_embedding(S, 5, seed=2)
        dense_vals = np.sort(np.linalg.eigvalsh(S.toarray()))[::-1]
        assert np.abs(emb.values - dense_vals[:5]).max() < 1e-5

    def test_two_components_top_subspace(self):
        edges = [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]
        g = build_graph(edges)
        S = normalized_adjacency(g)
        emb = spectral_embedding(S, 2, seed=3)
        assert np.abs(emb.values - 1.0).max() < 1e-6  # eigenvalue 1, multiplicity 2
        Q = emb.vectors
        for nodes in ([0, 1, 2], [3, 4, 5]):
            u = np.zeros(6)
            u[nodes] = 1 / np.sqrt(3)
            residual = u - Q @ (Q.T @ u)  # sine of the angle to the subspace
            assert np.linalg.norm(residual) < 1e-4

    def test_deterministic_per_seed(self):
        rng = np.random.default_rng(4)
        g = random_graph(rng, 25, 0.3)
        S = normalized_adjacency(g)
        a = spectral_embedding(S, 4, seed=9)
        b = spectral_embedding(S, 4, seed=9)
        assert np.array_equal(a.vectors, b.vectors)
        assert np.array_equal(a.values, b.values)

    def test_nonconvergence_warns(self):
        rng = np.random.default_rng(5)
        g = random_graph(rng, 40, 0.2)
        S = normalized_adjacency(g)
        with pytest.warns(RuntimeWarning):
            emb = spectral_embedding(S, 3, seed=0, max_sweeps=1, tol=1e-14)
        assert not emb.converged

    def test_dim_domain(self):
        g = build_graph([(0, 1), (1, 2)])
        with pytest.raises(ValueError):
            spectral_embedding(normalized_adjacency(g), 3)


class TestLinearSoftmax:
    def test_separable_toy_reaches_full_training_accuracy(self):
        rng = np.random.default_rng(6)
        X = np.vstack([rng.normal(-2, 0.3, size=(10, 2)), rng.normal(2, 0.3, size=(10, 2))])
        y = np.array([0] * 10 + [1] * 10)
        Y = np.eye(2)[y]
        cfg = TrainConfig(epochs=1000, lr=0.05, seed=0, optimizer="gd")
        pred = train_linear_softmax(X, Y, np.arange(20), cfg)
        assert (np.argmax(pred.scores, axis=1) == y).all()

    def test_gradients_match_finite_differences(self):
        rng = np.random.default_rng(7)
        X = rng.standard_normal((12, 5))
        y = rng.integers(0, 3, size=12)
        Y = np.eye(3)[y]
        W = 0.1 * rng.standard_normal((5, 3))
        b = 0.1 * rng.standard_normal(3)
        params = {"W": W, "b": b}
        _, analytic = linear_loss_and_grads(W, b, X, Y, weight_decay=0.01)
        numeric = finite_diff(
            lambda: linear_loss_and_grads(params["W"], params["b"], X, Y, 0.01)[0],
            params)
        assert max_rel_error(analytic, numeric) < 1e-4

    def test_loss_non_increasing_with_small_gd_step(self):
        rng = np.random.default_rng(8)
        X = rng.standard_normal((30, 4))
        y = rng.integers(0, 3, size=30)
        Y = np.eye(3)[y]
        cfg = TrainConfig(epochs=200, lr=1e-3, seed=0, optimizer="gd")
        pred = train_linear_softmax(X, Y, np.arange(30), cfg)
        losses = pred.model["loss_history"]
        assert np.all(np.diff(losses) <= 1e-12)

    def test_softmax_rows_are_distributions(self):
        rng = np.random.default_rng(9)
        P = softmax_rows(rng.standard_normal((50, 6)) * 5)
        assert np.abs(P.sum(axis=1) - 1).max() < 1e-9
        assert P.min() > 0 and P.max() < 1

    def test_bitwise_deterministic_per_seed(self):
        rng = np.random.default_rng(10)
        X = rng.standard_normal((20, 4))
        Y = np.eye(2)[rng.integers(0, 2, size=20)]
        cfg = TrainConfig(epochs=50, lr=0.01, seed=123)
        a = train_linear_softmax(X, Y, np.arange(20), cfg)
        b = train_linear_softmax(X, Y, np.arange(20), cfg)
        assert np.array_equal(a.scores, b.scores)

    def test_divergence_reports_epoch(self):
        # lr * weight_decay >> 2 makes gradient descent blow up exponentially
        rng = np.random.default_rng(11)
        X = rng.standard_normal((10, 3))
        Y = np.eye(2)[rng.integers(0, 2, size=10)]
        cfg = TrainConfig(epochs=500, lr=1e3, weight_decay=1.0, seed=0, optimizer="gd")
        with pytest.raises(TrainingDivergence) as err:
            train_linear_softmax(X, Y, np.arange(10), cfg)
        assert err.value.epoch >= 1

    def test_validation_selection_keeps_best(self):
        rng = np.random.default_rng(12)
        X = rng.standard_normal((40, 3))
        y = (X[:, 0] > 0).astype(int)
        Y = np.eye(2)[y]
        cfg = TrainConfig(epochs=100, lr=0.05, seed=0)
        pred = train_linear_softmax(X, Y, np.arange(30), cfg,
                                    validation=(np.arange(30, 40), y[30:]))
        val_acc = np.mean(np.argmax(pred.scores[30:], axis=1) == y[30:])
        assert val_acc >= 0.8


class TestMLP:
    def _toy(self, seed, m=12, p=5, h=8, c=3):
        rng = np.random.default_rng(seed)
        X = rng.standard_normal((m, p))
        y = rng.integers(0, c, size=m)
        params = init_mlp_params(p, h, c, rng)
        return X, np.eye(c)[y], params

    def test_gradcheck_inference_mode(self):
        X, Y, params = self._toy(13)
        stats = _mlp_batch_stats(params, X)
        _, analytic = mlp_loss_and_grads(params, X, Y, weight_decay=0.01,
                                         bn_stats=stats)
        numeric = finite_diff(
            lambda: mlp_loss_and_grads(params, X, Y, 0.01, bn_stats=stats)[0],
            params)
        assert max_rel_error(analytic, numeric) < 1e-4

    def test_gradcheck_batch_stats_mode(self):
        X, Y, params = self._toy(14)
        _, analytic = mlp_loss_and_grads(params, X, Y, weight_decay=0.0)
        numeric = finite_diff(lambda: mlp_loss_and_grads(params, X, Y, 0.0)[0], params)
        assert max_rel_error(analytic, numeric) < 1e-4

    def test_gradcheck_with_fixed_dropout_mask(self):
        rng = np.random.default_rng(15)
        X, Y, params = self._toy(15)
        masks = ((rng.random((12, 8)) < 0.5) / 0.5, (rng.random((12, 8)) < 0.5) / 0.5)
        _, analytic = mlp_loss_and_grads(params, X, Y, 0.0, dropout_masks=masks)
        numeric = finite_diff(
            lambda: mlp_loss_and_grads(params, X, Y, 0.0, dropout_masks=masks)[0],
            params)
        assert max_rel_error(analytic, numeric) < 1e-4

    def test_fits_xor(self):
        X = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
        y = np.array([0, 1, 1, 0])
        Y = np.eye(2)[y]
        cfg = TrainConfig(epochs=1000, lr=0.01, seed=3, hidden=8, dropout=0.0)
        pred = train_mlp(X, Y, np.arange(4), cfg)
        assert (np.argmax(pred.scores, axis=1) == y).all()

    def test_bitwise_deterministic_per_seed(self):
        rng = np.random.default_rng(16)
        X = rng.standard_normal((20, 6))
        Y = np.eye(3)[rng.integers(0, 3, size=20)]
        cfg = TrainConfig(epochs=40, lr=0.01, seed=7, hidden=16, dropout=0.5)
        a = train_mlp(X, Y, np.arange(20), cfg)
        b = train_mlp(X, Y, np.arange(20), cfg)
        assert np.array_equal(a.scores, b.scores)

    def test_checkpoints_recorded(self):
        rng = np.random.default_rng(17)
        X = rng.standard_normal((15, 4))
        Y = np.eye(2)[rng.integers(0, 2, size=15)]
        cfg = TrainConfig(epochs=50, lr=0.01, seed=0, hidden=8, dropout=0.0,
                          track_every=10)
        pred = train_mlp(X, Y, np.arange(15), cfg)
        assert [e for e, _ in pred.checkpoints] == [10, 20, 30, 40, 50]
        for _, scores in pred.checkpoints:
            assert np.abs(scores.sum(axis=1) - 1).max() < 1e-9


class TestOptimizer:
    def test_adam_and_gd_reduce_quadratic(self):
        for kind in ("adam", "gd"):
            params = {"x": np.array([5.0, -3.0])}
            opt = _Optimizer(kind, 0.1)
            for _ in range(200):
                opt.step(params, {"x": 2 * params["x"]})
            assert np.abs(params["x"]).max() < 0.1


class TestClassifierEstimators:
    def test_linear_classifier_roundtrip(self):
        rng = np.random.default_rng(18)
        X = np.vstack([rng.normal(-1, 0.4, size=(15, 3)), rng.normal(1, 0.4, size=(15, 3))])
        y = np.array([0] * 15 + [1] * 15)
        clf = LinearSoftmaxClassifier(epochs=300, lr=0.05, seed=0).fit(X, y)
        assert clf.predict(X).shape == (30,)
        assert (clf.predict(X) == y).mean() > 0.9
        P = clf.predict_proba(X)
        assert np.abs(P.sum(axis=1) - 1).max() < 1e-9

    def test_mlp_classifier_with_validation(self):
        rng = np.random.default_rng(19)
        _, labels, features = make_sbm(rng, [20, 20], feature_noise=0.3)
        clf = MLPClassifier(hidden=16, dropout=0.2, epochs=150, lr=0.01, seed=1)
        clf.fit(features[:30], labels[:30], X_val=features[30:], y_val=labels[30:])
        assert (clf.predict(features[30:]) == labels[30:]).mean() > 0.7
