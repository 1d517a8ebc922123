"""Base prediction models trained from scratch with verifiable gradients.

Two desk-scale models produce the score matrices that the post-processing
stages refine: a linear softmax classifier over spectral-embedding
coordinates, and a three-layer MLP over raw node features with batch
normalization and dropout. Training is full-batch, single-threaded, and
bit-reproducible per seed. All gradients are hand-derived and checked
against finite differences in the test suite.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.exceptions import NotFittedError

from .validation import as_rng, check_finite

_BN_EPS = 1e-5


class TrainingDivergence(RuntimeError):
    """Raised when the training loss becomes non-finite."""

    def __init__(self, epoch: int):
        super().__init__(f"training diverged (non-finite loss) at epoch {epoch}")
        self.epoch = epoch


# ---------------------------------------------------------------------------
# spectral embedding


@dataclass
class SpectralEmbedding:
    """Orthonormal eigenvector coordinates with their eigenvalues."""

    vectors: np.ndarray
    values: np.ndarray
    converged: bool = True


def block_power_eigs(A, k: int, seed=0, tol: float = 1e-6, max_sweeps: int = 1000,
                     shift: float = 0.0):
    """Top-k eigenpairs (by algebraic value) of a symmetric operator.

    Block orthogonal power iteration on (A + shift*I) with Rayleigh-Ritz
    refinement each sweep; the shift lets callers make the operator positive
    semidefinite so the power step targets the algebraically largest values.
    Converges when the worst per-vector residual ||A q - theta q|| drops
    below ``tol``. Returns (values, vectors, converged).
    """
    n = A.shape[0]
    if not 0 < k < n:
        raise ValueError(f"k must be in (0, n), got k={k}, n={n}")
    rng = as_rng(seed)
    Q, _ = np.linalg.qr(rng.standard_normal((n, k)))
    vals = np.zeros(k)
    converged = False
    for _ in range(max_sweeps):
        Z = A @ Q + shift * Q
        Q, _ = np.linalg.qr(Z)
        AQ = np.asarray(A @ Q)
        H = Q.T @ AQ
        H = 0.5 * (H + H.T)
        theta, V = np.linalg.eigh(H)
        order = np.argsort(theta)[::-1]
        theta, V = theta[order], V[:, order]
        Q = Q @ V
        AQ = AQ @ V
        vals = theta
        resid = np.linalg.norm(AQ - Q * theta[None, :], axis=0).max()
        if resid < tol:
            converged = True
            break
    return vals, Q, converged


def _fix_signs(Q: np.ndarray, eps: float = 1e-12) -> np.ndarray:
    """Make each column's first non-negligible coordinate positive."""
    Q = Q.copy()
    for c in range(Q.shape[1]):
        col = Q[:, c]
        nz = np.flatnonzero(np.abs(col) > eps)
        if nz.size and col[nz[0]] < 0:
            Q[:, c] = -col
    return Q


def spectral_embedding(S, dim: int, seed=0, tol: float = 1e-6,
                       max_sweeps: int = 1000) -> SpectralEmbedding:
    """Top-``dim`` eigenvectors of the normalized adjacency, by algebraic value.

    The operator's spectrum lies in [-1, 1], so the iteration runs with a +1
    shift. Column signs are fixed (first nonzero coordinate positive) so the
    embedding is deterministic for a fixed seed. Non-convergence returns the
    best iterate with ``converged=False`` and a warning.
    """
    matrix = getattr(S, "matrix", S)
    vals, Q, ok = block_power_eigs(matrix, dim, seed=seed, tol=tol,
                                   max_sweeps=max_sweeps, shift=1.0)
    if not ok:
        warnings.warn("spectral embedding did not reach the residual tolerance; "
                      "returning the best iterate", RuntimeWarning)
    return SpectralEmbedding(vectors=_fix_signs(Q), values=vals, converged=ok)


def default_embedding_dim(num_classes: int, n: int) -> int:
    """Embedding width heuristic: max(2c, 32), capped at n - 1."""
    return min(max(2 * num_classes, 32), n - 1)


# ---------------------------------------------------------------------------
# shared training machinery


@dataclass
class TrainConfig:
    """Full-batch training settings."""

    epochs: int = 1000
    lr: float = 0.01
    seed: int = 0
    optimizer: str = "adam"      # "adam" or "gd"
    weight_decay: float = 0.0
    hidden: int = 256
    dropout: float = 0.5
    select_best: bool = True     # keep the best validation-accuracy checkpoint
    track_every: int = 0         # record full score matrices every N epochs

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if self.optimizer not in ("adam", "gd"):
            raise ValueError(f"optimizer must be 'adam' or 'gd', got {self.optimizer!r}")
        if not 0 <= self.dropout < 1:
            raise ValueError("dropout must be in [0, 1)")


@dataclass
class BasePrediction:
    """Class-score matrix from a base model, for every node."""

    scores: np.ndarray
    source: str
    checkpoints: list[tuple[int, np.ndarray]] | None = field(default=None, repr=False)
    model: dict | None = field(default=None, repr=False)

    def __post_init__(self):
        self.scores = check_finite(np.asarray(self.scores, dtype=np.float64),
                                   "base prediction")


def softmax_rows(Z: np.ndarray) -> np.ndarray:
    Z = Z - Z.max(axis=1, keepdims=True)
    E = np.exp(Z)
    return E / E.sum(axis=1, keepdims=True)


def _ce_loss(Z: np.ndarray, Y: np.ndarray) -> float:
    """Mean cross-entropy from logits via log-sum-exp."""
    zmax = Z.max(axis=1, keepdims=True)
    lse = zmax[:, 0] + np.log(np.exp(Z - zmax).sum(axis=1))
    return float(np.mean(lse - (Z * Y).sum(axis=1)))


class _Optimizer:
    """Plain gradient descent or adaptive-moment updates over a param dict."""

    def __init__(self, kind: str, lr: float):
        self.kind = kind
        self.lr = lr
        self.t = 0
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        if self.kind == "gd":
            for key, g in grads.items():
                params[key] -= self.lr * g
            return
        b1, b2, eps = 0.9, 0.999, 1e-8
        for key, g in grads.items():
            m = self._m.setdefault(key, np.zeros_like(g))
            v = self._v.setdefault(key, np.zeros_like(g))
            m += (1 - b1) * (g - m)
            v += (1 - b2) * (g * g - v)
            mhat = m / (1 - b1 ** self.t)
            vhat = v / (1 - b2 ** self.t)
            params[key] -= self.lr * mhat / (np.sqrt(vhat) + eps)


def _one_hot_rows(Y, labeled):
    Ym = getattr(Y, "matrix", Y)
    return np.asarray(Ym, dtype=np.float64)[labeled]


# ---------------------------------------------------------------------------
# linear softmax model


def linear_loss_and_grads(W, b, X, Y, weight_decay=0.0):
    """Cross-entropy loss and analytic gradients of the linear softmax model."""
    Z = X @ W + b
    loss = _ce_loss(Z, Y) + 0.5 * weight_decay * float((W * W).sum())
    G = (softmax_rows(Z) - Y) / X.shape[0]
    dW = X.T @ G + weight_decay * W
    db = G.sum(axis=0)
    return loss, {"W": dW, "b": db}


def train_linear_softmax(features, Y, labeled, cfg: TrainConfig,
                         validation=None, source: str = "linear") -> BasePrediction:
    """Fit one linear layer with softmax on the labeled rows, full batch.

    ``validation=(idx, labels)`` enables best-checkpoint selection on
    validation accuracy (when ``cfg.select_best``). Returns softmax scores
    for every row of ``features``.
    """
    X = np.asarray(features, dtype=np.float64)
    labeled = np.asarray(labeled, dtype=np.int64)
    T = _one_hot_rows(Y, labeled)
    Xl = X[labeled]
    p, c = X.shape[1], T.shape[1]
    if labeled.size < c:
        raise ValueError(f"need at least {c} labeled rows, got {labeled.size}")
    rng = as_rng(cfg.seed)
    params = {"W": 0.01 * rng.standard_normal((p, c)), "b": np.zeros(c)}
    opt = _Optimizer(cfg.optimizer, cfg.lr)

    best = None
    checkpoints: list[tuple[int, np.ndarray]] = []
    val_idx = val_lab = None
    if validation is not None:
        val_idx = np.asarray(validation[0], dtype=np.int64)
        val_lab = np.asarray(validation[1], dtype=np.int64)

    losses = []
    for epoch in range(1, cfg.epochs + 1):
        loss, grads = linear_loss_and_grads(params["W"], params["b"], Xl, T,
                                            cfg.weight_decay)
        if not np.isfinite(loss):
            raise TrainingDivergence(epoch)
        losses.append(loss)
        opt.step(params, grads)
        if val_idx is not None:
            pv = np.argmax(X[val_idx] @ params["W"] + params["b"], axis=1)
            acc = float(np.mean(pv == val_lab))
            if best is None or acc > best[0]:
                best = (acc, {k: v.copy() for k, v in params.items()})
        if cfg.track_every and epoch % cfg.track_every == 0:
            checkpoints.append((epoch, softmax_rows(X @ params["W"] + params["b"])))

    if cfg.select_best and best is not None:
        params = best[1]
    scores = softmax_rows(X @ params["W"] + params["b"])
    model = dict(params, loss_history=np.asarray(losses))
    return BasePrediction(scores, source, checkpoints or None, model=model)


# ---------------------------------------------------------------------------
# three-layer MLP with batch norm and dropout


def init_mlp_params(p: int, hidden: int, c: int, rng) -> dict[str, np.ndarray]:
    """He-style initialization for the two hidden layers plus the output layer."""
    params = {
        "W1": rng.standard_normal((p, hidden)) * np.sqrt(2.0 / p),
        "b1": np.zeros(hidden),
        "g1": np.ones(hidden),
        "be1": np.zeros(hidden),
        "W2": rng.standard_normal((hidden, hidden)) * np.sqrt(2.0 / hidden),
        "b2": np.zeros(hidden),
        "g2": np.ones(hidden),
        "be2": np.zeros(hidden),
        "W3": rng.standard_normal((hidden, c)) * np.sqrt(2.0 / hidden),
        "b3": np.zeros(c),
    }
    return params


def _bn_forward(a, gamma, beta, stats):
    if stats is None:                      # batch statistics (training mode)
        mu = a.mean(axis=0)
        var = a.var(axis=0)
    else:
        mu, var = stats
    inv = 1.0 / np.sqrt(var + _BN_EPS)
    xhat = (a - mu) * inv
    return gamma * xhat + beta, (xhat, inv, stats is None)


def _bn_backward(dn, gamma, cache):
    xhat, inv, batch_mode = cache
    dg = (dn * xhat).sum(axis=0)
    dbe = dn.sum(axis=0)
    dxhat = dn * gamma
    if batch_mode:
        da = inv * (dxhat - dxhat.mean(axis=0) - xhat * (dxhat * xhat).mean(axis=0))
    else:
        da = inv * dxhat
    return da, dg, dbe


def mlp_forward(params, X, bn_stats=None, dropout_masks=None):
    """Forward pass; ``bn_stats=None`` uses batch statistics (training mode),
    otherwise a pair of (mu, var) tuples for the two hidden layers.

    Returns (logits, cache) where the cache carries everything backward needs.
    """
    stats1, stats2 = bn_stats if bn_stats is not None else (None, None)
    a1 = X @ params["W1"] + params["b1"]
    n1, bn1 = _bn_forward(a1, params["g1"], params["be1"], stats1)
    h1 = np.maximum(n1, 0.0)
    if dropout_masks is not None:
        h1 = h1 * dropout_masks[0]
    a2 = h1 @ params["W2"] + params["b2"]
    n2, bn2 = _bn_forward(a2, params["g2"], params["be2"], stats2)
    h2 = np.maximum(n2, 0.0)
    if dropout_masks is not None:
        h2 = h2 * dropout_masks[1]
    Z = h2 @ params["W3"] + params["b3"]
    cache = (X, n1, h1, bn1, n2, h2, bn2, dropout_masks)
    return Z, cache


def mlp_loss_and_grads(params, X, Y, weight_decay=0.0, bn_stats=None,
                       dropout_masks=None):
    """Cross-entropy loss and analytic gradients for every parameter."""
    Z, cache = mlp_forward(params, X, bn_stats, dropout_masks)
    X_in, n1, h1, bn1, n2, h2, bn2, masks = cache
    m = X.shape[0]
    loss = _ce_loss(Z, Y)
    for key in ("W1", "W2", "W3"):
        loss += 0.5 * weight_decay * float((params[key] * params[key]).sum())

    dZ = (softmax_rows(Z) - Y) / m
    grads = {"W3": h2.T @ dZ + weight_decay * params["W3"], "b3": dZ.sum(axis=0)}
    dh2 = dZ @ params["W3"].T
    if masks is not None:
        dh2 = dh2 * masks[1]
    dn2 = dh2 * (n2 > 0)
    da2, grads["g2"], grads["be2"] = _bn_backward(dn2, params["g2"], bn2)
    grads["W2"] = h1.T @ da2 + weight_decay * params["W2"]
    grads["b2"] = da2.sum(axis=0)
    dh1 = da2 @ params["W2"].T
    if masks is not None:
        dh1 = dh1 * masks[0]
    dn1 = dh1 * (n1 > 0)
    da1, grads["g1"], grads["be1"] = _bn_backward(dn1, params["g1"], bn1)
    grads["W1"] = X_in.T @ da1 + weight_decay * params["W1"]
    grads["b1"] = da1.sum(axis=0)
    return loss, grads


def _mlp_batch_stats(params, X):
    """Batch-normalization statistics of the training batch under the given
    parameters (running statistics equal batch statistics for full batch)."""
    a1 = X @ params["W1"] + params["b1"]
    mu1, var1 = a1.mean(axis=0), a1.var(axis=0)
    n1 = params["g1"] * (a1 - mu1) / np.sqrt(var1 + _BN_EPS) + params["be1"]
    h1 = np.maximum(n1, 0.0)
    a2 = h1 @ params["W2"] + params["b2"]
    mu2, var2 = a2.mean(axis=0), a2.var(axis=0)
    return ((mu1, var1), (mu2, var2))


def mlp_scores(params, X, bn_stats) -> np.ndarray:
    """Inference-mode softmax scores (dropout off, fixed statistics)."""
    Z, _ = mlp_forward(params, X, bn_stats=bn_stats, dropout_masks=None)
    return softmax_rows(Z)


def train_mlp(features, Y, labeled, cfg: TrainConfig, validation=None,
              source: str = "mlp") -> BasePrediction:
    """Fit the three-layer MLP on the labeled rows, full batch.

    Dropout and batch statistics are active during training only; inference
    uses statistics computed over the full training batch. Model selection
    keeps the best validation-accuracy checkpoint when validation is given.
    """
    X = np.asarray(features, dtype=np.float64)
    labeled = np.asarray(labeled, dtype=np.int64)
    T = _one_hot_rows(Y, labeled)
    Xl = X[labeled]
    p, c = X.shape[1], T.shape[1]
    if labeled.size < c:
        raise ValueError(f"need at least {c} labeled rows, got {labeled.size}")
    rng = as_rng(cfg.seed)
    params = init_mlp_params(p, cfg.hidden, c, rng)
    opt = _Optimizer(cfg.optimizer, cfg.lr)

    best = None
    checkpoints: list[tuple[int, np.ndarray]] = []
    val_idx = val_lab = None
    if validation is not None:
        val_idx = np.asarray(validation[0], dtype=np.int64)
        val_lab = np.asarray(validation[1], dtype=np.int64)

    keep = 1.0 - cfg.dropout
    losses = []
    for epoch in range(1, cfg.epochs + 1):
        masks = None
        if cfg.dropout > 0:
            masks = ((rng.random(size=(Xl.shape[0], cfg.hidden)) < keep) / keep,
                     (rng.random(size=(Xl.shape[0], cfg.hidden)) < keep) / keep)
        loss, grads = mlp_loss_and_grads(params, Xl, T, cfg.weight_decay,
                                         bn_stats=None, dropout_masks=masks)
        if not np.isfinite(loss):
            raise TrainingDivergence(epoch)
        losses.append(loss)
        opt.step(params, grads)

        need_eval = val_idx is not None or (cfg.track_every and epoch % cfg.track_every == 0)
        if need_eval:
            stats = _mlp_batch_stats(params, Xl)
            if val_idx is not None:
                pv = np.argmax(mlp_scores(params, X[val_idx], stats), axis=1)
                acc = float(np.mean(pv == val_lab))
                if best is None or acc > best[0]:
                    best = (acc, {k: v.copy() for k, v in params.items()}, stats)
            if cfg.track_every and epoch % cfg.track_every == 0:
                checkpoints.append((epoch, mlp_scores(params, X, stats)))

    if cfg.select_best and best is not None:
        params, stats = best[1], best[2]
    else:
        stats = _mlp_batch_stats(params, Xl)
    scores = mlp_scores(params, X, stats)
    return BasePrediction(scores, source, checkpoints or None,
                          model={"params": params, "bn_stats": stats,
                                 "loss_history": np.asarray(losses)})


# ---------------------------------------------------------------------------
# estimator wrappers


def _stacked_fit(train_fn, config, X, y, X_val, y_val):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    c = int(y.max()) + 1
    Y = np.zeros((X.shape[0], c))
    Y[np.arange(X.shape[0]), y] = 1.0
    if X_val is None:
        return train_fn(X, Y, np.arange(X.shape[0]), config), c
    stacked = np.vstack([X, np.asarray(X_val, dtype=np.float64)])
    Yfull = np.vstack([Y, np.zeros((stacked.shape[0] - X.shape[0], c))])
    validation = (np.arange(X.shape[0], stacked.shape[0]),
                  np.asarray(y_val, dtype=np.int64))
    return train_fn(stacked, Yfull, np.arange(X.shape[0]), config, validation), c


class LinearSoftmaxClassifier(BaseEstimator, ClassifierMixin):
    """One linear layer with softmax, trained full batch."""

    def __init__(self, epochs=1000, lr=0.01, optimizer="adam", weight_decay=0.0,
                 seed=0, select_best=True):
        self.epochs = epochs
        self.lr = lr
        self.optimizer = optimizer
        self.weight_decay = weight_decay
        self.seed = seed
        self.select_best = select_best

    def fit(self, X, y, X_val=None, y_val=None):
        cfg = TrainConfig(epochs=self.epochs, lr=self.lr, optimizer=self.optimizer,
                          weight_decay=self.weight_decay, seed=self.seed,
                          select_best=self.select_best)
        pred, c = _stacked_fit(train_linear_softmax, cfg, X, y, X_val, y_val)
        self.weights_ = pred.model["W"]
        self.bias_ = pred.model["b"]
        self.classes_ = np.arange(c)
        self.n_features_in_ = self.weights_.shape[0]
        return self

    def predict_proba(self, X) -> np.ndarray:
        if not hasattr(self, "weights_"):
            raise NotFittedError("call fit before predict")
        return softmax_rows(np.asarray(X, dtype=np.float64) @ self.weights_ + self.bias_)

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.predict_proba(X), axis=1)


class MLPClassifier(BaseEstimator, ClassifierMixin):
    """Three-layer MLP (ReLU, batch norm, dropout), trained full batch."""

    def __init__(self, hidden=256, dropout=0.5, epochs=1000, lr=0.01,
                 optimizer="adam", weight_decay=0.0, seed=0, select_best=True):
        self.hidden = hidden
        self.dropout = dropout
        self.epochs = epochs
        self.lr = lr
        self.optimizer = optimizer
        self.weight_decay = weight_decay
        self.seed = seed
        self.select_best = select_best

    def fit(self, X, y, X_val=None, y_val=None):
        cfg = TrainConfig(epochs=self.epochs, lr=self.lr, optimizer=self.optimizer,
                          weight_decay=self.weight_decay, seed=self.seed,
                          hidden=self.hidden, dropout=self.dropout,
                          select_best=self.select_best)
        pred, c = _stacked_fit(train_mlp, cfg, X, y, X_val, y_val)
        self.params_ = pred.model["params"]
        self.bn_stats_ = pred.model["bn_stats"]
        self.classes_ = np.arange(c)
        self.n_features_in_ = self.params_["W1"].shape[0]
        return self

    def predict_proba(self, X) -> np.ndarray:
        if not hasattr(self, "params_"):
            raise NotFittedError("call fit before predict")
        return mlp_scores(self.params_, np.asarray(X, dtype=np.float64), self.bn_stats_)

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.predict_proba(X), axis=1)
