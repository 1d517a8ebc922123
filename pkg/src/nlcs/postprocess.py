"""Residual correction and smoothing of base predictions.

Two-stage post-processing: propagate the labeled-node residuals of a base
prediction over the graph and add them back (scaled) to the unlabeled rows,
then smooth the corrected scores anchored to the ground-truth labels. The
propagation operators come in a linear (edge-only) variant and a triangle
variant with a nonlinear mixing function.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .graph import Graph, enumerate_triangles, normalized_adjacency
from .spreading import LabelMatrix, PropagationParams, _spread, predict_argmax
from .validation import as_score_matrix


def error_init(scores, Y: LabelMatrix) -> np.ndarray:
    """Initial residual matrix: prediction minus one-hot truth on labeled rows,
    exactly zero on unlabeled rows."""
    X = as_score_matrix(scores, n=Y.n, c=Y.num_classes, name="base prediction")
    E = np.zeros_like(X)
    L = Y.labeled
    E[L] = X[L] - Y.matrix[L]
    return E


def residual_propagate(S, tri, E0, mixing="mean", params: PropagationParams | None = None,
                       teleport: str = "error", labels: LabelMatrix | None = None,
                       stats: dict | None = None) -> np.ndarray:
    """Spread residuals: E <- alpha*NL(E) + beta*S@E + (1-alpha-beta)*T.

    No renormalization inside this loop. The teleport T is the initial
    residual by default; ``teleport="labels"`` substitutes the one-hot label
    matrix instead (requires ``labels``).
    """
    if params is None:
        raise ValueError("params is required")
    E0 = as_score_matrix(E0, name="initial residual")
    if teleport == "error":
        T = E0
    elif teleport == "labels":
        if labels is None:
            raise ValueError("teleport='labels' requires the label matrix")
        T = labels.matrix
    else:
        raise ValueError(f"teleport must be 'error' or 'labels', got {teleport!r}")
    return _spread(S, tri, E0, T, mixing, params, normalize=False,
                   norm_mode="column", stats=stats)


def autoscale(E0, labeled) -> float:
    """Mean L1 norm of the labeled rows of the initial residual."""
    E0 = as_score_matrix(E0, name="initial residual")
    labeled = np.asarray(labeled, dtype=np.int64).ravel()
    if labeled.size == 0:
        raise ValueError("autoscale needs at least one labeled node")
    return float(np.abs(E0[labeled]).sum(axis=1).mean())


def correct(scores, residual, scale: float, unlabeled) -> np.ndarray:
    """Add L1-normalized propagated residuals, scaled, to the unlabeled rows.

    Rows whose propagated residual has zero L1 norm pass through unchanged,
    as do all labeled rows.
    """
    if scale < 0:
        raise ValueError("scale must be nonnegative")
    X = as_score_matrix(scores, name="base prediction")
    E = as_score_matrix(residual, n=X.shape[0], c=X.shape[1], name="propagated residual")
    U = np.asarray(unlabeled, dtype=np.int64).ravel()
    out = X.copy()
    norms = np.abs(E[U]).sum(axis=1)
    hit = norms > 0
    rows = U[hit]
    out[rows] = X[rows] + scale * E[rows] / norms[hit][:, None]
    return out


def smooth(corrected, Y: LabelMatrix, S, tri, mixing="mean",
           params: PropagationParams | None = None, teleport: str = "labels",
           norm_mode: str = "column", stats: dict | None = None) -> np.ndarray:
    """Label-anchored smoothing of corrected scores.

    The state starts from the one-hot labels on labeled rows and the corrected
    scores elsewhere, then runs the normalized spreading iteration. The
    teleport is the label matrix by default; ``teleport="initial"`` uses the
    starting state instead.
    """
    if params is None:
        raise ValueError("params is required")
    Xc = as_score_matrix(corrected, n=Y.n, c=Y.num_classes, name="corrected scores")
    G0 = Xc.copy()
    G0[Y.labeled] = Y.matrix[Y.labeled]
    if teleport == "labels":
        T = Y.matrix
    elif teleport == "initial":
        T = G0
    else:
        raise ValueError(f"teleport must be 'labels' or 'initial', got {teleport!r}")
    return _spread(S, tri, G0, T, mixing, params, normalize=True,
                   norm_mode=norm_mode, stats=stats)


def linear_correct_and_smooth(scores, Y: LabelMatrix, S, correct_alpha: float,
                              smooth_alpha: float, num_iter: int = 50,
                              tol: float | None = None):
    """Edge-only correct-and-smooth baseline.

    Residuals follow E <- a*S@E + (1-a)*E0, are autoscaled and added back;
    smoothing follows G <- a*S@G + (1-a)*G0 with no renormalization. Both
    stages are the triangle recurrences with the triangle term removed.
    Returns (corrected, smoothed).
    """
    if not (0 < correct_alpha < 1) or not (0 < smooth_alpha < 1):
        raise ValueError("correct_alpha and smooth_alpha must lie in (0, 1)")
    cp = PropagationParams(alpha=0.0, beta=correct_alpha, num_iter=num_iter, tol=tol)
    sp_ = PropagationParams(alpha=0.0, beta=smooth_alpha, num_iter=num_iter, tol=tol)
    E0 = error_init(scores, Y)
    E_hat = residual_propagate(S, None, E0, params=cp, teleport="error")
    lam = autoscale(E0, Y.labeled)
    corrected = correct(scores, E_hat, lam, Y.unlabeled)
    G0 = corrected.copy()
    G0[Y.labeled] = Y.matrix[Y.labeled]
    smoothed = _spread(S, None, G0, G0, "mean", sp_,
                       normalize=False, norm_mode="column", stats=None)
    return corrected, smoothed


class CorrectAndSmooth(BaseEstimator):
    """Linear correct-and-smooth post-processor with an estimator interface.

    fit binds the graph and seed labels; transform refines a base score
    matrix and stores the per-stage outputs (scale_, corrected_, smoothed_).
    """

    def __init__(self, correct_alpha=0.8, smooth_alpha=0.8, num_iter=50, tol=None,
                 num_classes=None):
        self.correct_alpha = correct_alpha
        self.smooth_alpha = smooth_alpha
        self.num_iter = num_iter
        self.tol = tol
        self.num_classes = num_classes

    def fit(self, graph: Graph, y, operators=None):
        Y = LabelMatrix.from_labels(np.asarray(y, dtype=np.int64), self.num_classes)
        if Y.n != graph.num_nodes:
            raise ValueError("label vector length does not match node count")
        self.S_ = operators[0] if operators is not None else normalized_adjacency(graph)
        self.label_matrix_ = Y
        return self

    def transform(self, scores) -> np.ndarray:
        if not hasattr(self, "S_"):
            raise NotFittedError("call fit before transform")
        cp = PropagationParams(alpha=0.0, beta=self.correct_alpha,
                               num_iter=self.num_iter, tol=self.tol)
        sp_ = PropagationParams(alpha=0.0, beta=self.smooth_alpha,
                                num_iter=self.num_iter, tol=self.tol)
        Y = self.label_matrix_
        E0 = error_init(scores, Y)
        self.scale_ = autoscale(E0, Y.labeled)
        E_hat = residual_propagate(self.S_, None, E0, params=cp, teleport="error")
        self.corrected_ = correct(scores, E_hat, self.scale_, Y.unlabeled)
        G0 = self.corrected_.copy()
        G0[Y.labeled] = Y.matrix[Y.labeled]
        self.smoothed_ = _spread(self.S_, None, G0, G0, "mean", sp_,
                                 normalize=False, norm_mode="column", stats=None)
        return self.smoothed_

    def predict(self, scores, idx=None) -> np.ndarray:
        return predict_argmax(self.transform(scores), idx)


class NonlinearCorrectAndSmooth(BaseEstimator):
    """Triangle-based correct-and-smooth post-processor.

    Correction spreads residuals through the nonlinear triangle operator plus
    plain diffusion; smoothing runs the normalized spreading iteration from
    the corrected state. Teleport choices follow the module functions:
    ``correct_teleport`` in {"error", "labels"}, ``smooth_teleport`` in
    {"labels", "initial"}.
    """

    def __init__(self, correct_alpha=0.35, correct_beta=0.35,
                 smooth_alpha=0.35, smooth_beta=0.35, mixing="mean",
                 num_iter=50, tol=None, correct_teleport="error",
                 smooth_teleport="labels", norm_mode="column",
                 weight_rule="auto", num_classes=None):
        self.correct_alpha = correct_alpha
        self.correct_beta = correct_beta
        self.smooth_alpha = smooth_alpha
        self.smooth_beta = smooth_beta
        self.mixing = mixing
        self.num_iter = num_iter
        self.tol = tol
        self.correct_teleport = correct_teleport
        self.smooth_teleport = smooth_teleport
        self.norm_mode = norm_mode
        self.weight_rule = weight_rule
        self.num_classes = num_classes

    def fit(self, graph: Graph, y, operators=None):
        Y = LabelMatrix.from_labels(np.asarray(y, dtype=np.int64), self.num_classes)
        if Y.n != graph.num_nodes:
            raise ValueError("label vector length does not match node count")
        if operators is not None:
            self.S_, self.triangles_ = operators
        else:
            self.S_ = normalized_adjacency(graph)
            self.triangles_ = enumerate_triangles(graph, self.weight_rule)
        self.label_matrix_ = Y
        return self

    def transform(self, scores) -> np.ndarray:
        if not hasattr(self, "S_"):
            raise NotFittedError("call fit before transform")
        cp = PropagationParams(alpha=self.correct_alpha, beta=self.correct_beta,
                               num_iter=self.num_iter, tol=self.tol)
        sp_ = PropagationParams(alpha=self.smooth_alpha, beta=self.smooth_beta,
                                num_iter=self.num_iter, tol=self.tol)
        Y = self.label_matrix_
        E0 = error_init(scores, Y)
        self.scale_ = autoscale(E0, Y.labeled)
        E_hat = residual_propagate(self.S_, self.triangles_, E0, self.mixing, cp,
                                   teleport=self.correct_teleport, labels=Y)
        self.corrected_ = correct(scores, E_hat, self.scale_, Y.unlabeled)
        self.smoothed_ = smooth(self.corrected_, Y, self.S_, self.triangles_,
                                self.mixing, sp_, teleport=self.smooth_teleport,
                                norm_mode=self.norm_mode)
        return self.smoothed_

    def predict(self, scores, idx=None) -> np.ndarray:
        return predict_argmax(self.transform(scores), idx)
