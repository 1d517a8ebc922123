"""Label spreading operators: plain diffusion and triangle-based spreading.

The triangle operators treat the graph's 3-cliques as order-3 relations. A
state matrix row is updated from pairs of far-end values mixed by a chosen
pairwise function, degree-normalized on the way in and out. The spreading
iteration mixes that triangle term, plain diffusion, and a teleport back to
the seed labels, renormalizing each column by a quadratic-form functional of
the co-degree matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .graph import Graph, NormalizedAdjacency, TriangleSet, enumerate_triangles, normalized_adjacency
from .mixing import apply_mixing, get_mixing
from .validation import as_index_array, as_score_matrix, check_alpha_beta, check_finite


@dataclass
class LabelMatrix:
    """One-hot seed labels plus the labeled/unlabeled index partition.

    Labeled rows are exactly one-hot; unlabeled rows are all zero.
    """

    matrix: np.ndarray
    labeled: np.ndarray
    unlabeled: np.ndarray

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=np.float64)
        n = self.matrix.shape[0]
        self.labeled = as_index_array(self.labeled, n, "labeled set")
        self.unlabeled = as_index_array(self.unlabeled, n, "unlabeled set")
        if np.intersect1d(self.labeled, self.unlabeled).size:
            raise ValueError("labeled and unlabeled sets overlap")
        if self.labeled.size + self.unlabeled.size != n:
            raise ValueError("labeled and unlabeled sets must partition all nodes")
        L = self.matrix[self.labeled]
        if L.size and (not np.all(np.isin(L, (0.0, 1.0))) or not np.all(L.sum(axis=1) == 1.0)):
            raise ValueError("labeled rows must be exactly one-hot")
        if self.unlabeled.size and self.matrix[self.unlabeled].any():
            raise ValueError("unlabeled rows must be all zero")

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def num_classes(self) -> int:
        return self.matrix.shape[1]

    @classmethod
    def from_labels(cls, y, num_classes: int | None = None) -> "LabelMatrix":
        """Build from an int vector where -1 marks unlabeled nodes."""
        y = np.asarray(y, dtype=np.int64).ravel()
        labeled = np.flatnonzero(y >= 0)
        unlabeled = np.flatnonzero(y < 0)
        if labeled.size == 0:
            raise ValueError("no labeled nodes")
        c = int(num_classes) if num_classes is not None else int(y[labeled].max()) + 1
        if y[labeled].max() >= c:
            raise ValueError(f"label {y[labeled].max()} outside [0, {c})")
        Y = np.zeros((y.size, c))
        Y[labeled, y[labeled]] = 1.0
        return cls(Y, labeled, unlabeled)


@dataclass(frozen=True)
class PropagationParams:
    """Spreading parameters: teleport split alpha/beta and iteration budget."""

    alpha: float
    beta: float = 0.0
    num_iter: int = 50
    tol: float | None = None

    def __post_init__(self):
        check_alpha_beta(self.alpha, self.beta)
        if self.num_iter < 0:
            raise ValueError("num_iter must be >= 0")
        if self.tol is not None and self.tol <= 0:
            raise ValueError("tol must be positive when given")


def _seed_matrix(Y) -> np.ndarray:
    if isinstance(Y, LabelMatrix):
        return Y.matrix
    return as_score_matrix(Y, name="seed matrix")


def lp_iterate(S, Y, params: PropagationParams) -> np.ndarray:
    """Plain label propagation: iterate F <- alpha*S@F + (1-alpha)*Y from F=Y."""
    Ym = _seed_matrix(Y)
    alpha = params.alpha
    F = Ym.copy()
    for _ in range(params.num_iter):
        F_next = alpha * (S @ F) + (1.0 - alpha) * Ym
        if params.tol is not None and np.abs(F_next - F).max() < params.tol:
            F = F_next
            break
        F = F_next
    return check_finite(F, "propagation state")


def tensor_map(tri: TriangleSet, f, mixing="mean", stats: dict | None = None) -> np.ndarray:
    """Aggregate mixed far-end pairs over all triangles.

    For each column, out_i = sum over triangles {i, j, k} of
    2 * weight * mix(f_j, f_k), and symmetrically for j and k. Undefined
    mixing results fall back to 0 (counted in ``stats`` when provided).
    """
    fn = get_mixing(mixing)
    arr = np.asarray(f, dtype=np.float64)
    squeeze = arr.ndim == 1
    F = arr[:, None] if squeeze else arr
    if F.shape[0] != tri.n:
        raise ValueError(f"state has {F.shape[0]} rows, triangle set expects {tri.n}")
    out = np.zeros_like(F)
    if tri.num_triangles:
        i, j, k = tri.triples[:, 0], tri.triples[:, 1], tri.triples[:, 2]
        two_tau = 2.0 * tri.weights
        s_jk = apply_mixing(fn, F[j], F[k], stats)
        s_ik = apply_mixing(fn, F[i], F[k], stats)
        s_ij = apply_mixing(fn, F[i], F[j], stats)
        n = tri.n
        for col in range(F.shape[1]):
            acc = np.bincount(i, weights=two_tau * s_jk[:, col], minlength=n)
            acc += np.bincount(j, weights=two_tau * s_ik[:, col], minlength=n)
            acc += np.bincount(k, weights=two_tau * s_ij[:, col], minlength=n)
            out[:, col] = acc
    return out[:, 0] if squeeze else out


def nonlinear_map(tri: TriangleSet, f, mixing="mean", stats: dict | None = None) -> np.ndarray:
    """Hyperdegree-normalized tensor aggregation: D^-1/2 applied around the map.

    Nodes in no triangle have zero hyperdegree and produce zero rows.
    """
    scale = tri.inv_sqrt_hyperdegrees
    arr = np.asarray(f, dtype=np.float64)
    if arr.ndim == 1:
        return scale * tensor_map(tri, scale * arr, mixing, stats)
    return scale[:, None] * tensor_map(tri, scale[:, None] * arr, mixing, stats)


def spreading_norm(tri: TriangleSet, f, mixing="mean", stats: dict | None = None) -> float:
    """Normalization functional over the co-degree matrix.

    0.5 * sqrt(sum_ij B_ij * mix(f_i/sqrt(delta_i), f_j/sqrt(delta_j))^2).
    Returns 0 for triangle-free graphs; callers must skip division then.
    """
    f = np.asarray(f, dtype=np.float64).ravel()
    if f.shape[0] != tri.n:
        raise ValueError(f"vector has {f.shape[0]} entries, expected {tri.n}")
    if tri.num_triangles == 0:
        return 0.0
    fn = get_mixing(mixing)
    rows, cols, vals = tri.codegree_entries()
    fs = tri.inv_sqrt_hyperdegrees * f
    mixed = apply_mixing(fn, fs[rows], fs[cols], stats)
    return 0.5 * float(np.sqrt(np.sum(vals * mixed * mixed)))


def _norm_divide(tri, G, fn, norm_mode, stats):
    """Divide by the spreading norm, per column or globally; zero norms skip."""
    phis = np.array([spreading_norm(tri, G[:, c], fn, stats) for c in range(G.shape[1])])
    if norm_mode == "global":
        phi = float(np.sqrt(np.sum(phis * phis)))
        return G / phi if phi > 0 else G
    if norm_mode != "column":
        raise ValueError(f"norm_mode must be 'column' or 'global', got {norm_mode!r}")
    out = G.copy()
    nz = phis > 0
    out[:, nz] = G[:, nz] / phis[nz]
    return out


def _spread(S, tri, init, teleport, mixing, params, normalize, norm_mode, stats):
    """Shared engine: F <- alpha*NL(F) + beta*S@F + (1-alpha-beta)*T, optionally
    renormalized by the spreading norm each step."""
    fn = get_mixing(mixing)
    alpha, beta = params.alpha, params.beta
    if alpha > 0:
        if tri is None or tri.num_triangles == 0:
            raise ValueError("alpha > 0 requires a graph with at least one triangle")
    F = init.copy()
    for _ in range(params.num_iter):
        G = (1.0 - alpha - beta) * teleport
        if beta != 0.0:
            G = G + beta * (S @ F)
        if alpha != 0.0:
            G = G + alpha * nonlinear_map(tri, F, fn, stats)
        if normalize:
            G = _norm_divide(tri, G, fn, norm_mode, stats)
        if params.tol is not None and np.abs(G - F).max() < params.tol:
            F = G
            break
        F = G
    return check_finite(F, "spreading state")


def nhols_iterate(S, tri: TriangleSet, Y, mixing="mean",
                  params: PropagationParams | None = None,
                  norm_mode: str = "column", stats: dict | None = None) -> np.ndarray:
    """Normalized higher-order spreading from the seed labels.

    Each step aggregates the triangle term and plain diffusion with a teleport
    back to Y, then renormalizes (per column by default; ``norm_mode="global"``
    uses one functional value for the whole matrix). Columns whose norm is 0
    are left unnormalized.
    """
    if params is None:
        raise ValueError("params is required")
    Ym = _seed_matrix(Y)
    return _spread(S, tri, Ym, Ym, mixing, params, normalize=True,
                   norm_mode=norm_mode, stats=stats)


def predict_argmax(F, idx=None) -> np.ndarray:
    """Row-wise argmax labels; ties resolve to the lowest class index."""
    F = as_score_matrix(F, name="score matrix")
    rows = F if idx is None else F[np.asarray(idx, dtype=np.int64)]
    return np.argmax(rows, axis=1)


def _labels_from_y(y, num_classes):
    y = np.asarray(y, dtype=np.int64).ravel()
    return LabelMatrix.from_labels(y, num_classes)


class LabelPropagation(BaseEstimator):
    """Semi-supervised node classifier by iterative label diffusion.

    fit takes a :class:`~nlcs.graph.Graph` and an int label vector with -1
    for unlabeled nodes; predict returns argmax labels for the requested rows.
    """

    def __init__(self, alpha=0.9, num_iter=50, tol=None, num_classes=None):
        self.alpha = alpha
        self.num_iter = num_iter
        self.tol = tol
        self.num_classes = num_classes

    def fit(self, graph: Graph, y):
        Y = _labels_from_y(y, self.num_classes)
        if Y.n != graph.num_nodes:
            raise ValueError("label vector length does not match node count")
        S = normalized_adjacency(graph)
        params = PropagationParams(alpha=self.alpha, num_iter=self.num_iter, tol=self.tol)
        self.scores_ = lp_iterate(S, Y, params)
        self.label_matrix_ = Y
        self.classes_ = np.arange(Y.num_classes)
        return self

    def predict(self, idx=None) -> np.ndarray:
        if not hasattr(self, "scores_"):
            raise NotFittedError("call fit before predict")
        return predict_argmax(self.scores_, idx)


class HigherOrderLabelSpreading(BaseEstimator):
    """Semi-supervised node classifier by normalized triangle spreading."""

    def __init__(self, alpha=0.35, beta=0.35, mixing="mean", num_iter=50, tol=None,
                 norm_mode="column", weight_rule="auto", num_classes=None):
        self.alpha = alpha
        self.beta = beta
        self.mixing = mixing
        self.num_iter = num_iter
        self.tol = tol
        self.norm_mode = norm_mode
        self.weight_rule = weight_rule
        self.num_classes = num_classes

    def fit(self, graph: Graph, y, operators=None):
        """Fit on a graph and seed labels; ``operators=(S, triangles)`` reuses
        prebuilt structures across estimators."""
        Y = _labels_from_y(y, self.num_classes)
        if Y.n != graph.num_nodes:
            raise ValueError("label vector length does not match node count")
        if operators is not None:
            S, tri = operators
        else:
            S = normalized_adjacency(graph)
            tri = enumerate_triangles(graph, self.weight_rule)
        params = PropagationParams(alpha=self.alpha, beta=self.beta,
                                   num_iter=self.num_iter, tol=self.tol)
        self.scores_ = nhols_iterate(S, tri, Y, self.mixing, params, self.norm_mode)
        self.label_matrix_ = Y
        self.classes_ = np.arange(Y.num_classes)
        return self

    def predict(self, idx=None) -> np.ndarray:
        if not hasattr(self, "scores_"):
            raise NotFittedError("call fit before predict")
        return predict_argmax(self.scores_, idx)
