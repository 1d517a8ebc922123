"""Sparse undirected graph structures and derived operators.

Everything downstream (diffusion, triangle spreading, clustering analysis)
is built from two immutable structures: a CSR adjacency :class:`Graph` and a
:class:`TriangleSet` enumerating its 3-cliques. Construction is strict about
input hygiene (symmetry, positive weights, no self-loops) so later stages can
assume clean operators.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp


class Graph:
    """Undirected weighted graph stored in CSR form.

    Parameters
    ----------
    n : int
        Node count; ids are 0-based.
    matrix : scipy.sparse.csr_matrix
        Symmetric adjacency with positive entries and an empty diagonal.
    self_loops_dropped : int
        Number of self-loop records discarded during construction.
    """

    def __init__(self, n: int, matrix: sp.csr_matrix, self_loops_dropped: int = 0):
        matrix = sp.csr_matrix(matrix)
        matrix.sort_indices()
        if matrix.shape != (n, n):
            raise ValueError(f"adjacency shape {matrix.shape} does not match n={n}")
        self.n = int(n)
        self.matrix = matrix
        self.self_loops_dropped = int(self_loops_dropped)
        self.degrees = np.asarray(matrix.sum(axis=1)).ravel()

    @property
    def num_nodes(self) -> int:
        return self.n

    @property
    def num_edges(self) -> int:
        """Number of undirected edges (half the stored entry count)."""
        return self.matrix.nnz // 2

    @property
    def unweighted_degrees(self) -> np.ndarray:
        return np.diff(self.matrix.indptr)

    def neighbors(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        """Neighbor ids and edge weights of node ``i``."""
        lo, hi = self.matrix.indptr[i], self.matrix.indptr[i + 1]
        return self.matrix.indices[lo:hi], self.matrix.data[lo:hi]

    def adjacency(self) -> sp.csr_matrix:
        return self.matrix

    def validate(self) -> None:
        """Check the structural invariants; raises ValueError on violation."""
        A = self.matrix
        if (A != A.T).nnz != 0:
            raise ValueError("adjacency is not symmetric")
        if A.diagonal().any():
            raise ValueError("adjacency has self-loops")
        if A.nnz and A.data.min() <= 0:
            raise ValueError("adjacency has non-positive weights")
        recomputed = np.asarray(A.sum(axis=1)).ravel()
        if not np.array_equal(recomputed, self.degrees):
            raise ValueError("stored degrees disagree with adjacency row sums")


def build_graph(edge_records, n: int | None = None) -> Graph:
    """Build a :class:`Graph` from (i, j) or (i, j, w) records.

    Duplicate records of the same undirected edge are summed; self-loops are
    dropped and counted on the result. Weights default to 1.
    """
    rows, cols, vals = [], [], []
    loops = 0
    for rec in edge_records:
        if len(rec) == 2:
            i, j = rec
            w = 1.0
        elif len(rec) == 3:
            i, j, w = rec
            w = float(w)
            if w <= 0:
                raise ValueError(f"edge ({i}, {j}) has non-positive weight {w}")
        else:
            raise ValueError(f"edge record {rec!r} must have 2 or 3 fields")
        i, j = int(i), int(j)
        if i < 0 or j < 0:
            raise ValueError(f"edge ({i}, {j}) has a negative node id")
        if n is not None and (i >= n or j >= n):
            raise ValueError(f"edge ({i}, {j}) outside id range [0, {n})")
        if i == j:
            loops += 1
            continue
        if i > j:
            i, j = j, i
        rows.append(i)
        cols.append(j)
        vals.append(w)
    if not rows:
        raise ValueError("edge list is empty (or contains only self-loops)")
    if n is None:
        n = int(max(max(rows), max(cols))) + 1
    upper = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    full = (upper + upper.T).tocsr()
    full.sort_indices()
    return Graph(n, full, self_loops_dropped=loops)


def read_edge_file(path) -> list[tuple[int, int, float]]:
    """Parse an edge-list file: one ``i j [w]`` per line, ``#`` comments allowed.

    Whitespace-separated, which also covers the two-column tab-separated
    export convention. Returns raw records for :func:`build_graph`.
    """
    records = []
    path = Path(path)
    with path.open() as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            parts = text.split()
            if len(parts) not in (2, 3):
                raise ValueError(f"{path}:{lineno}: expected 'i j [w]', got {line.rstrip()!r}")
            try:
                i, j = int(parts[0]), int(parts[1])
                w = float(parts[2]) if len(parts) == 3 else 1.0
            except ValueError:
                raise ValueError(f"{path}:{lineno}: malformed edge line {line.rstrip()!r}") from None
            records.append((i, j, w))
    if not records:
        raise ValueError(f"{path}: no edges found")
    return records


class NormalizedAdjacency:
    """Symmetric diffusion operator S with S_ij = w(ij) / sqrt(d_i d_j).

    Rows and columns of isolated (zero-degree) nodes are all zero: such nodes
    neither send nor receive mass.
    """

    def __init__(self, matrix: sp.csr_matrix, zero_isolated: bool = True):
        self.matrix = sp.csr_matrix(matrix)
        self.zero_isolated = zero_isolated

    @property
    def shape(self):
        return self.matrix.shape

    def __matmul__(self, other):
        return self.matrix @ other

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()


def normalized_adjacency(g: Graph) -> NormalizedAdjacency:
    d = g.degrees
    with np.errstate(divide="ignore"):
        inv_sqrt = np.where(d > 0, 1.0 / np.sqrt(np.where(d > 0, d, 1.0)), 0.0)
    D = sp.diags(inv_sqrt)
    S = (D @ g.adjacency() @ D).tocsr()
    S.sort_indices()
    return NormalizedAdjacency(S)


@dataclass
class TriangleSet:
    """Enumerated 3-cliques with weights and the operators derived from them.

    The symmetric third-order weight convention places each triangle weight
    on all 6 vertex permutations, so the per-node totals ``hyperdegrees``
    satisfy delta_i = 2 * sum of weights of triangles containing i, and the
    co-degree matrix carries B_ij = sum of weights of triangles on edge (i, j).
    """

    n: int
    triples: np.ndarray          # (T, 3) int64, each row sorted i < j < k, rows in lexicographic order
    weights: np.ndarray          # (T,) float64, positive
    hyperdegrees: np.ndarray = field(init=False)
    counts: np.ndarray = field(init=False)       # unweighted per-node triangle membership
    codegree: sp.csr_matrix = field(init=False)  # symmetric B
    inv_sqrt_hyperdegrees: np.ndarray = field(init=False)

    def __post_init__(self):
        triples = np.asarray(self.triples, dtype=np.int64).reshape(-1, 3)
        weights = np.asarray(self.weights, dtype=np.float64).ravel()
        if triples.shape[0] != weights.shape[0]:
            raise ValueError("triples and weights length mismatch")
        if weights.size and weights.min() <= 0:
            raise ValueError("triangle weights must be positive")
        triples = np.sort(triples, axis=1)
        if triples.size:
            if triples[:, 0].min() < 0 or triples[:, 2].max() >= self.n:
                raise ValueError("triangle node id outside [0, n)")
            if (triples[:, 0] == triples[:, 1]).any() or (triples[:, 1] == triples[:, 2]).any():
                raise ValueError("degenerate triple with repeated node")
            order = np.lexsort((triples[:, 2], triples[:, 1], triples[:, 0]))
            triples = triples[order]
            weights = weights[order]
        self.triples = triples
        self.weights = weights

        delta = np.zeros(self.n)
        np.add.at(delta, triples.ravel(), np.repeat(2.0 * weights, 3))
        self.hyperdegrees = delta
        counts = np.zeros(self.n, dtype=np.int64)
        np.add.at(counts, triples.ravel(), 1)
        self.counts = counts

        i, j, k = triples[:, 0], triples[:, 1], triples[:, 2]
        rows = np.concatenate([i, j, i, k, j, k])
        cols = np.concatenate([j, i, k, i, k, j])
        vals = np.tile(weights, 6)
        B = sp.coo_matrix((vals, (rows, cols)), shape=(self.n, self.n)).tocsr()
        B.sort_indices()
        self.codegree = B
        Bc = B.tocoo()
        self._b_rows = Bc.row
        self._b_cols = Bc.col
        self._b_vals = Bc.data

        with np.errstate(divide="ignore"):
            self.inv_sqrt_hyperdegrees = np.where(
                delta > 0, 1.0 / np.sqrt(np.where(delta > 0, delta, 1.0)), 0.0
            )

    @property
    def num_triangles(self) -> int:
        return self.triples.shape[0]

    def codegree_entries(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """COO view (rows, cols, values) of the co-degree matrix."""
        return self._b_rows, self._b_cols, self._b_vals


def _triangle_weights(g: Graph, triples: np.ndarray, weight_rule) -> np.ndarray:
    if triples.shape[0] == 0:
        return np.zeros(0)
    A = g.adjacency()
    i, j, k = triples[:, 0], triples[:, 1], triples[:, 2]
    w_ij = np.asarray(A[i, j]).ravel()
    w_ik = np.asarray(A[i, k]).ravel()
    w_jk = np.asarray(A[j, k]).ravel()
    if weight_rule == "auto":
        unit = A.nnz == 0 or (A.data.min() == 1.0 and A.data.max() == 1.0)
        weight_rule = "unit" if unit else "geomean"
    if weight_rule == "unit":
        return np.ones(triples.shape[0])
    if weight_rule == "geomean":
        return np.cbrt(w_ij * w_ik * w_jk)
    if callable(weight_rule):
        return np.asarray(weight_rule(w_ij, w_ik, w_jk), dtype=np.float64)
    raise ValueError(f"unknown triangle weight rule {weight_rule!r}")


def enumerate_triangles(g: Graph, weight_rule="auto") -> TriangleSet:
    """Enumerate every 3-clique of ``g`` exactly once.

    Degree-ordered successor intersection ("forward" scheme): nodes are
    ranked by (degree, id), each edge keeps only its higher-ranked endpoint's
    direction, and a triangle is emitted at its two lowest-ranked vertices.
    Runs in O(m^(3/2)) intersections. The emitted triple list is canonically
    sorted, so the result is independent of traversal order.

    ``weight_rule`` is "auto" (unit weights when the graph is unweighted,
    otherwise the geometric mean of the three edge weights), "unit",
    "geomean", or a callable mapping the three edge-weight arrays
    (w_ij, w_ik, w_jk) of sorted triples to triangle weights.
    """
    n = g.num_nodes
    deg = g.unweighted_degrees
    rank = np.empty(n, dtype=np.int64)
    rank[np.lexsort((np.arange(n), deg))] = np.arange(n)

    A = g.adjacency()
    keep = rank[A.indices] > np.repeat(rank[np.arange(n)], np.diff(A.indptr))
    succ_counts = np.zeros(n, dtype=np.int64)
    np.add.at(succ_counts, np.repeat(np.arange(n), np.diff(A.indptr))[keep], 1)
    succ_indptr = np.concatenate([[0], np.cumsum(succ_counts)])
    succ = A.indices[keep]  # per-row slices stay sorted by node id

    tri_rows = []
    for u in range(n):
        su = succ[succ_indptr[u]:succ_indptr[u + 1]]
        if su.size < 2:
            continue
        for v in su:
            sv = succ[succ_indptr[v]:succ_indptr[v + 1]]
            if sv.size == 0:
                continue
            common = np.intersect1d(su, sv, assume_unique=True)
            for w in common:
                tri_rows.append((u, v, w))

    triples = np.asarray(tri_rows, dtype=np.int64).reshape(-1, 3)
    triples = np.sort(triples, axis=1)
    weights = _triangle_weights(g, triples, weight_rule)
    return TriangleSet(n=n, triples=triples, weights=weights)


def clustering_coefficient(g: Graph, tri: TriangleSet) -> np.ndarray:
    """Per-node clustering coefficient 2*T_i / (d_i * (d_i - 1)) in [0, 1].

    Uses unweighted triangle counts and unweighted degrees; nodes of degree
    below 2 get coefficient 0.
    """
    if tri.n != g.num_nodes:
        raise ValueError("triangle set was built for a different node count")
    d = g.unweighted_degrees.astype(np.float64)
    denom = d * (d - 1.0)
    out = np.zeros(g.num_nodes)
    mask = d >= 2
    out[mask] = 2.0 * tri.counts[mask] / denom[mask]
    return out
