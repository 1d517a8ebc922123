"""Shared fixtures and independent dense oracles.

The oracle implementations here are deliberately naive (dense matrices,
literal loops over all ordered index tuples) so they share nothing with the
package's sparse code paths.
"""

import itertools

import numpy as np
import pytest

from nlcs import build_graph, save_dataset


# ---------------------------------------------------------------------------
# graph helpers


def random_edges(rng, n, p):
    edges = []
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < p:
                edges.append((i, j))
    if not edges:
        edges.append((0, 1 % n if n > 1 else 0))
    return edges


def random_graph(rng, n, p, weighted=False):
    edges = random_edges(rng, n, p)
    if weighted:
        edges = [(i, j, float(rng.uniform(0.5, 2.0))) for i, j in edges]
    return build_graph(edges, n=n)


def dense_adjacency(g):
    return g.adjacency().toarray()


def make_sbm(rng, sizes, p_in=0.5, p_out=0.05, feature_noise=0.5):
    """Homophilous block-model graph with noisy one-hot features."""
    labels = np.repeat(np.arange(len(sizes)), sizes)
    n = labels.size
    edges = []
    for i in range(n):
        for j in range(i + 1, n):
            p = p_in if labels[i] == labels[j] else p_out
            if rng.random() < p:
                edges.append((i, j))
    graph = build_graph(edges, n=n)
    onehot = np.eye(len(sizes))[labels]
    features = onehot + feature_noise * rng.standard_normal((n, len(sizes)))
    return graph, labels, features


@pytest.fixture
def sbm_dataset_dir(tmp_path):
    """Canonical dataset directory for a small homophilous graph."""
    rng = np.random.default_rng(7)
    graph, labels, features = make_sbm(rng, [40, 40, 40])
    A = graph.adjacency().tocoo()
    edges = [(i, j) for i, j in zip(A.row, A.col) if i < j]
    dest = tmp_path / "toy"
    save_dataset(dest, edges, labels, features)
    return dest


# ---------------------------------------------------------------------------
# oracle mixing functions (reimplemented on purpose)


def o_mean(a, b):
    return (a + b) / 2.0


def o_max(a, b):
    return np.maximum(a, b)


def o_min(a, b):
    return np.minimum(a, b)


def o_geom(a, b):
    return np.sqrt(np.abs(a) * np.abs(b))


def o_harmonic(a, b):
    with np.errstate(divide="ignore", invalid="ignore"):
        out = 2.0 * a * b / (a + b)
    return np.where(np.isfinite(out), out, 0.0)


ORACLE_MIXINGS = {"mean": o_mean, "max": o_max, "min": o_min,
                  "geom": o_geom, "harmonic": o_harmonic}


# ---------------------------------------------------------------------------
# dense triangle oracles


def brute_force_triangles(A):
    """All 3-cliques of a dense adjacency by scanning every triple."""
    n = A.shape[0]
    out = []
    for i, j, k in itertools.combinations(range(n), 3):
        if A[i, j] > 0 and A[i, k] > 0 and A[j, k] > 0:
            out.append((i, j, k))
    return out


def dense_triangle_tensor(triples, taus, n):
    """Order-3 tensor with each triangle weight on all 6 permutations."""
    T = np.zeros((n, n, n))
    for (i, j, k), tau in zip(triples, taus):
        for a, b, c in itertools.permutations((i, j, k)):
            T[a, b, c] = tau
    return T


def oracle_hyperdegree(T3):
    return T3.sum(axis=(1, 2))


def oracle_codegree(T3):
    return T3.sum(axis=0)


def oracle_tensor_map(T3, F, mix):
    """out[i, c] = sum over ordered (j, k) of T3[i, j, k] * mix(F[j,c], F[k,c])."""
    F = np.atleast_2d(F.T).T
    n, c = F.shape
    out = np.zeros((n, c))
    for col in range(c):
        f = F[:, col]
        for i in range(n):
            acc = 0.0
            for j in range(n):
                for k in range(n):
                    if T3[i, j, k] != 0:
                        v = mix(np.float64(f[j]), np.float64(f[k]))
                        if not np.isfinite(v):
                            v = 0.0
                        acc += T3[i, j, k] * v
            out[i, col] = acc
    return out


def oracle_nonlinear_map(T3, F, mix):
    delta = oracle_hyperdegree(T3)
    scale = np.where(delta > 0, 1.0 / np.sqrt(np.where(delta > 0, delta, 1.0)), 0.0)
    F = np.atleast_2d(F.T).T
    return scale[:, None] * oracle_tensor_map(T3, scale[:, None] * F, mix)


def oracle_phi(T3, f, mix):
    delta = oracle_hyperdegree(T3)
    B = oracle_codegree(T3)
    scale = np.where(delta > 0, 1.0 / np.sqrt(np.where(delta > 0, delta, 1.0)), 0.0)
    fs = scale * f
    n = f.shape[0]
    total = 0.0
    for i in range(n):
        for j in range(n):
            if B[i, j] != 0:
                v = mix(np.float64(fs[i]), np.float64(fs[j]))
                if not np.isfinite(v):
                    v = 0.0
                total += B[i, j] * v * v
    return 0.5 * np.sqrt(total)


def oracle_nhols(S_dense, T3, Y, mix, alpha, beta, t):
    """Step-for-step normalized spreading with per-column normalization."""
    F = Y.copy()
    for _ in range(t):
        G = alpha * oracle_nonlinear_map(T3, F, mix) + beta * (S_dense @ F) \
            + (1 - alpha - beta) * Y
        out = G.copy()
        for col in range(G.shape[1]):
            phi = oracle_phi(T3, G[:, col], mix)
            if phi > 0:
                out[:, col] = G[:, col] / phi
        F = out
    return F


def oracle_residual(S_dense, T3, E0, mix, alpha, beta, t, teleport_matrix):
    E = E0.copy()
    for _ in range(t):
        E = alpha * oracle_nonlinear_map(T3, E, mix) + beta * (S_dense @ E) \
            + (1 - alpha - beta) * teleport_matrix
    return E
