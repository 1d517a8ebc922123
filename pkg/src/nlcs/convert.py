"""Converters from common public dataset releases to the canonical format.

Each converter reads a local copy of a published release (nothing is ever
fetched over the network) and writes ``edges.txt`` / ``labels.txt`` /
``features.txt`` via :func:`nlcs.datasets.save_dataset`. Every converter
prints the resulting node count, directed-entry count, and class count so
the output can be checked against published dataset tables.
"""

from __future__ import annotations

import pickle
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .datasets import save_dataset


def _report(tag: str, n: int, directed_entries: int, c: int) -> None:
    print(f"{tag}: n={n}, directed edge entries={directed_entries}, classes={c}")


def _undirected_records(pairs) -> list[tuple[int, int]]:
    seen = set()
    for i, j in pairs:
        if i == j:
            continue
        key = (i, j) if i < j else (j, i)
        seen.add(key)
    return sorted(seen)


def convert_planetoid(src_dir, name: str, dest) -> None:
    """Convert a pickled citation-network release (ind.<name>.* files).

    Reassembles features and labels in graph order. Releases whose test.index
    skips isolated nodes get zero feature rows and class 0 for those ids (the
    standard padding; they carry no ground truth in the release).
    """
    src = Path(src_dir)

    def load(part):
        with (src / f"ind.{name}.{part}").open("rb") as fh:
            return pickle.load(fh, encoding="latin1")

    x, y, tx, ty, allx, ally, graph = (load(p) for p in
                                       ("x", "y", "tx", "ty", "allx", "ally", "graph"))
    reorder = np.loadtxt(src / f"ind.{name}.test.index", dtype=np.int64)
    sorted_idx = np.sort(reorder)
    start = int(sorted_idx[0])
    span = int(sorted_idx[-1]) - start + 1
    if start != allx.shape[0]:
        raise ValueError("unexpected layout: test ids do not start after allx rows")

    if span != reorder.size:  # isolated test nodes missing from the list
        tx_ext = sp.lil_matrix((span, x.shape[1]))
        tx_ext[sorted_idx - start] = sp.lil_matrix(tx)
        tx = tx_ext.tocsr()
        ty_ext = np.zeros((span, y.shape[1]))
        ty_ext[sorted_idx - start] = ty
        ty = ty_ext

    features = sp.vstack([sp.csr_matrix(allx), sp.csr_matrix(tx)]).tolil()
    onehot = np.vstack([np.asarray(ally), np.asarray(ty)])
    features[reorder] = features[sorted_idx]
    onehot[reorder] = onehot[sorted_idx]
    labels = np.argmax(onehot, axis=1)

    n = allx.shape[0] + span
    pairs = [(int(i), int(j)) for i, nbrs in graph.items() for j in nbrs if i < n and j < n]
    records = _undirected_records(pairs)
    save_dataset(dest, records, labels[:n], np.asarray(features.todense())[:n])
    _report(name, n, 2 * len(records), int(labels.max()) + 1)


def convert_fb100(mat_path, dest, label_column: int = 4, min_class_size: int = 1) -> None:
    """Convert a social-network .mat release (adjacency + local_info table).

    Keeps nodes whose selected attribute column (default 4, the dorm field)
    is positive, optionally drops classes below ``min_class_size``, relabels
    the survivors densely, and takes the induced subgraph. These releases
    carry no feature matrix.
    """
    from scipy.io import loadmat

    data = loadmat(str(mat_path))
    A = sp.csr_matrix(data["A"])
    info = np.asarray(data["local_info"])
    raw = info[:, label_column].astype(np.int64)

    keep = raw > 0
    values, counts = np.unique(raw[keep], return_counts=True)
    values = values[counts >= min_class_size]
    keep &= np.isin(raw, values)
    nodes = np.flatnonzero(keep)
    if nodes.size == 0:
        raise ValueError("no nodes left after label filtering")
    remap = {v: i for i, v in enumerate(sorted(values))}
    labels = np.array([remap[v] for v in raw[nodes]], dtype=np.int64)

    sub = A[nodes][:, nodes].tocoo()
    records = _undirected_records(zip(sub.row.tolist(), sub.col.tolist()))
    save_dataset(dest, records, labels)
    _report(Path(mat_path).stem, nodes.size, 2 * len(records), int(labels.max()) + 1)


def convert_linqs(content_path, cites_path, dest) -> None:
    """Convert the .content/.cites citation release with string node ids."""
    ids: dict[str, int] = {}
    rows = []
    with Path(content_path).open() as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            ids[parts[0]] = len(ids)
            rows.append((parts[0], parts[1:-1], parts[-1]))
    class_names = sorted({label for _, _, label in rows})
    class_of = {name: i for i, name in enumerate(class_names)}

    n = len(ids)
    p = len(rows[0][1])
    features = np.zeros((n, p))
    labels = np.zeros(n, dtype=np.int64)
    for node_id, feats, label in rows:
        node = ids[node_id]
        features[node] = [float(v) for v in feats]
        labels[node] = class_of[label]

    pairs = []
    skipped = 0
    with Path(cites_path).open() as fh:
        for line in fh:
            parts = line.split()
            if len(parts) != 2:
                continue
            a, b = parts
            if a in ids and b in ids:
                pairs.append((ids[a], ids[b]))
            else:
                skipped += 1
    records = _undirected_records(pairs)
    save_dataset(dest, records, labels, features)
    if skipped:
        print(f"skipped {skipped} citation lines referencing unknown ids")
    _report(Path(content_path).stem, n, 2 * len(records), len(class_names))
