"""Experiment runner and analysis exports.

Runs (seed, method) jobs over a dataset, appends rows to a results CSV with
a JSON config snapshot, and exports the standard analyses: accuracy grids
over the spreading parameters, clustering-coefficient-binned accuracy,
score-margin distributions, PCA projections of score matrices, and the
accuracy-vs-epoch timeline of a tracked training run. Figures are emitted as
CSV for external plotting, never rendered in-process.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .datasets import Dataset, ExperimentConfig, load_dataset, seed_pair, stratified_split
from .graph import clustering_coefficient, enumerate_triangles, normalized_adjacency
from .models import (TrainConfig, block_power_eigs, default_embedding_dim,
                     spectral_embedding, train_linear_softmax, train_mlp)
from .postprocess import (autoscale, correct, error_init, linear_correct_and_smooth,
                          residual_propagate, smooth)
from .spreading import (LabelMatrix, PropagationParams, lp_iterate, nhols_iterate,
                        predict_argmax)
from .validation import as_score_matrix

RESULTS_HEADER = ("method,dataset,k,seed,accuracy,"
                  "base_accuracy,correct_accuracy,smooth_accuracy,wall_time")


@dataclass
class RunResult:
    """One (method, seed) outcome with per-stage accuracies where they exist."""

    method: str
    dataset: str
    k: float
    seed: int
    accuracy: float
    base_accuracy: float | None = None
    correct_accuracy: float | None = None
    smooth_accuracy: float | None = None
    wall_time: float = 0.0
    config: dict | None = dataclasses.field(default=None, repr=False)

    def csv_row(self) -> str:
        def fmt(v):
            return "" if v is None else repr(v)
        return ",".join([self.method, self.dataset, repr(self.k), str(self.seed),
                         repr(self.accuracy), fmt(self.base_accuracy),
                         fmt(self.correct_accuracy), fmt(self.smooth_accuracy),
                         repr(self.wall_time)])


def accuracy(predicted, true, mask=None) -> float:
    """Fraction of agreeing labels, optionally restricted to ``mask``."""
    predicted = np.asarray(predicted).ravel()
    true = np.asarray(true).ravel()
    if predicted.shape != true.shape:
        raise ValueError("predicted and true label vectors differ in length")
    if mask is not None:
        mask = np.asarray(mask)
        predicted = predicted[mask]
        true = true[mask]
    if predicted.size == 0:
        raise ValueError("cannot compute accuracy over an empty selection")
    return float(np.mean(predicted == true))


def _masked_labels(labels, train_idx):
    y = np.full(labels.shape, -1, dtype=np.int64)
    y[train_idx] = labels[train_idx]
    return y


def base_prediction_for(cfg: ExperimentConfig, ds: Dataset, S, split, init_seed: int,
                        track_every: int = 0):
    """Train (or load) the configured base model for one split."""
    labels = ds.labels
    Y = LabelMatrix.from_labels(_masked_labels(labels, split.train), ds.num_classes)
    validation = (split.val, labels[split.val])
    tc = TrainConfig(epochs=cfg.epochs, lr=cfg.lr, seed=init_seed,
                     optimizer=cfg.optimizer, weight_decay=cfg.weight_decay,
                     hidden=cfg.hidden, dropout=cfg.dropout,
                     select_best=cfg.select_best, track_every=track_every)
    if cfg.base_model == "pl":
        dim = cfg.embedding_dim or default_embedding_dim(ds.num_classes, ds.graph.num_nodes)
        emb = spectral_embedding(S, dim, seed=init_seed)
        return train_linear_softmax(emb.vectors, Y.matrix, split.train, tc,
                                    validation, source="PL")
    if cfg.base_model == "mlp":
        if ds.features is None:
            raise ValueError(f"dataset {ds.name} has no features; MLP base unavailable")
        return train_mlp(ds.features, Y.matrix, split.train, tc, validation, source="MLP")
    path = cfg.base_model.split(":", 1)[1]
    return load_prediction_file(path, ds.graph.num_nodes, ds.num_classes)


def load_prediction_file(path, n: int, c: int):
    """Read an externally produced dense score matrix (row index implicit)."""
    from .models import BasePrediction

    scores = np.loadtxt(path, dtype=np.float64, ndmin=2)
    scores = as_score_matrix(scores, n=n, c=c, name=f"prediction file {path}")
    return BasePrediction(scores, source="FILE")


def _nlcs_stages(cfg: ExperimentConfig, scores, Y: LabelMatrix, S, tri):
    cp = PropagationParams(alpha=cfg.resolved("correct_alpha"),
                           beta=cfg.resolved("correct_beta"), num_iter=cfg.t)
    sp_ = PropagationParams(alpha=cfg.resolved("smooth_alpha"),
                            beta=cfg.resolved("smooth_beta"), num_iter=cfg.t)
    E0 = error_init(scores, Y)
    E_hat = residual_propagate(S, tri, E0, cfg.mixing, cp,
                               teleport=cfg.correct_teleport, labels=Y)
    corrected = correct(scores, E_hat, autoscale(E0, Y.labeled), Y.unlabeled)
    smoothed = smooth(corrected, Y, S, tri, cfg.mixing, sp_,
                      teleport=cfg.smooth_teleport, norm_mode=cfg.norm_mode)
    return corrected, smoothed


def _run_seed(cfg: ExperimentConfig, ds: Dataset, S, tri, seed: int,
              snapshot: dict) -> list[RunResult]:
    labels = ds.labels
    split_seed, init_seed = seed_pair(seed)
    split = stratified_split(ds, cfg.k, split_seed)
    test = split.test
    Y = LabelMatrix.from_labels(_masked_labels(labels, split.train), ds.num_classes)
    common = dict(dataset=ds.name, k=cfg.k, seed=seed, config=snapshot)
    results: list[RunResult] = []

    def test_acc(scores):
        return accuracy(predict_argmax(scores, test), labels[test])

    if "lp" in cfg.methods:
        t0 = time.perf_counter()
        F = lp_iterate(S, Y, PropagationParams(alpha=cfg.lp_alpha, num_iter=cfg.lp_t))
        results.append(RunResult(method="LP", accuracy=test_acc(F),
                                 wall_time=time.perf_counter() - t0, **common))
    if "nhols" in cfg.methods:
        t0 = time.perf_counter()
        F = nhols_iterate(S, tri, Y, cfg.mixing,
                          PropagationParams(alpha=cfg.alpha, beta=cfg.beta,
                                            num_iter=cfg.t),
                          norm_mode=cfg.norm_mode)
        results.append(RunResult(method="NHOLS", accuracy=test_acc(F),
                                 wall_time=time.perf_counter() - t0, **common))

    needs_base = {"base", "cs", "nlcs"} & set(cfg.methods)
    if needs_base:
        t0 = time.perf_counter()
        base = base_prediction_for(cfg, ds, S, split, init_seed)
        base_time = time.perf_counter() - t0
        base_acc = test_acc(base.scores)
        if "base" in cfg.methods:
            results.append(RunResult(method=base.source, accuracy=base_acc,
                                     base_accuracy=base_acc, wall_time=base_time,
                                     **common))
        if "cs" in cfg.methods:
            t0 = time.perf_counter()
            corrected, smoothed = linear_correct_and_smooth(
                base.scores, Y, S, cfg.cs_correct_alpha, cfg.cs_smooth_alpha, cfg.cs_t)
            results.append(RunResult(
                method=f"{base.source}+C&S", accuracy=test_acc(smoothed),
                base_accuracy=base_acc, correct_accuracy=test_acc(corrected),
                smooth_accuracy=test_acc(smoothed),
                wall_time=time.perf_counter() - t0, **common))
        if "nlcs" in cfg.methods:
            t0 = time.perf_counter()
            corrected, smoothed = _nlcs_stages(cfg, base.scores, Y, S, tri)
            results.append(RunResult(
                method=f"{base.source}+NLCS", accuracy=test_acc(smoothed),
                base_accuracy=base_acc, correct_accuracy=test_acc(corrected),
                smooth_accuracy=test_acc(smoothed),
                wall_time=time.perf_counter() - t0, **common))
    return results


def run_experiment(cfg: ExperimentConfig, dataset: Dataset | None = None,
                   n_jobs: int = 1, out_dir=None):
    """Run every (seed, method) job; returns (results, failures).

    Results come back in (seed, method) order regardless of scheduling.
    A failed seed is recorded as (seed, message) and does not stop the rest.
    When ``out_dir`` is given, rows append to ``results.csv`` and the config
    snapshot is written alongside, named by its content hash.
    """
    ds = dataset if dataset is not None else load_dataset(cfg.dataset)
    S = normalized_adjacency(ds.graph)
    tri = None
    if {"nhols", "nlcs"} & set(cfg.methods):
        tri = enumerate_triangles(ds.graph)
    snapshot = cfg.snapshot()

    def job(seed):
        return _run_seed(cfg, ds, S, tri, seed, snapshot)

    results: list[RunResult] = []
    failures: list[tuple[int, str]] = []
    if n_jobs <= 1:
        outcomes = []
        for seed in cfg.seeds:
            try:
                outcomes.append(job(seed))
            except Exception as exc:  # keep remaining seeds running
                outcomes.append(exc)
    else:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            futures = [pool.submit(job, seed) for seed in cfg.seeds]
            outcomes = []
            for fut in futures:
                try:
                    outcomes.append(fut.result())
                except Exception as exc:
                    outcomes.append(exc)
    for seed, outcome in zip(cfg.seeds, outcomes):
        if isinstance(outcome, Exception):
            failures.append((seed, f"{type(outcome).__name__}: {outcome}"))
        else:
            results.extend(outcome)

    if out_dir is not None:
        write_results(out_dir, results, snapshot)
    return results, failures


def write_results(out_dir, results, snapshot: dict) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "results.csv"
    new = not path.exists()
    with path.open("a") as fh:
        if new:
            fh.write(RESULTS_HEADER + "\n")
        for r in results:
            fh.write(r.csv_row() + "\n")
    blob = json.dumps(snapshot, sort_keys=True)
    digest = hashlib.sha1(blob.encode()).hexdigest()[:12]
    (out_dir / f"config_{digest}.json").write_text(blob + "\n")


def summarize(results) -> dict[str, tuple[float, float, int]]:
    """Per-method (mean, sample std, count) of test accuracy over seeds."""
    by_method: dict[str, list[float]] = {}
    for r in results:
        by_method.setdefault(r.method, []).append(r.accuracy)
    out = {}
    for method, vals in by_method.items():
        arr = np.asarray(vals)
        std = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
        out[method] = (float(arr.mean()), std, arr.size)
    return out


# ---------------------------------------------------------------------------
# parameter grid


def grid_search(cfg: ExperimentConfig, alphas, betas, dataset: Dataset | None = None,
                method: str = "nhols"):
    """Validation-accuracy sweep over admissible (alpha, beta) pairs.

    Pairs with alpha + beta >= 1 are skipped. Selection uses validation
    accuracy only (mean over the config's seeds); ties resolve to the smaller
    alpha, then the smaller beta. Returns ((best_alpha, best_beta), rows)
    where rows are (alpha, beta, validation_accuracy) for the full grid.
    For ``method="lp"`` the beta range must be {0}.
    """
    if method not in ("lp", "nhols", "nlcs"):
        raise ValueError(f"grid search supports lp/nhols/nlcs, got {method!r}")
    alphas = [float(a) for a in alphas]
    betas = [float(b) for b in betas]
    if method == "lp" and any(b != 0 for b in betas):
        raise ValueError("lp grid requires betas == {0}")
    ds = dataset if dataset is not None else load_dataset(cfg.dataset)
    S = normalized_adjacency(ds.graph)
    tri = enumerate_triangles(ds.graph) if method in ("nhols", "nlcs") else None
    labels = ds.labels

    per_seed = []
    for seed in cfg.seeds:
        split_seed, init_seed = seed_pair(seed)
        split = stratified_split(ds, cfg.k, split_seed)
        Y = LabelMatrix.from_labels(_masked_labels(labels, split.train), ds.num_classes)
        base = None
        if method == "nlcs":
            base = base_prediction_for(cfg, ds, S, split, init_seed)
        per_seed.append((split, Y, base))

    rows = []
    for a in alphas:
        for b in betas:
            if a + b >= 1:
                continue
            accs = []
            for split, Y, base in per_seed:
                val = split.val
                if method == "lp":
                    F = lp_iterate(S, Y, PropagationParams(alpha=a, num_iter=cfg.lp_t))
                elif method == "nhols":
                    F = nhols_iterate(S, tri, Y, cfg.mixing,
                                      PropagationParams(alpha=a, beta=b, num_iter=cfg.t),
                                      norm_mode=cfg.norm_mode)
                else:
                    stage_cfg = dataclasses.replace(
                        cfg, correct_alpha=a, correct_beta=b,
                        smooth_alpha=a, smooth_beta=b)
                    _, F = _nlcs_stages(stage_cfg, base.scores, Y, S, tri)
                accs.append(accuracy(predict_argmax(F, val), labels[val]))
            if accs:
                rows.append((a, b, float(np.mean(accs))))

    best = None
    for a, b, acc in sorted(rows, key=lambda r: (r[0], r[1])):
        if best is None or acc > best[2]:
            best = (a, b, acc)
    if best is None:
        raise ValueError("grid contained no admissible (alpha, beta) pair")
    return (best[0], best[1]), rows


# ---------------------------------------------------------------------------
# analyses


DEFAULT_BIN_EDGES = tuple(round(0.1 * i, 1) for i in range(7))  # 0.0 .. 0.6


def coefficient_binned_accuracy(coeffs, true_labels, stage_predictions: dict,
                                test_idx, edges=DEFAULT_BIN_EDGES):
    """Accuracy of each stage over clustering-coefficient bins.

    ``stage_predictions`` maps a stage tag to predicted labels aligned with
    ``test_idx``. Nodes with coefficients outside [edges[0], edges[-1]] are
    not binned; the top edge is inclusive. Empty bins report count 0 and
    accuracy None.
    """
    edges = np.asarray(edges, dtype=np.float64)
    if edges.size < 2 or np.any(np.diff(edges) <= 0):
        raise ValueError("bin edges must be strictly increasing")
    coeffs = np.asarray(coeffs, dtype=np.float64)
    test_idx = np.asarray(test_idx, dtype=np.int64)
    true_labels = np.asarray(true_labels)
    c_test = coeffs[test_idx]
    bin_of = np.searchsorted(edges, c_test, side="right") - 1
    bin_of[c_test == edges[-1]] = edges.size - 2  # top edge inclusive
    in_range = (bin_of >= 0) & (bin_of <= edges.size - 2)

    rows = []
    for b in range(edges.size - 1):
        sel = in_range & (bin_of == b)
        count = int(sel.sum())
        accs = {}
        for stage, preds in stage_predictions.items():
            preds = np.asarray(preds)
            if count == 0:
                accs[stage] = None
            else:
                accs[stage] = float(np.mean(preds[sel] == true_labels[test_idx[sel]]))
        rows.append({"lo": float(edges[b]), "hi": float(edges[b + 1]),
                     "count": count, "accuracy": accs})
    return rows


def write_bins_csv(path, rows) -> None:
    stages = list(rows[0]["accuracy"]) if rows else []
    header = "lo,hi,count," + ",".join(f"acc_{s}" for s in stages)
    with Path(path).open("w") as fh:
        fh.write(header + "\n")
        for r in rows:
            accs = ",".join("" if r["accuracy"][s] is None else repr(r["accuracy"][s])
                            for s in stages)
            fh.write(f"{r['lo']!r},{r['hi']!r},{r['count']},{accs}\n")


MARGIN_HEADER = "stage,node,label,margin"


def margin_rows(stage_scores: dict, true_labels, test_idx, class_pair=(0, 1)):
    """Score-margin rows for test nodes whose true label is in ``class_pair``.

    The margin is score[first class] - score[second class]; one row per
    (stage, node).
    """
    c0, c1 = class_pair
    true_labels = np.asarray(true_labels)
    test_idx = np.asarray(test_idx, dtype=np.int64)
    rows = []
    for stage, scores in stage_scores.items():
        scores = as_score_matrix(scores, name=f"{stage} scores")
        if scores.shape[1] < 2:
            raise ValueError("margin export needs at least two classes")
        nodes = test_idx[np.isin(true_labels[test_idx], [c0, c1])]
        for node in nodes:
            rows.append((stage, int(node), int(true_labels[node]),
                         float(scores[node, c0] - scores[node, c1])))
    return rows


def write_margins_csv(path, rows) -> None:
    with Path(path).open("w") as fh:
        fh.write(MARGIN_HEADER + "\n")
        for stage, node, label, margin in rows:
            fh.write(f"{stage},{node},{label},{margin!r}\n")


def pca_project(M, n_components: int, seed=0):
    """Principal projections of a score matrix.

    Columns are centered; the top principal directions come from the block
    power eigensolver on the covariance. Returns (projections, explained
    variances in non-increasing order, orthonormal directions). Raises on
    zero-variance input.
    """
    M = as_score_matrix(M, name="score matrix")
    n, c = M.shape
    if not 0 < n_components <= c:
        raise ValueError(f"n_components must be in [1, {c}], got {n_components}")
    Xc = M - M.mean(axis=0, keepdims=True)
    if not Xc.any():
        raise ValueError("zero-variance input: all columns are constant")
    cov = (Xc.T @ Xc) / max(n - 1, 1)
    vals, vecs, _ = block_power_eigs(cov, n_components, seed=seed)
    vals = np.maximum(vals, 0.0)
    for j in range(vecs.shape[1]):  # deterministic sign
        nz = np.flatnonzero(np.abs(vecs[:, j]) > 1e-12)
        if nz.size and vecs[nz[0], j] < 0:
            vecs[:, j] = -vecs[:, j]
    return Xc @ vecs, vals, vecs


def pca_export(M, n_components: int, labels, path, seed=0) -> None:
    """Write per-node projected coordinates + label, and the explained
    variances to ``<path stem>_variance.csv``."""
    proj, variances, _ = pca_project(M, n_components, seed=seed)
    path = Path(path)
    labels = np.asarray(labels)
    header = "node,label," + ",".join(f"pc{i + 1}" for i in range(n_components))
    with path.open("w") as fh:
        fh.write(header + "\n")
        for node in range(proj.shape[0]):
            coords = ",".join(repr(float(v)) for v in proj[node])
            fh.write(f"{node},{int(labels[node])},{coords}\n")
    vpath = path.with_name(path.stem + "_variance.csv")
    with vpath.open("w") as fh:
        fh.write("component,explained_variance\n")
        for i, v in enumerate(variances):
            fh.write(f"{i + 1},{float(v)!r}\n")


TIMELINE_HEADER = "epoch,base_accuracy,correct_accuracy,smooth_accuracy"


def timeline_eval(checkpoints, refine, true_labels, test_idx):
    """Accuracy of base / corrected / smoothed scores at tracked epochs.

    ``checkpoints`` is a list of (epoch, score matrix); ``refine`` maps a
    score matrix to (corrected, smoothed). Returns one row per checkpoint.
    """
    true_labels = np.asarray(true_labels)
    test_idx = np.asarray(test_idx, dtype=np.int64)
    rows = []
    for epoch, scores in checkpoints:
        corrected, smoothed = refine(scores)
        rows.append((int(epoch),
                     accuracy(predict_argmax(scores, test_idx), true_labels[test_idx]),
                     accuracy(predict_argmax(corrected, test_idx), true_labels[test_idx]),
                     accuracy(predict_argmax(smoothed, test_idx), true_labels[test_idx])))
    return rows


def write_timeline_csv(path, rows) -> None:
    with Path(path).open("w") as fh:
        fh.write(TIMELINE_HEADER + "\n")
        for epoch, b, c, s in rows:
            fh.write(f"{epoch},{b!r},{c!r},{s!r}\n")
