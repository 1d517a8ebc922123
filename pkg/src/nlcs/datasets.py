"""Dataset ingestion, the stratified split protocol, and run configuration.

Canonical on-disk formats (all plain text, `#` comments allowed in edges):

* ``edges.txt``    one ``i j [w]`` edge per line, 0-based ids
* ``labels.txt``   one ``node_id label_id`` per line, every node present
* ``features.txt`` optional; dense rows ``node_id v1 v2 ...`` or sparse rows
  ``node_id dim:value ...``

Configs are sectioned ``key = value`` text parsed with :mod:`configparser`.
The toolkit never fetches data over the network; converters from public
releases live in :mod:`nlcs.convert`.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from configparser import ConfigParser
from pathlib import Path

import numpy as np

from .graph import Graph, build_graph, read_edge_file
from .validation import as_rng

_MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    """One splitmix64 scrambling step; the documented seed derivation."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def seed_pair(master: int) -> tuple[int, int]:
    """Expand one master seed into independent (split_seed, init_seed).

    split_seed = splitmix64(2*master), init_seed = splitmix64(2*master + 1),
    so every run is reproducible from a single integer.
    """
    master = int(master) & _MASK64
    return splitmix64(2 * master), splitmix64(2 * master + 1)


@dataclass
class Dataset:
    """Graph plus per-node labels, and features when the source has them."""

    graph: Graph
    features: np.ndarray | None
    labels: np.ndarray
    name: str
    num_classes: int

    def __post_init__(self):
        n = self.graph.num_nodes
        self.labels = np.asarray(self.labels, dtype=np.int64).ravel()
        if self.labels.shape[0] != n:
            raise ValueError(f"label vector has {self.labels.shape[0]} entries, expected {n}")
        present = np.unique(self.labels)
        expected = np.arange(self.num_classes)
        if not np.array_equal(present, expected):
            raise ValueError(
                f"labels must be dense in [0, {self.num_classes}), found values {present.tolist()}")
        if self.features is not None:
            self.features = np.asarray(self.features, dtype=np.float64)
            if self.features.shape[0] != n:
                raise ValueError(
                    f"feature matrix has {self.features.shape[0]} rows, expected {n}")


def read_labels_file(path) -> dict[int, int]:
    path = Path(path)
    out: dict[int, int] = {}
    with path.open() as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            parts = text.split()
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'node label', got {line.rstrip()!r}")
            try:
                node, lab = int(parts[0]), int(parts[1])
            except ValueError:
                raise ValueError(f"{path}:{lineno}: malformed label line") from None
            if lab < 0:
                raise ValueError(f"{path}:{lineno}: unknown label id {lab}")
            if node in out:
                raise ValueError(f"{path}:{lineno}: duplicate label for node {node}")
            out[node] = lab
    if not out:
        raise ValueError(f"{path}: no labels found")
    return out


def read_features_file(path, n: int) -> np.ndarray:
    """Parse dense or sparse feature rows; returns an (n, p) float matrix."""
    path = Path(path)
    dense_rows: dict[int, np.ndarray] = {}
    sparse_rows: dict[int, list[tuple[int, float]]] = {}
    empty_rows: set[int] = set()
    width = None
    max_dim = -1
    with path.open() as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            parts = text.split()
            try:
                node = int(parts[0])
            except ValueError:
                raise ValueError(f"{path}:{lineno}: malformed feature line") from None
            if node < 0 or node >= n:
                raise ValueError(f"{path}:{lineno}: node {node} outside [0, {n})")
            if len(parts) == 1:  # all-zero row, valid in either format
                empty_rows.add(node)
            elif ":" in parts[1]:
                entries = []
                for tok in parts[1:]:
                    dim_s, _, val_s = tok.partition(":")
                    try:
                        dim, val = int(dim_s), float(val_s)
                    except ValueError:
                        raise ValueError(f"{path}:{lineno}: malformed sparse entry {tok!r}") from None
                    max_dim = max(max_dim, dim)
                    entries.append((dim, val))
                sparse_rows[node] = entries
            else:
                try:
                    vals = np.array([float(tok) for tok in parts[1:]])
                except ValueError:
                    raise ValueError(f"{path}:{lineno}: malformed feature line") from None
                if width is None:
                    width = vals.size
                elif vals.size != width:
                    raise ValueError(
                        f"{path}:{lineno}: row has {vals.size} values, expected {width}")
                dense_rows[node] = vals
    if dense_rows and sparse_rows:
        raise ValueError(f"{path}: mixed dense and sparse feature rows")
    rows_seen = len(dense_rows) + len(sparse_rows) + len(empty_rows)
    if rows_seen != n:
        raise ValueError(f"{path}: feature file has {rows_seen} rows, expected {n}")
    if dense_rows:
        X = np.zeros((n, width))
        for node, vals in dense_rows.items():
            X[node] = vals
        return X
    X = np.zeros((n, max_dim + 1))
    for node, entries in sparse_rows.items():
        for dim, val in entries:
            X[node, dim] = val
    return X


def load_dataset(path, name: str | None = None) -> Dataset:
    """Load a dataset directory in the canonical format."""
    path = Path(path)
    if not path.is_dir():
        raise FileNotFoundError(f"dataset directory {path} does not exist")
    labels_map = read_labels_file(path / "labels.txt")
    n = max(labels_map) + 1
    if len(labels_map) != n:
        missing = sorted(set(range(n)) - set(labels_map))[:5]
        raise ValueError(f"{path / 'labels.txt'}: nodes without labels, e.g. {missing}")
    edges = read_edge_file(path / "edges.txt")
    graph = build_graph(edges, n=n)
    labels = np.array([labels_map[i] for i in range(n)], dtype=np.int64)
    features = None
    feat_path = path / "features.txt"
    if feat_path.exists():
        features = read_features_file(feat_path, n)
    return Dataset(graph=graph, features=features, labels=labels,
                   name=name or path.name, num_classes=int(labels.max()) + 1)


def save_dataset(dest, edges, labels, features: np.ndarray | None = None) -> None:
    """Write the canonical files; ``edges`` are (i, j) or (i, j, w) records."""
    dest = Path(dest)
    dest.mkdir(parents=True, exist_ok=True)
    with (dest / "edges.txt").open("w") as fh:
        for rec in edges:
            if len(rec) == 3 and float(rec[2]) != 1.0:
                fh.write(f"{int(rec[0])} {int(rec[1])} {float(rec[2])!r}\n")
            else:
                fh.write(f"{int(rec[0])} {int(rec[1])}\n")
    with (dest / "labels.txt").open("w") as fh:
        for node, lab in enumerate(labels):
            fh.write(f"{node} {int(lab)}\n")
    if features is not None:
        features = np.asarray(features)
        with (dest / "features.txt").open("w") as fh:
            sparse = np.count_nonzero(features) < 0.25 * features.size
            for node in range(features.shape[0]):
                row = features[node]
                if sparse:
                    toks = " ".join(f"{d}:{float(row[d])!r}" for d in np.flatnonzero(row))
                    fh.write(f"{node} {toks}\n" if toks else f"{node}\n")
                else:
                    fh.write(f"{node} " + " ".join(repr(float(v)) for v in row) + "\n")


@dataclass
class SplitSpec:
    """Train/validation/test index partition for one (k, seed)."""

    train: np.ndarray
    val: np.ndarray
    test: np.ndarray
    k: float
    seed: int

    def check_partition(self, n: int) -> None:
        allidx = np.concatenate([self.train, self.val, self.test])
        if np.unique(allidx).size != allidx.size or allidx.size != n:
            raise ValueError("split parts are not a disjoint exhaustive partition")


def stratified_split(ds: Dataset, k: float, seed: int) -> SplitSpec:
    """Per-class proportional split into train / validation / test.

    Each class contributes round(k * class_size) training nodes (round half
    to even), chosen uniformly; the remainder splits evenly with the odd
    element going to test. Deterministic per seed.
    """
    if not 0 < k < 1:
        raise ValueError(f"k must be in (0, 1), got {k}")
    labels = ds.labels
    rng = as_rng(int(seed))
    train, val, test = [], [], []
    for cls in range(ds.num_classes):
        idx = np.flatnonzero(labels == cls)
        n_train = int(np.round(k * idx.size))
        rem = idx.size - n_train
        n_val = rem // 2
        if n_train < 1 or n_val < 1 or rem - n_val < 1:
            raise ValueError(
                f"class {cls} has {idx.size} members, too few to place at "
                f"least one sample in each part at k={k}")
        perm = rng.permutation(idx)
        train.append(perm[:n_train])
        val.append(perm[n_train:n_train + n_val])
        test.append(perm[n_train + n_val:])
    spec = SplitSpec(train=np.sort(np.concatenate(train)),
                     val=np.sort(np.concatenate(val)),
                     test=np.sort(np.concatenate(test)),
                     k=float(k), seed=int(seed))
    spec.check_partition(labels.size)
    return spec


# ---------------------------------------------------------------------------
# run configuration


@dataclass
class ExperimentConfig:
    """Validated experiment settings; field names mirror the config keys."""

    dataset: str
    k: float
    seeds: tuple[int, ...]
    methods: tuple[str, ...] = ("lp", "nhols", "base", "cs", "nlcs")
    out: str = "results"
    # shared spreading parameters
    alpha: float = 0.35
    beta: float = 0.35
    t: int = 50
    mixing: str = "mean"
    norm_mode: str = "column"
    # plain label propagation
    lp_alpha: float = 0.9
    lp_t: int = 50
    # triangle correction / smoothing stages (default to the shared pair)
    correct_alpha: float | None = None
    correct_beta: float | None = None
    correct_teleport: str = "error"
    smooth_alpha: float | None = None
    smooth_beta: float | None = None
    smooth_teleport: str = "labels"
    # linear correct-and-smooth baseline
    cs_correct_alpha: float = 0.8
    cs_smooth_alpha: float = 0.8
    cs_t: int = 50
    # base model
    base_model: str = "pl"
    lr: float = 0.01
    epochs: int = 1000
    hidden: int = 256
    dropout: float = 0.5
    optimizer: str = "adam"
    weight_decay: float = 0.0
    embedding_dim: int | None = None
    select_best: bool = True

    def __post_init__(self):
        if not 0 < self.k < 1:
            raise ValueError(f"[experiment] k: must be in (0, 1), got {self.k}")
        if not self.seeds:
            raise ValueError("[experiment] seeds: at least one seed required")
        known = {"lp", "nhols", "base", "cs", "nlcs"}
        bad = set(self.methods) - known
        if bad:
            raise ValueError(f"[experiment] methods: unknown {sorted(bad)}")
        for section, a, b in (("spread", self.alpha, self.beta),
                              ("correct", self.resolved("correct_alpha"),
                               self.resolved("correct_beta")),
                              ("smooth", self.resolved("smooth_alpha"),
                               self.resolved("smooth_beta"))):
            if a < 0 or b < 0:
                raise ValueError(f"[{section}] alpha/beta must be nonnegative")
            if a + b >= 1:
                raise ValueError(f"[{section}] alpha+beta must be < 1, got {a + b}")
        if not 0 < self.lp_alpha < 1:
            raise ValueError(f"[lp] alpha: must be in (0, 1), got {self.lp_alpha}")
        for key, v in (("correct_alpha", self.cs_correct_alpha),
                       ("smooth_alpha", self.cs_smooth_alpha)):
            if not 0 < v < 1:
                raise ValueError(f"[cs] {key}: must be in (0, 1), got {v}")
        if self.correct_teleport not in ("error", "labels"):
            raise ValueError("[correct] teleport: must be 'error' or 'labels'")
        if self.smooth_teleport not in ("labels", "initial"):
            raise ValueError("[smooth] teleport: must be 'labels' or 'initial'")
        if not (self.base_model in ("pl", "mlp") or self.base_model.startswith("file:")):
            raise ValueError("[base] model: must be 'pl', 'mlp', or 'file:<path>'")
        for key, v in (("t", self.t), ("lp_t", self.lp_t), ("cs_t", self.cs_t),
                       ("epochs", self.epochs), ("hidden", self.hidden)):
            if int(v) < 1:
                raise ValueError(f"{key} must be >= 1, got {v}")

    def resolved(self, field_name: str) -> float:
        """Stage alpha/beta falling back to the shared spreading pair."""
        v = getattr(self, field_name)
        if v is not None:
            return v
        return self.alpha if field_name.endswith("alpha") else self.beta

    def snapshot(self) -> dict:
        return dataclasses.asdict(self)


_CONFIG_LAYOUT = {
    "experiment": {"dataset": str, "k": float, "seeds": "ints", "methods": "strs",
                   "out": str},
    "spread": {"alpha": float, "beta": float, "t": int, "sigma": str, "norm": str},
    "lp": {"alpha": float, "t": int},
    "correct": {"alpha": float, "beta": float, "teleport": str},
    "smooth": {"alpha": float, "beta": float, "teleport": str},
    "cs": {"correct_alpha": float, "smooth_alpha": float, "t": int},
    "base": {"model": str, "lr": float, "epochs": int, "hidden": int,
             "dropout": float, "optimizer": str, "weight_decay": float,
             "embedding_dim": int, "select_best": "bool"},
}

_KEY_TO_FIELD = {
    ("experiment", "dataset"): "dataset", ("experiment", "k"): "k",
    ("experiment", "seeds"): "seeds", ("experiment", "methods"): "methods",
    ("experiment", "out"): "out",
    ("spread", "alpha"): "alpha", ("spread", "beta"): "beta",
    ("spread", "t"): "t", ("spread", "sigma"): "mixing",
    ("spread", "norm"): "norm_mode",
    ("lp", "alpha"): "lp_alpha", ("lp", "t"): "lp_t",
    ("correct", "alpha"): "correct_alpha", ("correct", "beta"): "correct_beta",
    ("correct", "teleport"): "correct_teleport",
    ("smooth", "alpha"): "smooth_alpha", ("smooth", "beta"): "smooth_beta",
    ("smooth", "teleport"): "smooth_teleport",
    ("cs", "correct_alpha"): "cs_correct_alpha",
    ("cs", "smooth_alpha"): "cs_smooth_alpha", ("cs", "t"): "cs_t",
    ("base", "model"): "base_model", ("base", "lr"): "lr",
    ("base", "epochs"): "epochs", ("base", "hidden"): "hidden",
    ("base", "dropout"): "dropout", ("base", "optimizer"): "optimizer",
    ("base", "weight_decay"): "weight_decay",
    ("base", "embedding_dim"): "embedding_dim",
    ("base", "select_best"): "select_best",
}


def _convert(section, key, raw, kind):
    try:
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        if kind == "ints":
            return tuple(int(tok) for tok in raw.replace(",", " ").split())
        if kind == "strs":
            return tuple(raw.replace(",", " ").split())
        if kind == "bool":
            if raw.lower() in ("true", "yes", "1"):
                return True
            if raw.lower() in ("false", "no", "0"):
                return False
            raise ValueError(raw)
        return raw
    except ValueError:
        raise ValueError(f"[{section}] {key}: cannot parse {raw!r}") from None


def parse_config_text(text: str) -> ExperimentConfig:
    parser = ConfigParser()
    parser.read_string(text)
    fields: dict = {}
    for section in parser.sections():
        if section not in _CONFIG_LAYOUT:
            raise ValueError(f"unknown config section [{section}]")
        layout = _CONFIG_LAYOUT[section]
        for key, raw in parser.items(section):
            if key not in layout:
                raise ValueError(f"[{section}] unknown key {key!r}")
            fields[_KEY_TO_FIELD[(section, key)]] = _convert(section, key, raw, layout[key])
    for required in ("dataset", "k", "seeds"):
        if required not in fields:
            raise ValueError(f"[experiment] {required}: missing required key")
    return ExperimentConfig(**fields)


def parse_config(path) -> ExperimentConfig:
    """Parse and validate a sectioned key = value config file."""
    return parse_config_text(Path(path).read_text())


def config_to_text(cfg: ExperimentConfig) -> str:
    """Canonical serialized form; parse(config_to_text(cfg)) == cfg."""
    lines = [
        "[experiment]",
        f"dataset = {cfg.dataset}",
        f"k = {cfg.k!r}",
        "seeds = " + " ".join(str(s) for s in cfg.seeds),
        "methods = " + " ".join(cfg.methods),
        f"out = {cfg.out}",
        "",
        "[spread]",
        f"alpha = {cfg.alpha!r}",
        f"beta = {cfg.beta!r}",
        f"t = {cfg.t}",
        f"sigma = {cfg.mixing}",
        f"norm = {cfg.norm_mode}",
        "",
        "[lp]",
        f"alpha = {cfg.lp_alpha!r}",
        f"t = {cfg.lp_t}",
        "",
        "[correct]",
        f"alpha = {cfg.resolved('correct_alpha')!r}",
        f"beta = {cfg.resolved('correct_beta')!r}",
        f"teleport = {cfg.correct_teleport}",
        "",
        "[smooth]",
        f"alpha = {cfg.resolved('smooth_alpha')!r}",
        f"beta = {cfg.resolved('smooth_beta')!r}",
        f"teleport = {cfg.smooth_teleport}",
        "",
        "[cs]",
        f"correct_alpha = {cfg.cs_correct_alpha!r}",
        f"smooth_alpha = {cfg.cs_smooth_alpha!r}",
        f"t = {cfg.cs_t}",
        "",
        "[base]",
        f"model = {cfg.base_model}",
        f"lr = {cfg.lr!r}",
        f"epochs = {cfg.epochs}",
        f"hidden = {cfg.hidden}",
        f"dropout = {cfg.dropout!r}",
        f"optimizer = {cfg.optimizer}",
        f"weight_decay = {cfg.weight_decay!r}",
        f"select_best = {str(cfg.select_best).lower()}",
    ]
    if cfg.embedding_dim is not None:
        lines.append(f"embedding_dim = {cfg.embedding_dim}")
    return "\n".join(lines) + "\n"
