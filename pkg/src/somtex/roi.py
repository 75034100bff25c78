"""Region-of-interest strategies that turn an image into one fixed-length
texture vector: fixed blocs, pixel-intensity clusters and bloc-feature
clusters. Also home of the seeded k-means used by the last two and of the
labelled :class:`FeatureDataset` they produce."""

from __future__ import annotations

import io
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dataset import GrayImage
from .glcm import FEATURE_NAMES, N_FEATURES, texture_features

log = logging.getLogger(__name__)

MODES = ("fixed_bloc", "pixel_wise", "bloc_wise")
MODE_TITLES = {"fixed_bloc": "FixedBloc", "pixel_wise": "PixelWise", "bloc_wise": "BlocWise"}


@dataclass(frozen=True)
class PartitionConfig:
    mode: str = "pixel_wise"
    sub_rows: int = 3
    sub_cols: int = 2
    bloc_rows: int = 4
    bloc_cols: int = 2
    L: int = 3
    kmeans_seed: int = 0
    G: int = 32

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if self.sub_rows < 1 or self.sub_cols < 1:
            raise ValueError("sub-image grid must be at least 1x1")
        if self.mode != "pixel_wise" and (self.bloc_rows < 1 or self.bloc_cols < 1):
            raise ValueError("bloc grid must be at least 1x1")
        if self.mode != "fixed_bloc" and self.L < 1:
            raise ValueError("L must be >= 1")
        if self.mode == "bloc_wise" and self.L > self.M:
            raise ValueError(f"L={self.L} clusters cannot be formed from M={self.M} blocs")

    @property
    def SN(self):
        return self.sub_rows * self.sub_cols

    @property
    def M(self):
        return self.bloc_rows * self.bloc_cols

    @property
    def dim(self):
        per_sub = self.M if self.mode == "fixed_bloc" else self.L
        return self.SN * per_sub * N_FEATURES

    def feature_names(self):
        tag = "b" if self.mode == "fixed_bloc" else "c"
        per_sub = self.M if self.mode == "fixed_bloc" else self.L
        return [f"s{s}_{tag}{r}_{name}"
                for s in range(self.SN) for r in range(per_sub) for name in FEATURE_NAMES]


# ------------------------------------------------------------------ k-means

@dataclass
class ClusterModel:
    k: int
    centroids: np.ndarray
    assignments: np.ndarray
    objective: float
    n_iter: int = 0
    history: list = field(default_factory=list)


def _sq_dists(X, C):
    return ((X[:, None, :] - C[None, :, :]) ** 2).sum(axis=2)


def _kmeanspp(X, w, k, rng):
    centers = [rng.choice(len(X), p=w / w.sum())]
    d2 = ((X - X[centers[0]]) ** 2).sum(axis=1)
    for _ in range(1, k):
        prob = w * d2
        idx = rng.choice(len(X), p=prob / prob.sum())
        centers.append(idx)
        d2 = np.minimum(d2, ((X - X[idx]) ** 2).sum(axis=1))
    return X[centers].copy()


def kmeans(points, k, seed=0, weights=None, max_iter=100, tol=1e-6) -> ClusterModel:
    """Lloyd's k-means with k-means++ seeding.

    ``weights`` gives each point a multiplicity, so clustering a histogram of
    values is equivalent to clustering the raw samples. Stops at an
    assignment fixpoint, after ``max_iter`` rounds, or when the objective
    improves by less than ``tol`` relative. When ``k`` reaches the number of
    distinct points, each distinct point becomes its own centroid (in order
    of first appearance) and the returned model has that many clusters.
    """
    X = np.asarray(points, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n = len(X)
    if n == 0:
        raise ValueError("kmeans needs at least one point")
    if k < 1:
        raise ValueError("k must be >= 1")
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != (n,) or np.any(w <= 0):
        raise ValueError("weights must be positive, one per point")

    uniq, inverse = np.unique(X, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    if k >= len(uniq):
        first = np.full(len(uniq), n)
        np.minimum.at(first, inverse, np.arange(n))
        order = np.argsort(first)
        rank = np.empty_like(order)
        rank[order] = np.arange(len(order))
        return ClusterModel(len(uniq), uniq[order], rank[inverse], 0.0)

    rng = np.random.default_rng(seed)
    C = _kmeanspp(X, w, k, rng)
    prev_obj = np.inf
    prev_assign = None
    history = []
    for it in range(1, max_iter + 1):
        d2 = _sq_dists(X, C)
        assign = np.argmin(d2, axis=1)  # ties -> lowest index
        obj = float(np.sum(w * d2[np.arange(n), assign]))
        assert obj <= prev_obj + 1e-9 * max(1.0, abs(obj)), "k-means objective increased"
        history.append(obj)
        if prev_assign is not None and np.array_equal(assign, prev_assign):
            break
        if np.isfinite(prev_obj) and prev_obj - obj <= tol * prev_obj:
            break
        if it == max_iter:
            break
        prev_obj, prev_assign = obj, assign

        mass = np.bincount(assign, weights=w, minlength=k)
        sums = np.stack([np.bincount(assign, weights=w * X[:, d], minlength=k)
                         for d in range(X.shape[1])], axis=1)
        filled = mass > 0
        C[filled] = sums[filled] / mass[filled, None]
        empty = np.flatnonzero(~filled)
        if empty.size:
            # reseed from points farthest from their current centroid
            far = iter(np.argsort(-d2[np.arange(n), assign], kind="stable"))
            for j in empty:
                for idx in far:
                    if not np.any(np.all(C == X[idx], axis=1)):
                        C[j] = X[idx]
                        break
    return ClusterModel(k, C, assign, obj, n_iter=it, history=history)


# ------------------------------------------------------------ partitioning

def split_grid(img, rows, cols):
    """Split into ``rows x cols`` equal tiles in row-major order.

    Tiles are ``floor(h/rows) x floor(w/cols)``; leftover pixels on the
    right and bottom edges are dropped.
    """
    pixels = getattr(img, "pixels", img)
    levels = getattr(img, "levels", None)
    h, w = pixels.shape
    if not (1 <= rows <= h and 1 <= cols <= w):
        raise ValueError(f"cannot split {h}x{w} image into {rows}x{cols} tiles")
    th, tw = h // rows, w // cols
    tiles = []
    for r in range(rows):
        for c in range(cols):
            tile = pixels[r * th:(r + 1) * th, c * tw:(c + 1) * tw]
            tiles.append(GrayImage(tile, levels) if levels is not None else tile)
    return tiles


def _check_levels(img, cfg):
    if img.levels != cfg.G:
        raise ValueError(f"image has {img.levels} gray levels, config expects G={cfg.G}")


def extract_fixed_bloc(img: GrayImage, cfg: PartitionConfig, flags=None) -> np.ndarray:
    _check_levels(img, cfg)
    out = []
    for s, sub in enumerate(split_grid(img, cfg.sub_rows, cfg.sub_cols)):
        for b, bloc in enumerate(split_grid(sub, cfg.bloc_rows, cfg.bloc_cols)):
            f = texture_features(bloc)
            if f.degenerate and flags is not None:
                flags.append(f"s{s}_b{b}")
            out.append(f.as_array())
    return np.concatenate(out)


def extract_pixel_wise(img: GrayImage, cfg: PartitionConfig, flags=None) -> np.ndarray:
    """Cluster each sub-image's pixels by intensity; describe each cluster by
    the GLCM restricted to its pixels. Clusters are ordered by ascending
    centroid intensity so positions line up across images."""
    _check_levels(img, cfg)
    out = []
    for s, sub in enumerate(split_grid(img, cfg.sub_rows, cfg.sub_cols)):
        values, counts = np.unique(sub.pixels, return_counts=True)
        model = kmeans(values, cfg.L, seed=cfg.kmeans_seed, weights=counts)
        order = np.argsort(model.centroids[:, 0], kind="stable")
        rank = np.empty(model.k, dtype=np.int64)
        rank[order] = np.arange(model.k)
        level_cluster = np.full(cfg.G, -1)
        level_cluster[values] = rank[model.assignments]
        labels = level_cluster[sub.pixels]
        for c in range(cfg.L):
            f = texture_features(sub, mask=labels == c)
            if f.degenerate and flags is not None:
                flags.append(f"s{s}_c{c}")
            out.append(f.as_array())
    return np.concatenate(out)


def extract_bloc_wise(img: GrayImage, cfg: PartitionConfig, flags=None) -> np.ndarray:
    """Cluster the bloc feature vectors of each sub-image; each cluster is
    represented by the mean feature vector of its member blocs, clusters
    ordered lexicographically by centroid."""
    _check_levels(img, cfg)
    if cfg.L > cfg.M:
        raise ValueError(f"L={cfg.L} clusters cannot be formed from M={cfg.M} blocs")
    out = []
    for s, sub in enumerate(split_grid(img, cfg.sub_rows, cfg.sub_cols)):
        feats = []
        for b, bloc in enumerate(split_grid(sub, cfg.bloc_rows, cfg.bloc_cols)):
            f = texture_features(bloc)
            if f.degenerate and flags is not None:
                flags.append(f"s{s}_b{b}")
            feats.append(f.as_array())
        F = np.array(feats)
        model = kmeans(F, cfg.L, seed=cfg.kmeans_seed)
        order = np.lexsort(model.centroids.T[::-1])
        reps = [F[model.assignments == j].mean(axis=0) for j in order]
        # fewer distinct blocs than L: repeat the last representative
        reps += [reps[-1]] * (cfg.L - len(reps))
        out.extend(reps)
    return np.concatenate(out)


EXTRACTORS = {
    "fixed_bloc": extract_fixed_bloc,
    "pixel_wise": extract_pixel_wise,
    "bloc_wise": extract_bloc_wise,
}


def extract(img: GrayImage, cfg: PartitionConfig, flags=None) -> np.ndarray:
    return EXTRACTORS[cfg.mode](img, cfg, flags)


# ------------------------------------------------------------ the dataset

@dataclass
class FeatureDataset:
    ids: list
    X: np.ndarray
    labels: list
    feature_names: list
    class_names: list
    degenerate: dict = field(default_factory=dict)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        if self.X.ndim == 1:
            self.X = self.X.reshape(len(self.ids), -1)
        if self.X.shape[0] != len(self.ids) or len(self.labels) != len(self.ids):
            raise ValueError("ids, rows and labels must have equal length")
        if self.X.shape[1] != len(self.feature_names):
            raise ValueError(f"{self.X.shape[1]} columns but {len(self.feature_names)} names")
        unknown = set(self.labels) - set(self.class_names)
        if unknown:
            raise ValueError(f"labels not in class_names: {sorted(unknown)}")

    @property
    def dim(self):
        return self.X.shape[1]

    def __len__(self):
        return len(self.ids)

    @property
    def y(self):
        """Labels as indices into ``class_names``."""
        lookup = {c: i for i, c in enumerate(self.class_names)}
        return np.array([lookup[l] for l in self.labels], dtype=np.int64)

    def subset(self, rows):
        rows = np.asarray(rows, dtype=np.int64)
        return FeatureDataset([self.ids[i] for i in rows], self.X[rows],
                              [self.labels[i] for i in rows], list(self.feature_names),
                              list(self.class_names))

    def with_features(self, X, feature_names):
        return FeatureDataset(list(self.ids), X, list(self.labels), list(feature_names),
                              list(self.class_names), dict(self.degenerate))


def _extract_one(record, cfg, loader):
    img = record.image if record.image is not None else loader(record)
    flags = []
    vec = extract(img, cfg, flags)
    return vec, flags


def assemble_dataset(manifest, cfg: PartitionConfig, loader=None, workers=1) -> FeatureDataset:
    """Extract one row per manifest record, in manifest order.

    Records without an in-memory image are materialized with ``loader``;
    images must already be preprocessed to ``cfg.G`` levels. Degenerate
    regions are collected per image id in ``FeatureDataset.degenerate``.
    """
    records = list(manifest.records)
    if not records:
        raise ValueError("cannot assemble a dataset from an empty manifest")
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_extract_one, records, [cfg] * len(records),
                                    [loader] * len(records)))
    else:
        results = [_extract_one(r, cfg, loader) for r in records]
    X = np.array([vec for vec, _ in results]).reshape(len(records), cfg.dim)
    degenerate = {r.id: flags for r, (_, flags) in zip(records, results) if flags}
    if degenerate:
        log.info("%s: %d of %d images have degenerate regions",
                 cfg.mode, len(degenerate), len(records))
    return FeatureDataset([r.id for r in records], X, [r.class_label for r in records],
                          cfg.feature_names(), list(manifest.class_names), degenerate)


# ------------------------------------------------------------------- CSV

def write_csv(ds: FeatureDataset, fingerprint=None) -> str:
    buf = io.StringIO()
    if fingerprint:
        buf.write(f"# fingerprint: {fingerprint}\n")
    buf.write(f"# classes: {','.join(ds.class_names)}\n")
    buf.write(",".join(["id", *ds.feature_names, "class"]) + "\n")
    for ident, row, label in zip(ds.ids, ds.X, ds.labels):
        buf.write(",".join([ident, *(f"{v:.9g}" for v in row), label]) + "\n")
    return buf.getvalue()


def read_csv(text: str) -> FeatureDataset:
    class_names = None
    header = None
    ids, rows, labels = [], [], []
    for line in text.splitlines():
        if not line.strip():
            continue
        if line.startswith("#"):
            key, _, value = line[1:].partition(":")
            if key.strip() == "classes":
                class_names = [c for c in value.strip().split(",") if c]
            continue
        cells = line.split(",")
        if header is None:
            header = cells
            continue
        ids.append(cells[0])
        rows.append([float(v) for v in cells[1:-1]])
        labels.append(cells[-1])
    if header is None or header[0] != "id" or header[-1] != "class":
        raise ValueError("feature CSV needs an 'id,...,class' header")
    if class_names is None:
        class_names = list(dict.fromkeys(labels))
    X = np.array(rows, dtype=float).reshape(len(ids), len(header) - 2)
    return FeatureDataset(ids, X, labels, header[1:-1], class_names)
