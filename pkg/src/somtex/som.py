"""Online self-organizing map on a rectangular lattice, plus the two ways of
turning a trained map into features: replacing each vector by its BMU
prototype, or appending the prototype to the original vector."""

from __future__ import annotations

import io
from dataclasses import dataclass, replace

import numpy as np

from .roi import FeatureDataset


@dataclass(frozen=True)
class SomConfig:
    rows: int = 10
    cols: int = 10
    iterations: int | None = None  # default 500 * rows * cols
    alpha0: float = 0.5
    sigma0: float | None = None  # default max(rows, cols) / 2
    sigma_final: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError("map must have at least one unit")
        if self.iterations is None:
            object.__setattr__(self, "iterations", 500 * self.rows * self.cols)
        if self.sigma0 is None:
            object.__setattr__(self, "sigma0", max(max(self.rows, self.cols) / 2, self.sigma_final))
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not 0 < self.alpha0 <= 1:
            raise ValueError("alpha0 must lie in (0, 1]")
        if not self.sigma0 >= self.sigma_final > 0:
            raise ValueError("need sigma0 >= sigma_final > 0")

    @property
    def label(self):
        return f"{self.rows}x{self.cols}"


@dataclass(frozen=True)
class SomMap:
    rows: int
    cols: int
    prototypes: np.ndarray  # (rows * cols, S), row-major over the grid

    @property
    def positions(self):
        r, c = np.divmod(np.arange(self.rows * self.cols), self.cols)
        return np.stack([r, c], axis=1)

    @property
    def dim(self):
        return self.prototypes.shape[1]

    @property
    def n_units(self):
        return self.prototypes.shape[0]


def _matrix(data):
    X = data.X if isinstance(data, FeatureDataset) else np.asarray(data, dtype=float)
    if X.ndim != 2:
        raise ValueError("expected a 2-D sample matrix")
    return X


def learning_rate(t, cfg: SomConfig):
    return cfg.alpha0 * (1.0 - t / cfg.iterations)


def radius(t, cfg: SomConfig):
    return cfg.sigma0 * (cfg.sigma_final / cfg.sigma0) ** (t / cfg.iterations)


def init_som(cfg: SomConfig, data) -> SomMap:
    """Prototypes drawn uniformly inside the per-component data range."""
    X = _matrix(data)
    if len(X) == 0:
        raise ValueError("cannot initialize a map from empty data")
    lo, hi = X.min(axis=0), X.max(axis=0)
    rng = np.random.default_rng([cfg.seed, 0])
    u = rng.random((cfg.rows * cfg.cols, X.shape[1]))
    protos = lo + u * (hi - lo)
    protos[:, lo == hi] = lo[lo == hi]
    return SomMap(cfg.rows, cfg.cols, protos)


def bmu_distances(som: SomMap, X):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != som.dim:
        raise ValueError(f"expected vectors of dimension {som.dim}, got {X.shape[1]}")
    d2 = ((X[:, None, :] - som.prototypes[None, :, :]) ** 2).sum(axis=2)
    idx = np.argmin(d2, axis=1)  # ties -> lowest row-major index
    return idx, np.sqrt(d2[np.arange(len(X)), idx])


def find_bmu(som: SomMap, x) -> int:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("find_bmu takes a single vector")
    return int(bmu_distances(som, x)[0][0])


def neighborhood(winner, unit, sigma, cols=None):
    """Gaussian kernel on grid distance.

    ``winner`` and ``unit`` are (row, col) coordinates, or row-major unit
    indices when ``cols`` is given.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    if cols is not None:
        winner, unit = divmod(winner, cols), divmod(unit, cols)
    d2 = (winner[0] - unit[0]) ** 2 + (winner[1] - unit[1]) ** 2
    return float(np.exp(-d2 / (2.0 * sigma ** 2)))


def update(prototypes, positions, x, winner, alpha, sigma):
    """One sequential update of every unit toward ``x`` (in place)."""
    g2 = ((positions - positions[winner]) ** 2).sum(axis=1)
    h = np.exp(-g2 / (2.0 * sigma ** 2))
    prototypes += (alpha * h)[:, None] * (x - prototypes)
    return h


def train(som: SomMap, data, cfg: SomConfig) -> SomMap:
    """Online training for ``cfg.iterations`` single-sample steps.

    Samples are visited in a seeded random order that is reshuffled every
    epoch. The learning rate decays linearly and the radius geometrically.
    """
    X = _matrix(data)
    if X.shape[1] != som.dim:
        raise ValueError(f"expected vectors of dimension {som.dim}, got {X.shape[1]}")
    W = som.prototypes.astype(float, copy=True)
    pos = som.positions.astype(float)
    grid_d2 = ((pos[:, None, :] - pos[None, :, :]) ** 2).sum(axis=2)
    t = np.arange(cfg.iterations)
    alphas = learning_rate(t, cfg)
    inv_2s2 = 1.0 / (2.0 * radius(t, cfg) ** 2)
    rng = np.random.default_rng([cfg.seed, 1])
    n = len(X)
    order = rng.permutation(n)
    for step in range(cfg.iterations):
        k = step % n
        if k == 0 and step > 0:
            order = rng.permutation(n)
        x = X[order[k]]
        diff = x - W
        winner = int(np.argmin(np.einsum("ij,ij->i", diff, diff)))
        h = np.exp(-grid_d2[winner] * inv_2s2[step])
        W += (alphas[step] * h)[:, None] * diff
    return replace(som, prototypes=W)


def quantization_error(som: SomMap, data) -> float:
    return float(bmu_distances(som, _matrix(data))[1].mean())


def quantize_replace(som: SomMap, data: FeatureDataset) -> FeatureDataset:
    idx, _ = bmu_distances(som, data.X)
    names = [f"som_{i}" for i in range(som.dim)]
    return data.with_features(som.prototypes[idx].copy(), names)


def augment(original: FeatureDataset, som_based: FeatureDataset) -> FeatureDataset:
    if original.ids != som_based.ids or original.labels != som_based.labels:
        raise ValueError("datasets to augment must have identical rows")
    if som_based.dim == 0:
        return original
    X = np.hstack([original.X, som_based.X])
    names = [f"{n}.orig" for n in original.feature_names]
    names += [f"{n}.som" for n in som_based.feature_names]
    return original.with_features(X, names)


def fit_som(data, cfg: SomConfig) -> SomMap:
    return train(init_som(cfg, data), data, cfg)


def dump_map(som: SomMap, fingerprint=None) -> str:
    buf = io.StringIO()
    if fingerprint:
        buf.write(f"# fingerprint: {fingerprint}\n")
    buf.write(f"{som.rows} {som.cols} {som.dim}\n")
    for row in som.prototypes:
        buf.write(" ".join(f"{v:.12g}" for v in row) + "\n")
    return buf.getvalue()


def load_map(text: str) -> SomMap:
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    rows, cols, dim = (int(t) for t in lines[0].split())
    protos = np.array([[float(t) for t in ln.split()] for ln in lines[1:]], dtype=float)
    return SomMap(rows, cols, protos.reshape(rows * cols, dim))
