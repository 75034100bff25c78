"""Two-stage PCA + Fisher linear discriminant (Fisherfaces) reduction to at
most c-1 discriminant dimensions."""

from __future__ import annotations

import io
import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg

log = logging.getLogger(__name__)

RANK_TOL = 1e-10
EIGEN_FLOOR = 1e-10


class FisherError(ValueError):
    pass


@dataclass(frozen=True)
class ScatterSet:
    S_b: np.ndarray
    S_w: np.ndarray
    S_T: np.ndarray
    mu: np.ndarray
    mu_i: np.ndarray
    N_i: np.ndarray


@dataclass(frozen=True)
class FisherModel:
    """Fitted Fisherfaces transform.

    Inputs are first standardized with ``center``/``scale`` (identity when
    fitted with ``standardize=False``), then centered on ``mean`` and
    projected by ``W_opt = W_pca @ W_fld``.
    """

    center: np.ndarray
    scale: np.ndarray
    mean: np.ndarray
    W_pca: np.ndarray
    W_fld: np.ndarray

    @property
    def W_opt(self):
        return self.W_pca @ self.W_fld

    @property
    def n(self):
        return self.W_pca.shape[0]

    @property
    def d_pca(self):
        return self.W_pca.shape[1]

    @property
    def m(self):
        return self.W_fld.shape[1]


def _encode_labels(labels):
    labels = np.asarray(labels)
    classes, y = np.unique(labels, return_inverse=True)
    return classes, y.ravel()


def compute_scatter(X, labels) -> ScatterSet:
    X = np.asarray(X, dtype=float)
    classes, y = _encode_labels(labels)
    if len(classes) < 2:
        raise FisherError("scatter matrices need at least two classes")
    mu = X.mean(axis=0)
    mu_i = np.array([X[y == k].mean(axis=0) for k in range(len(classes))])
    N_i = np.bincount(y, minlength=len(classes))
    D = mu_i - mu
    S_b = (D.T * N_i) @ D
    R = X - mu_i[y]
    S_w = R.T @ R
    C = X - mu
    S_T = C.T @ C
    sym = lambda S: (S + S.T) / 2  # exact symmetry despite BLAS rounding
    return ScatterSet(sym(S_b), sym(S_w), sym(S_T), mu, mu_i, N_i)


def _fix_signs(V):
    """Make the largest-magnitude component of each column positive."""
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[idx, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return V * signs


def _top_eigh(S):
    vals, vecs = np.linalg.eigh(S)
    order = np.argsort(vals, kind="stable")[::-1]
    return vals[order], vecs[:, order]


def fit_pca(X, target_dim):
    """Principal axes of the total scatter, largest first.

    Returns ``(mean, W_pca)``; the retained dimension is capped by the
    numerical rank of the scatter matrix.
    """
    X = np.asarray(X, dtype=float)
    if X.shape[0] < 2:
        raise FisherError("PCA needs at least two samples")
    mean = X.mean(axis=0)
    C = X - mean
    vals, vecs = _top_eigh(C.T @ C)
    if vals[0] <= 0:
        raise FisherError("data has zero variance")
    rank = int(np.sum(vals > RANK_TOL * vals[0]))
    d = min(int(target_dim), rank)
    return mean, _fix_signs(vecs[:, :d])


def _whitener(S):
    """Matrix ``A`` with ``A.T @ S @ A = I`` (eigenvalues floored if needed)."""
    try:
        L = np.linalg.cholesky(S)
        return scipy.linalg.solve_triangular(L, np.eye(len(S)), lower=True).T
    except np.linalg.LinAlgError:
        pass
    vals, vecs = np.linalg.eigh(S)
    top = vals.max() if vals.size else 0.0
    if top <= 0:
        raise FisherError("projected within-class scatter is singular "
                          "(condition number inf)")
    floor = EIGEN_FLOOR * top
    low = vals < floor
    if low.any():
        cond = top / vals.min() if vals.min() > 0 else np.inf
        log.warning("within-class scatter ill-conditioned (condition %.3g); "
                    "flooring %d eigenvalues", cond, int(low.sum()))
    return vecs / np.sqrt(np.maximum(vals, floor))


def standardization(X):
    X = np.asarray(X, dtype=float)
    center = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale == 0] = np.inf  # constant columns map to 0
    return center, scale


def fit_fisherfaces(X, labels, standardize=True) -> FisherModel:
    X = np.asarray(X, dtype=float)
    labels = np.asarray(labels)
    N = X.shape[0]
    classes, y = _encode_labels(labels)
    c = len(classes)
    if c < 2:
        raise FisherError("Fisherfaces needs at least two classes")
    if N <= c:
        raise FisherError(f"need more samples than classes (N={N}, c={c})")

    if standardize:
        center, scale = standardization(X)
    else:
        center, scale = np.zeros(X.shape[1]), np.ones(X.shape[1])
    Z = (X - center) / scale

    mean, W_pca = fit_pca(Z, N - c)
    P = (Z - mean) @ W_pca
    sc = compute_scatter(P, y)
    A = _whitener(sc.S_w)
    vals, vecs = _top_eigh(A.T @ sc.S_b @ A)
    if vals[0] <= RANK_TOL:
        raise FisherError("between-class scatter is zero; no discriminant directions")
    rank_b = int(np.sum(vals > RANK_TOL * vals[0]))
    m = min(c - 1, rank_b)
    if m < c - 1:
        log.warning("between-class scatter has rank %d < c-1 = %d", m, c - 1)
    W_fld = _fix_signs(A @ vecs[:, :m])
    return FisherModel(center, scale, mean, W_pca, W_fld)


def project(model: FisherModel, x) -> np.ndarray:
    """Reduce one vector (1-D) or a batch of row vectors (2-D)."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != model.n:
        raise ValueError(f"expected {model.n} features, got {x.shape[-1]}")
    z = (x - model.center) / model.scale
    return (z - model.mean) @ model.W_opt


# ------------------------------------------------------------ text format

def _fmt_row(values):
    return " ".join(f"{v:.12g}" for v in values)


def dump_model(model: FisherModel, fingerprint=None) -> str:
    buf = io.StringIO()
    if fingerprint:
        buf.write(f"# fingerprint: {fingerprint}\n")
    buf.write(f"{model.n} {model.d_pca} {model.m}\n")
    buf.write(_fmt_row(model.center) + "\n")
    buf.write(_fmt_row(model.scale) + "\n")
    buf.write(_fmt_row(model.mean) + "\n")
    for row in model.W_pca:
        buf.write(_fmt_row(row) + "\n")
    for row in model.W_fld:
        buf.write(_fmt_row(row) + "\n")
    return buf.getvalue()


def load_model(text: str) -> FisherModel:
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    n, d, m = (int(t) for t in lines[0].split())

    def rows(start, count, width):
        out = np.array([[float(t) for t in ln.split()] for ln in lines[start:start + count]])
        return out.reshape(count, width)

    center, scale, mean = (rows(1 + i, 1, n)[0] for i in range(3))
    W_pca = rows(4, n, d)
    W_fld = rows(4 + n, d, m)
    return FisherModel(center, scale, mean, W_pca, W_fld)
