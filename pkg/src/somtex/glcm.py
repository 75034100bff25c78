"""Gray-level co-occurrence matrices and the four texture statistics used for
classification: dissimilarity, uniformity, entropy and contrast."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

FEATURE_NAMES = ("dissimilarity", "uniformity", "entropy", "contrast")
N_FEATURES = len(FEATURE_NAMES)
DEFAULT_OFFSET = (1, 0)  # 0 degrees, distance 1


@dataclass(frozen=True)
class Glcm:
    G: int
    p: np.ndarray
    pair_count: int


@dataclass(frozen=True)
class TextureFeatures:
    dissimilarity: float
    uniformity: float
    entropy: float
    contrast: float
    degenerate: bool = False

    def as_array(self):
        return np.array([self.dissimilarity, self.uniformity, self.entropy, self.contrast])


def _pair_slices(shape, offset):
    """Slices selecting reference pixels and their offset neighbours.

    ``offset`` is (dx, dy): dx shifts columns to the right, dy shifts rows down.
    """
    dx, dy = offset
    h, w = shape

    def span(d, n):
        if d >= 0:
            return slice(0, max(n - d, 0)), slice(d, n)
        return slice(-d, n), slice(0, max(n + d, 0))

    r_ref, r_nbr = span(dy, h)
    c_ref, c_nbr = span(dx, w)
    return (r_ref, c_ref), (r_nbr, c_nbr)


def compute_glcm(img, offset=DEFAULT_OFFSET, G=None, mask=None, symmetric=True) -> Glcm:
    """Normalized co-occurrence matrix of ``img`` at pixel ``offset``.

    ``img`` is a :class:`~somtex.dataset.GrayImage` or a 2-D integer array with
    values in ``[0, G)``. With a boolean ``mask`` a pair is counted only when
    both of its pixels are selected. A region with no countable pair gives an
    all-zero matrix with ``pair_count == 0``.
    """
    pixels = getattr(img, "pixels", img)
    pixels = np.asarray(pixels)
    if G is None:
        G = getattr(img, "levels", None)
        if G is None:
            raise ValueError("G is required for a bare array")
    elif hasattr(img, "levels") and img.levels != G:
        raise ValueError(f"image has {img.levels} levels, expected G={G}")
    if tuple(offset) == (0, 0):
        raise ValueError("offset must be non-zero")

    ref, nbr = _pair_slices(pixels.shape, offset)
    a = pixels[ref].ravel()
    b = pixels[nbr].ravel()
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != pixels.shape:
            raise ValueError("mask shape differs from image shape")
        keep = (mask[ref] & mask[nbr]).ravel()
        a, b = a[keep], b[keep]

    pairs = a.size
    counts = np.bincount(a * G + b, minlength=G * G).reshape(G, G).astype(float)
    if symmetric:
        counts += counts.T
    total = counts.sum()
    if total > 0:
        counts /= total
    return Glcm(G, counts, int(pairs))


def features_from_glcm(m: Glcm) -> TextureFeatures:
    if m.pair_count == 0:
        return TextureFeatures(0.0, 0.0, 0.0, 0.0, degenerate=True)
    p = m.p
    i, j = np.indices(p.shape)
    diff = np.abs(i - j)
    nz = p[p > 0]
    return TextureFeatures(
        dissimilarity=float(np.sum(p * diff)),
        uniformity=float(np.sum(p * p)),
        entropy=float(-np.sum(nz * np.log2(nz))) + 0.0,  # no -0.0
        contrast=float(np.sum(p * diff * diff)),
    )


def texture_features(img, offset=DEFAULT_OFFSET, G=None, mask=None):
    """Shortcut: the four statistics of the (masked) GLCM of ``img``."""
    return features_from_glcm(compute_glcm(img, offset, G, mask))
