"""Synthetic texture images for tests and demos."""

import numpy as np

from .dataset import DatasetManifest, GrayImage, ImageRecord


def constant_image(shape, G, rng):
    return GrayImage(np.full(shape, rng.integers(G)), G)


def checkerboard_image(shape, G, rng):
    a, b = sorted(rng.choice(G, size=2, replace=False))
    r, c = np.indices(shape)
    return GrayImage(np.where((r + c) % 2 == 0, a, b), G)


def noise_image(shape, G, rng):
    return GrayImage(rng.integers(0, G, size=shape), G)


TEXTURES = {"CONST": constant_image, "CHECK": checkerboard_image, "NOISE": noise_image}


def texture_manifest(n_per_class=30, shape=(96, 64), G=32, seed=0,
                     kinds=("CONST", "CHECK", "NOISE")) -> DatasetManifest:
    """Manifest of ``n_per_class`` images per texture kind, labelled by kind.

    The first kind is labelled ``NORM`` so that sensitivity and specificity
    are defined; the others keep their kind name and a dummy severity.
    """
    rng = np.random.default_rng(seed)
    names = ["NORM", *kinds[1:]]
    records = []
    for label, kind in zip(names, kinds):
        severity = None if label == "NORM" else "benign"
        for i in range(n_per_class):
            img = TEXTURES[kind](shape, G, rng)
            records.append(ImageRecord(f"{kind.lower()}{i:03d}", label, severity, img))
    return DatasetManifest(records, names)


MIAS_SAMPLE_COUNTS = {"NORM": 30, "CALC": 10, "CIRC": 7, "SPIC": 8,
                      "MISC": 5, "ARCH": 7, "ASYM": 4}


def mias_like_manifest(shape=(96, 64), G=32, seed=0, counts=None) -> DatasetManifest:
    """71 images with the class counts of the evaluated MIAS sample.

    Each class gets its own blend of smooth background and noise so the
    classes are separable but not trivially so.
    """
    counts = counts or MIAS_SAMPLE_COUNTS
    rng = np.random.default_rng(seed)
    r, c = np.indices(shape)
    records = []
    for k, (label, n) in enumerate(counts.items()):
        for i in range(n):
            period = 3 + 2 * k
            base = (G / 2) * (1 + np.sin(2 * np.pi * (r + rng.integers(period)) / period))
            noise = rng.normal(0, 1 + k, size=shape)
            pix = np.clip(np.rint(base * (0.5 + 0.07 * k) + noise), 0, G - 1).astype(np.int64)
            severity = None if label == "NORM" else ("benign" if i % 2 else "malignant")
            records.append(ImageRecord(f"{label.lower()}{i:03d}", label, severity,
                                       GrayImage(pix, G)))
    return DatasetManifest(records, list(counts))
