"""Writes a small directory laid out like the MIAS distribution: an Info.txt
index plus one 8-bit binary PGM per image, with a dark border to crop."""

from pathlib import Path

import numpy as np

from somtex.dataset import GrayImage, encode_pgm
from somtex.synthetic import mias_like_manifest

SEVERITY = {None: "", "benign": "B", "malignant": "M"}


def write_mias_dir(root, counts=None, shape=(32, 24), border=3, seed=0):
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    manifest = mias_like_manifest(shape, 32, seed, counts)
    lines = []
    for n, rec in enumerate(manifest.records, start=1):
        ident = f"mdb{n:03d}"
        pix = np.zeros((shape[0] + 2 * border, shape[1] + 2 * border), dtype=np.int64)
        pix[border:-border, border:-border] = 20 + 7 * rec.image.pixels
        (root / f"{ident}.pgm").write_bytes(encode_pgm(GrayImage(pix, 256), binary=True))
        if rec.class_label == "NORM":
            lines.append(f"{ident} F NORM")
        else:
            lines.append(f"{ident} G {rec.class_label} {SEVERITY[rec.severity]} 10 10 5")
    (root / "Info.txt").write_text("\n".join(lines) + "\n")
    return root, [ln.split()[0] for ln in lines]
