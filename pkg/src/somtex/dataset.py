"""Image ingestion and preprocessing: PGM decoding, the MIAS index, border
cropping, histogram equalization and gray-level quantization."""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

MIAS_CLASSES = ("NORM", "CALC", "CIRC", "SPIC", "MISC", "ARCH", "ASYM")
SEVERITIES = {"B": "benign", "M": "malignant"}


class DecodeError(ValueError):
    def __init__(self, message, offset):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class IndexParseError(ValueError):
    pass


@dataclass(frozen=True)
class GrayImage:
    """Integer gray-level image; ``pixels`` is indexed [row, col]."""

    pixels: np.ndarray
    levels: int = 256

    def __post_init__(self):
        pix = np.asarray(self.pixels)
        if pix.ndim != 2:
            raise ValueError(f"pixels must be 2-D, got shape {pix.shape}")
        if not np.issubdtype(pix.dtype, np.integer):
            if pix.size and not np.all(pix == np.floor(pix)):
                raise ValueError("pixels must be integral")
            pix = pix.astype(np.int64)
        if pix.size and (pix.min() < 0 or pix.max() >= self.levels):
            raise ValueError(f"pixel values must lie in [0, {self.levels})")
        object.__setattr__(self, "pixels", pix)

    @property
    def height(self):
        return self.pixels.shape[0]

    @property
    def width(self):
        return self.pixels.shape[1]


@dataclass
class ImageRecord:
    id: str
    class_label: str
    severity: str | None = None
    image: GrayImage | None = None
    path: str | None = None

    def __post_init__(self):
        if (self.class_label == "NORM") != (self.severity is None):
            raise ValueError(f"{self.id}: NORM records carry no severity and abnormal ones must")


@dataclass
class DatasetManifest:
    records: list[ImageRecord]
    class_names: list[str] = field(default_factory=list)

    def __post_init__(self):
        ids = [r.id for r in self.records]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate image ids in manifest")
        if not self.class_names:
            # canonical MIAS order first, then anything else by first appearance
            present = {r.class_label for r in self.records}
            names = [c for c in MIAS_CLASSES if c in present]
            names += sorted(present.difference(names))
            self.class_names = names
        missing = {r.class_label for r in self.records} - set(self.class_names)
        if missing:
            raise ValueError(f"labels not in class_names: {sorted(missing)}")

    def __len__(self):
        return len(self.records)

    def class_histogram(self):
        counts = {c: 0 for c in self.class_names}
        for r in self.records:
            counts[r.class_label] += 1
        return counts


# --------------------------------------------------------------------- PGM

_WS = b" \t\n\r\x0b\x0c"


def _header_tokens(data, count, start):
    """Read ``count`` whitespace-separated header tokens, skipping comments."""
    tokens = []
    pos = start
    n = len(data)
    while len(tokens) < count:
        while pos < n and data[pos] in _WS:
            pos += 1
        if pos >= n:
            raise DecodeError("truncated header", pos)
        if data[pos] == ord("#"):
            while pos < n and data[pos] not in b"\r\n":
                pos += 1
            continue
        begin = pos
        while pos < n and data[pos] not in _WS and data[pos] != ord("#"):
            pos += 1
        tok = data[begin:pos]
        if not tok.isdigit():
            raise DecodeError(f"expected a decimal integer, got {tok[:16]!r}", begin)
        tokens.append(int(tok))
    return tokens, pos


def decode_pgm(data: bytes) -> GrayImage:
    """Decode a binary (P5) or ASCII (P2) PGM into a :class:`GrayImage`."""
    if len(data) < 2:
        raise DecodeError("missing magic number", 0)
    magic = bytes(data[:2])
    if magic not in (b"P2", b"P5"):
        raise DecodeError(f"unsupported magic {magic!r}", 0)
    (width, height, maxval), pos = _header_tokens(data, 3, 2)
    if width < 1 or height < 1:
        raise DecodeError(f"bad dimensions {width}x{height}", pos)
    if not 0 < maxval <= 65535:
        raise DecodeError(f"maxval {maxval} outside 1..65535", pos)
    npix = width * height

    if magic == b"P5":
        if pos >= len(data) or data[pos] not in _WS:
            raise DecodeError("missing whitespace after maxval", pos)
        pos += 1
        nbytes = 1 if maxval < 256 else 2
        body = data[pos:pos + npix * nbytes]
        if len(body) < npix * nbytes:
            raise DecodeError(
                f"truncated payload: need {npix * nbytes} bytes, have {len(body)}",
                pos + len(body))
        dtype = np.uint8 if nbytes == 1 else np.dtype(">u2")
        pix = np.frombuffer(body, dtype=dtype).astype(np.int64)
    else:
        body = data[pos:]
        try:
            values = [int(tok) for tok in body.split()]
        except ValueError:
            raise DecodeError("non-numeric token in ASCII payload", pos) from None
        if len(values) < npix:
            raise DecodeError(
                f"truncated payload: need {npix} samples, have {len(values)}", len(data))
        pix = np.array(values[:npix], dtype=np.int64)

    if pix.size and pix.max() > maxval:
        raise DecodeError(f"sample value {int(pix.max())} exceeds maxval {maxval}", pos)
    return GrayImage(pix.reshape(height, width), levels=maxval + 1)


def encode_pgm(img: GrayImage, binary=True) -> bytes:
    maxval = img.levels - 1
    if not 0 < maxval <= 65535:
        raise ValueError(f"cannot encode levels={img.levels} as PGM")
    magic = "P5" if binary else "P2"
    header = f"{magic}\n{img.width} {img.height}\n{maxval}\n".encode("ascii")
    if binary:
        dtype = np.uint8 if maxval < 256 else np.dtype(">u2")
        return header + img.pixels.astype(dtype).tobytes()
    lines = [" ".join(str(int(v)) for v in row) for row in img.pixels]
    return header + ("\n".join(lines) + "\n").encode("ascii")


def read_pgm(path) -> GrayImage:
    return decode_pgm(Path(path).read_bytes())


# -------------------------------------------------------------- MIAS index

@dataclass(frozen=True)
class MiasEntry:
    id: str
    tissue: str
    class_label: str
    severity: str | None
    center: tuple[int, int] | None
    radius: int | None


def _as_int(tok):
    return int(tok) if re.fullmatch(r"\d+", tok) else None


def parse_mias_index(text: str) -> list[MiasEntry]:
    """Parse the MIAS ``Info.txt`` listing, one entry per non-empty line.

    Lines look like ``mdb001 G CIRC B 535 425 197`` or ``mdb003 D NORM``.
    Images with several abnormalities appear on several lines; all are kept.
    Coordinates given as ``*`` or omitted (some CALC entries) become None.
    """
    entries = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        fields = raw.split()
        if not fields:
            continue
        if len(fields) < 3:
            raise IndexParseError(f"line {lineno}: expected at least 3 fields, got {raw!r}")
        ident, tissue, label = fields[:3]
        if label not in MIAS_CLASSES:
            raise IndexParseError(f"line {lineno}: unknown class token {label!r}")
        severity = center = radius = None
        if label != "NORM":
            if len(fields) < 4 or fields[3] not in SEVERITIES:
                raise IndexParseError(f"line {lineno}: abnormal entry without B/M severity")
            severity = SEVERITIES[fields[3]]
            coords = [_as_int(t) for t in fields[4:7]]
            if len(coords) >= 2 and None not in coords[:2]:
                center = (coords[0], coords[1])
            if len(coords) == 3:
                radius = coords[2]
        entries.append(MiasEntry(ident, tissue, label, severity, center, radius))
    return entries


def records_from_index(entries) -> list[ImageRecord]:
    """Collapse index entries to one record per image id.

    An image listed with several abnormalities takes the first one as its
    label; the rest are logged and dropped.
    """
    records = {}
    for e in entries:
        if e.id in records:
            prev = records[e.id]
            if prev.class_label != e.class_label:
                log.info("%s: extra abnormality %s ignored (labelled %s)",
                         e.id, e.class_label, prev.class_label)
            continue
        records[e.id] = ImageRecord(e.id, e.class_label, e.severity)
    return list(records.values())


# ------------------------------------------------------- manifest (JSONL)

def write_manifest(manifest: DatasetManifest) -> str:
    lines = [json.dumps({"id": r.id, "label": r.class_label, "severity": r.severity,
                         "path": r.path}, sort_keys=True)
             for r in manifest.records]
    return "".join(line + "\n" for line in lines)


def read_manifest(text: str, class_names=None) -> DatasetManifest:
    records = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        row = json.loads(line)
        records.append(ImageRecord(row["id"], row["label"], row.get("severity"),
                                   path=row.get("path")))
    return DatasetManifest(records, list(class_names or []))


# ------------------------------------------------------------ preprocessing

def crop_black_border(img: GrayImage, threshold=10) -> GrayImage:
    """Crop to the bounding box of pixels at or above ``threshold``."""
    if threshold >= img.levels:
        raise ValueError("threshold must be below the number of gray levels")
    rows, cols = np.nonzero(img.pixels >= threshold)
    if rows.size == 0:
        return img
    sub = img.pixels[rows.min():rows.max() + 1, cols.min():cols.max() + 1]
    return GrayImage(sub.copy(), img.levels)


def equalization_lut(img: GrayImage) -> np.ndarray:
    """Gray-level mapping used by :func:`equalize_histogram`."""
    if img.levels < 2:
        raise ValueError("equalization needs at least two gray levels")
    hist = np.bincount(img.pixels.ravel(), minlength=img.levels)
    cdf = np.cumsum(hist) / hist.sum()
    cdf_min = cdf[np.flatnonzero(hist)[0]]
    if cdf_min >= 1.0:
        return np.arange(img.levels)
    scaled = (img.levels - 1) * (cdf - cdf_min) / (1.0 - cdf_min)
    # round half up; clip the below-minimum (unoccupied) levels at 0
    return np.clip(np.floor(scaled + 0.5), 0, img.levels - 1).astype(np.int64)


def equalize_histogram(img: GrayImage) -> GrayImage:
    lut = equalization_lut(img)
    return GrayImage(lut[img.pixels], img.levels)


def quantize_gray_levels(img: GrayImage, G: int) -> GrayImage:
    if not 2 <= G <= img.levels:
        raise ValueError(f"G={G} must lie in [2, {img.levels}]")
    return GrayImage(img.pixels * G // img.levels, G)


def preprocess(img: GrayImage, crop_threshold=10, G=32) -> GrayImage:
    """Crop, equalize, then quantize to ``G`` levels."""
    img = crop_black_border(img, crop_threshold)
    img = equalize_histogram(img)
    return quantize_gray_levels(img, G)
