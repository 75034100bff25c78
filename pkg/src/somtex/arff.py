"""ARFF export of feature datasets (for replication in external ML
workbenches) and a reader for the subset of ARFF that the exporter emits."""

from __future__ import annotations

import logging
import re

import numpy as np

from .roi import FeatureDataset

log = logging.getLogger(__name__)

_UNSAFE = re.compile(r"[,{}'\"%\s]|[^\x21-\x7e]")


def _sanitize(token, what):
    clean = _UNSAFE.sub("_", token) or "_"
    if clean != token:
        log.warning("%s %r sanitized to %r", what, token, clean)
    return clean


def export_arff(ds: FeatureDataset, relation="features", fingerprint=None) -> str:
    lines = []
    if fingerprint:
        lines.append(f"% fingerprint: {fingerprint}")
    lines.append(f"@RELATION {_sanitize(relation, 'relation')}")
    for name in ds.feature_names:
        lines.append(f"@ATTRIBUTE {_sanitize(name, 'feature name')} NUMERIC")
    classes = {c: _sanitize(c, "class label") for c in ds.class_names}
    lines.append("@ATTRIBUTE class {" + ",".join(classes.values()) + "}")
    lines.append("@DATA")
    for row, label in zip(ds.X, ds.labels):
        lines.append(",".join([*(f"{v:.9g}" for v in row), classes[label]]))
    text = "\n".join(lines) + "\n"
    return text.encode("ascii").decode("ascii")


def parse_arff(text: str) -> FeatureDataset:
    """Read numeric attributes plus a trailing nominal ``class`` attribute."""
    names, class_names, rows, labels = [], None, [], []
    relation = None
    in_data = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("%"):
            continue
        if in_data:
            cells = [c.strip() for c in line.split(",")]
            rows.append([float(c) for c in cells[:-1]])
            labels.append(cells[-1])
            continue
        head = line.split(None, 1)[0].upper()
        if head == "@RELATION":
            relation = line.split(None, 1)[1]
        elif head == "@ATTRIBUTE":
            m = re.match(r"@ATTRIBUTE\s+(\S+)\s+(.*)$", line, re.IGNORECASE)
            if not m:
                raise ValueError(f"line {lineno}: malformed attribute")
            name, kind = m.groups()
            if kind.startswith("{"):
                class_names = [c.strip() for c in kind.strip("{}").split(",") if c.strip()]
            elif kind.upper() in ("NUMERIC", "REAL"):
                names.append(name)
            else:
                raise ValueError(f"line {lineno}: unsupported attribute type {kind!r}")
        elif head == "@DATA":
            in_data = True
        else:
            raise ValueError(f"line {lineno}: unexpected {head!r}")
    if class_names is None:
        raise ValueError("no nominal class attribute")
    X = np.array(rows, dtype=float).reshape(len(labels), len(names))
    ids = [f"{relation or 'row'}_{i}" for i in range(len(labels))]
    return FeatureDataset(ids, X, labels, names, class_names)
