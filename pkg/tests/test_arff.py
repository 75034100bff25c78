import io
import logging

import numpy as np
import pytest
from scipy.io import arff as scipy_arff

from somtex.arff import export_arff, parse_arff
from somtex.roi import FeatureDataset


def _ds(X, labels, names=None, classes=None):
    X = np.asarray(X, float).reshape(len(labels), -1)
    names = names if names is not None else [f"f{j}" for j in range(X.shape[1])]
    return FeatureDataset([f"r{i}" for i in range(len(labels))], X, list(labels), names,
                          classes or list(dict.fromkeys(labels)))


def test_one_row_two_features():
    text = export_arff(_ds([[0.5, 2.0]], ["NORM"], ["a", "b"], ["NORM", "CALC"]), "mias")
    assert text == ("@RELATION mias\n"
                    "@ATTRIBUTE a NUMERIC\n"
                    "@ATTRIBUTE b NUMERIC\n"
                    "@ATTRIBUTE class {NORM,CALC}\n"
                    "@DATA\n"
                    "0.5,2,NORM\n")
    lines = text.splitlines()
    assert sum(ln.startswith("@") and ln != "@DATA" for ln in lines) == 4
    assert lines[lines.index("@DATA") + 1:] == ["0.5,2,NORM"]


def test_empty_feature_set():
    text = export_arff(_ds(np.zeros((2, 0)), ["b", "a"], [], ["a", "b"]), "empty")
    assert text.splitlines() == ["@RELATION empty", "@ATTRIBUTE class {a,b}", "@DATA", "b", "a"]
    back = parse_arff(text)
    assert back.X.shape == (2, 0) and back.labels == ["b", "a"]


def test_nine_significant_digits_and_ascii():
    text = export_arff(_ds([[1 / 3, 123456789012.0, -2.5e-12]], ["x"]), "r", fingerprint="beef")
    assert text.startswith("% fingerprint: beef\n")
    assert text.splitlines()[-1] == "0.333333333,1.23456789e+11,-2.5e-12,x"
    assert text.isascii() and "\r" not in text


def test_round_trip_own_reader(rng):
    X = rng.uniform(-1, 1, size=(40, 7))
    labels = rng.choice(["NORM", "CALC", "CIRC"], size=40).tolist()
    ds = _ds(X, labels, classes=["NORM", "CALC", "CIRC"])
    back = parse_arff(export_arff(ds, "rt"))
    np.testing.assert_allclose(back.X, X, rtol=0, atol=1e-9)
    assert back.labels == labels
    assert back.class_names == ["NORM", "CALC", "CIRC"]
    assert back.feature_names == ds.feature_names


def test_round_trip_wide_range_to_nine_digits(rng):
    X = rng.normal(size=(20, 5)) * 10.0 ** rng.integers(-6, 7, size=(20, 5))
    back = parse_arff(export_arff(_ds(X, ["a"] * 20)))
    np.testing.assert_allclose(back.X, X, rtol=5e-9, atol=0)


def test_scipy_reads_export(rng):
    X = rng.uniform(0, 10, size=(6, 3))
    labels = ["NORM", "SPIC", "NORM", "ARCH", "SPIC", "NORM"]
    text = export_arff(_ds(X, labels, classes=["NORM", "SPIC", "ARCH"]), "sc", fingerprint="ab12")
    data, meta = scipy_arff.loadarff(io.StringIO(text))
    assert meta.names() == ["f0", "f1", "f2", "class"]
    got = np.column_stack([data[n] for n in ["f0", "f1", "f2"]])
    np.testing.assert_allclose(got, X, rtol=0, atol=1e-8)
    assert [v.decode() for v in data["class"]] == labels


def test_unsafe_names_sanitized(caplog):
    ds = _ds([[1.0, 2.0]], ["big mass"], ["s0,b1", "x{y}"], ["big mass"])
    with caplog.at_level(logging.WARNING, logger="somtex.arff"):
        text = export_arff(ds, "my relation")
    assert "@ATTRIBUTE s0_b1 NUMERIC" in text and "@ATTRIBUTE x_y_ NUMERIC" in text
    assert "@RELATION my_relation" in text and text.endswith(",big_mass\n")
    assert len([r for r in caplog.records if "sanitized" in r.message]) == 4
    assert parse_arff(text).labels == ["big_mass"]


@pytest.mark.parametrize("text", [
    "@RELATION r\n@ATTRIBUTE a NUMERIC\n@DATA\n1\n",
    "@RELATION r\n@ATTRIBUTE a STRING\n@ATTRIBUTE class {x}\n@DATA\n",
    "@RELATION r\n@WHAT\n",
])
def test_parse_rejects_unsupported(text):
    with pytest.raises(ValueError):
        parse_arff(text)
