import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import somtex.roi as roi
from oracles import best_partition
from somtex.dataset import DatasetManifest, GrayImage, ImageRecord
from somtex.glcm import texture_features
from somtex.roi import (FeatureDataset, PartitionConfig, assemble_dataset, extract_bloc_wise,
                        extract_fixed_bloc, extract_pixel_wise, kmeans, read_csv, split_grid,
                        write_csv)
from somtex.synthetic import checkerboard_image, texture_manifest

FLAT = [0.0, 1.0, 0.0, 0.0]


# ------------------------------------------------------------- split_grid

def test_split_exact():
    tiles = split_grid(GrayImage(np.arange(24).reshape(6, 4), 24), 3, 2)
    assert len(tiles) == 6
    assert all(t.pixels.shape == (2, 2) for t in tiles)
    assert tiles[1].pixels.tolist() == [[2, 3], [6, 7]]  # row-major order


def test_split_drops_remainder():
    pix = np.arange(35).reshape(7, 5)
    tiles = split_grid(GrayImage(pix, 35), 3, 2)
    assert len(tiles) == 6
    assert all(t.pixels.shape == (2, 2) for t in tiles)
    covered = np.concatenate([t.pixels.ravel() for t in tiles])
    assert 34 not in covered and 4 not in covered  # last column and last row dropped


def test_split_identity():
    img = GrayImage(np.arange(6).reshape(2, 3), 6)
    (tile,) = split_grid(img, 1, 1)
    assert np.array_equal(tile.pixels, img.pixels)


def test_split_too_fine():
    with pytest.raises(ValueError):
        split_grid(np.zeros((2, 2), int), 3, 1)


# ----------------------------------------------------------------- kmeans

def test_kmeans_two_exact_clusters():
    m = kmeans([0, 0, 10, 10], 2, seed=0)
    assert sorted(m.centroids[:, 0]) == [0, 10]
    assert m.objective == 0


@pytest.mark.parametrize("seed", range(10))
def test_kmeans_five_points(seed):
    m = kmeans([1, 2, 9, 10, 11], 2, seed=seed)
    assert sorted(m.centroids[:, 0].tolist()) == [1.5, 10.0]
    assert m.objective == pytest.approx(2.5, abs=1e-12)
    assert best_partition([1, 2, 9, 10, 11], 2) == (2.5, [(1.5,), (10.0,)])


def test_kmeans_singletons():
    m = kmeans([3.0, 1.0, 2.0], 3)
    assert m.objective == 0
    assert m.centroids[:, 0].tolist() == [3.0, 1.0, 2.0]
    assert m.assignments.tolist() == [0, 1, 2]


def test_kmeans_more_clusters_than_distinct_points():
    m = kmeans([5, 5, 7, 5], 4)
    assert m.k == 2
    assert m.objective == 0
    assert m.assignments.tolist() == [0, 0, 1, 0]


def test_kmeans_empty_input():
    with pytest.raises(ValueError):
        kmeans([], 2)


def test_kmeans_reseeds_empty_cluster(monkeypatch):
    # duplicate initial centroids force an empty cluster in round one
    monkeypatch.setattr(roi, "_kmeanspp",
                        lambda X, w, k, rng: np.array([[0.0], [0.0], [20.0]]))
    m = kmeans([0, 0, 10, 10, 20], 3)
    assert sorted(m.centroids[:, 0].tolist()) == [0, 10, 20]
    assert m.objective == 0


def _check_model(X, m, w=None):
    X = np.asarray(X, float).reshape(len(X), -1)
    w = np.ones(len(X)) if w is None else np.asarray(w, float)
    d2 = ((X[:, None, :] - m.centroids[None]) ** 2).sum(axis=2)
    assert np.array_equal(m.assignments, np.argmin(d2, axis=1))
    assert m.objective == pytest.approx(float(np.sum(w * d2[np.arange(len(X)), m.assignments])),
                                        rel=1e-12, abs=1e-12)
    assert all(b <= a + 1e-9 * max(1, a) for a, b in zip(m.history, m.history[1:]))


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_kmeans_contracts(k, seed):
    r = np.random.default_rng(seed)
    X = r.normal(size=(int(r.integers(1, 9)), 2)).round(1)
    m = kmeans(X, k, seed=seed)
    _check_model(X, m)
    if k < len(np.unique(X, axis=0)):
        best, _ = best_partition(X.tolist(), k)
        assert m.objective >= best - 1e-9


def test_kmeans_weighted_equals_expanded(rng):
    values = np.array([1.0, 2.0, 8.0, 9.0, 30.0])
    counts = np.array([3, 1, 2, 5, 1])
    m = kmeans(values, 2, seed=1, weights=counts)
    _check_model(values, m, counts)
    expanded = np.repeat(values, counts)
    raw_sse = sum(((expanded - m.centroids[m.assignments[np.repeat(np.arange(5), counts)], 0])
                   ** 2))
    assert m.objective == pytest.approx(raw_sse)


def test_kmeans_deterministic(rng):
    X = rng.normal(size=(200, 3))
    a, b = kmeans(X, 4, seed=7), kmeans(X, 4, seed=7)
    assert np.array_equal(a.centroids, b.centroids)
    assert np.array_equal(a.assignments, b.assignments)


# ------------------------------------------------------------- extraction

IMAGE_SHAPE = (96, 64)


@pytest.mark.parametrize("mode, dim", [("fixed_bloc", 192), ("pixel_wise", 72),
                                       ("bloc_wise", 72)])
def test_default_configuration_dimensions(rng, mode, dim):
    cfg = PartitionConfig(mode)
    assert (cfg.SN, cfg.M, cfg.L) == (6, 8, 3)
    img = GrayImage(rng.integers(0, 32, size=IMAGE_SHAPE), 32)
    vec = roi.extract(img, cfg)
    assert vec.shape == (dim,) == (cfg.dim,)
    assert len(cfg.feature_names()) == dim


def test_fixed_bloc_constant():
    cfg = PartitionConfig("fixed_bloc", 1, 1, 1, 1, G=8)
    assert extract_fixed_bloc(GrayImage(np.full((5, 5), 3), 8), cfg).tolist() == FLAT


def test_fixed_bloc_shift_invariant(rng):
    cfg = PartitionConfig("fixed_bloc", G=32)
    pix = rng.integers(0, 20, size=IMAGE_SHAPE)
    a = extract_fixed_bloc(GrayImage(pix, 32), cfg)
    b = extract_fixed_bloc(GrayImage(pix + 7, 32), cfg)
    np.testing.assert_allclose(a, b, atol=1e-12)


def test_fixed_bloc_narrow_bloc_flagged():
    cfg = PartitionConfig("fixed_bloc", 1, 1, 1, 4, G=4)
    flags = []
    vec = extract_fixed_bloc(GrayImage(np.zeros((3, 4), int), 4), cfg, flags)
    assert vec.tolist() == [0.0] * 16
    assert flags == ["s0_b0", "s0_b1", "s0_b2", "s0_b3"]


def test_pixel_wise_constant_single_cluster():
    cfg = PartitionConfig("pixel_wise", 1, 1, L=1, G=8)
    assert extract_pixel_wise(GrayImage(np.full((4, 6), 5), 8), cfg).tolist() == FLAT


def test_pixel_wise_two_flat_bands():
    pix = np.full((8, 6), 20)
    pix[4:] = 3
    cfg = PartitionConfig("pixel_wise", 1, 1, L=2, G=32)
    assert extract_pixel_wise(GrayImage(pix, 32), cfg).tolist() == FLAT + FLAT


def test_pixel_wise_cluster_order_follows_intensity():
    # dark flat band below a bright two-level striped band
    pix = np.full((8, 6), 2)
    pix[:4, 0::2] = 28
    pix[:4, 1::2] = 30
    cfg = PartitionConfig("pixel_wise", 1, 1, L=2, G=32)
    vec = extract_pixel_wise(GrayImage(pix, 32), cfg)
    assert vec[:4].tolist() == FLAT
    # striped band: every horizontal pair is (28, 30)
    assert vec[4:].tolist() == [2.0, 0.5, 1.0, 4.0]


def test_pixel_wise_missing_cluster_is_degenerate():
    cfg = PartitionConfig("pixel_wise", 1, 1, L=3, G=8)
    flags = []
    vec = extract_pixel_wise(GrayImage(np.full((4, 4), 1), 8), cfg, flags)
    assert vec.tolist() == FLAT + [0.0] * 8
    assert flags == ["s0_c1", "s0_c2"]


def test_pixel_wise_seed_invariant_on_separated_data(rng):
    pix = np.where(rng.random((24, 16)) < 0.5, rng.integers(0, 4, (24, 16)),
                   rng.integers(26, 32, (24, 16)))
    img = GrayImage(pix, 32)
    vecs = [extract_pixel_wise(img, PartitionConfig("pixel_wise", 3, 2, L=2, kmeans_seed=s))
            for s in range(5)]
    for v in vecs[1:]:
        assert np.array_equal(v, vecs[0])


def test_bloc_wise_identical_blocs():
    cfg = PartitionConfig("bloc_wise", 1, 1, 2, 2, L=3, G=8)
    vec = extract_bloc_wise(GrayImage(np.full((8, 8), 4), 8), cfg)
    assert vec.tolist() == FLAT * 3


def test_bloc_wise_two_blocs_lexicographic(rng):
    check = checkerboard_image((4, 4), 8, rng).pixels
    pix = np.hstack([check, np.full((4, 4), 6)])  # checkerboard bloc first
    cfg = PartitionConfig("bloc_wise", 1, 1, 1, 2, L=2, G=8)
    vec = extract_bloc_wise(GrayImage(pix, 8), cfg)
    f_check = texture_features(GrayImage(check, 8)).as_array()
    assert vec[:4].tolist() == FLAT
    np.testing.assert_array_equal(vec[4:], f_check)


def test_bloc_wise_rejects_L_above_M():
    with pytest.raises(ValueError):
        PartitionConfig("bloc_wise", bloc_rows=1, bloc_cols=2, L=3)


def test_bloc_wise_with_L_equal_M_sorts_fixed_blocs(rng):
    # every bloc gets its own cluster: bloc_wise = fixed_bloc blocs, sorted
    pix = rng.integers(0, 16, size=(8, 8))
    fixed = extract_fixed_bloc(GrayImage(pix, 16), PartitionConfig("fixed_bloc", 1, 1, 2, 2,
                                                                   G=16))
    bloc = extract_bloc_wise(GrayImage(pix, 16), PartitionConfig("bloc_wise", 1, 1, 2, 2, L=4,
                                                                 G=16))
    blocs = fixed.reshape(4, 4)
    expected = blocs[np.lexsort(blocs.T[::-1])]
    np.testing.assert_allclose(bloc.reshape(4, 4), expected, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(roi.MODES), st.integers(12, 40), st.integers(8, 30),
       st.integers(0, 2**32 - 1))
def test_dimension_independent_of_content(mode, h, w, seed):
    r = np.random.default_rng(seed)
    cfg = PartitionConfig(mode, G=8)
    kind = seed % 3
    if kind == 0:
        pix = np.full((h, w), seed % 8)
    elif kind == 1:
        pix = r.integers(0, 8, size=(h, w))
    else:
        pix = np.where(r.random((h, w)) < 0.1, 7, 0)
    assert roi.extract(GrayImage(pix, 8), cfg).shape == (cfg.dim,)


def test_levels_must_match_config():
    with pytest.raises(ValueError):
        extract_fixed_bloc(GrayImage(np.zeros((24, 16), int), 256), PartitionConfig("fixed_bloc"))


# --------------------------------------------------------------- assembly

def test_assemble_dataset_order_and_labels():
    m = texture_manifest(n_per_class=3, shape=(24, 16), G=8)
    ds = assemble_dataset(m, PartitionConfig("pixel_wise", G=8))
    assert ds.ids == [r.id for r in m.records]
    assert ds.labels == [r.class_label for r in m.records]
    assert ds.X.shape == (9, 72)
    assert ds.class_names == ["NORM", "CHECK", "NOISE"]
    # constant images only populate their first cluster
    assert set(ds.degenerate) >= {r.id for r in m.records if r.class_label == "NORM"}


def test_assemble_empty_and_single():
    with pytest.raises(ValueError):
        assemble_dataset(DatasetManifest([], ["NORM", "CALC"]), PartitionConfig())
    rec = ImageRecord("one", "NORM", image=GrayImage(np.zeros((12, 8), int), 32))
    ds = assemble_dataset(DatasetManifest([rec], ["NORM", "CALC"]), PartitionConfig("fixed_bloc"))
    assert ds.X.shape == (1, 192)


def test_assemble_uses_loader_and_workers():
    m = texture_manifest(n_per_class=2, shape=(24, 16), G=8)
    images = {r.id: r.image for r in m.records}
    for r in m.records:
        r.image = None
    cfg = PartitionConfig("bloc_wise", G=8)
    serial = assemble_dataset(m, cfg, loader=_Lookup(images))
    parallel = assemble_dataset(m, cfg, loader=_Lookup(images), workers=2)
    assert np.array_equal(serial.X, parallel.X)


class _Lookup:
    def __init__(self, images):
        self.images = images

    def __call__(self, record):
        return self.images[record.id]


def test_csv_round_trip(rng):
    ds = FeatureDataset(["a", "b"], rng.normal(size=(2, 3)) * 1e3, ["NORM", "CALC"],
                        ["f0", "f1", "f2"], ["NORM", "CALC"])
    text = write_csv(ds, fingerprint="abc123")
    assert text.splitlines()[0] == "# fingerprint: abc123"
    assert text.splitlines()[2] == "id,f0,f1,f2,class"
    back = read_csv(text)
    assert back.ids == ds.ids and back.labels == ds.labels
    assert back.class_names == ds.class_names
    np.testing.assert_allclose(back.X, ds.X, rtol=1e-8)
