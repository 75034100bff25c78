"""Cross-validated evaluation: fold plans, the built-in 1-NN and Gaussian
naive Bayes classifiers, confusion matrices, sensitivity/specificity and
report rendering."""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .fisherfaces import fit_fisherfaces, project, standardization
from .roi import FeatureDataset, assemble_dataset
from .som import SomConfig, augment, fit_som, quantize_replace

log = logging.getLogger(__name__)

CLASSIFIERS = ("1nn", "gnb")
SOM_MODES = ("off", "replace", "augment")
LEAKAGE_MODES = ("per_fold", "paper")
VAR_FLOOR = 1e-9


def fingerprint(params) -> str:
    """Short stable hash of a JSON-serializable parameter tree."""
    blob = json.dumps(params, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


# ------------------------------------------------------------------ folds

@dataclass(frozen=True)
class FoldPlan:
    k: int
    assignment: np.ndarray
    seed: int
    stratified: bool

    def test_rows(self, fold):
        return np.flatnonzero(self.assignment == fold)

    def train_rows(self, fold):
        return np.flatnonzero(self.assignment != fold)

    def sizes(self):
        return np.bincount(self.assignment, minlength=self.k)


def kfold_split(labels, k=10, seed=0, stratified=True) -> FoldPlan:
    """Seeded shuffle then round-robin fold assignment.

    When stratified, rows are shuffled within each class and the classes are
    laid end to end before dealing, so both the overall and the per-class
    fold sizes differ by at most one.
    """
    labels = list(labels)
    n = len(labels)
    if not 2 <= k <= n:
        raise ValueError(f"need 2 <= k <= n (k={k}, n={n})")
    rng = np.random.default_rng(seed)
    if stratified:
        order = []
        for cls in dict.fromkeys(labels):
            rows = np.array([i for i, l in enumerate(labels) if l == cls])
            order.extend(rows[rng.permutation(len(rows))])
        order = np.array(order)
    else:
        order = rng.permutation(n)
    assignment = np.empty(n, dtype=np.int64)
    assignment[order] = np.arange(n) % k
    return FoldPlan(k, assignment, seed, stratified)


# ------------------------------------------------------------ classifiers

def classify_1nn(train: FeatureDataset, x):
    """Label of the nearest training row (first row wins ties)."""
    x = np.asarray(x, dtype=float)
    if len(train) == 0:
        raise ValueError("empty training set")
    if x.shape[-1] != train.dim:
        raise ValueError(f"expected {train.dim} features, got {x.shape[-1]}")
    d2 = ((train.X - x) ** 2).sum(axis=1)
    return train.labels[int(np.argmin(d2))]


@dataclass(frozen=True)
class GaussianNB:
    class_names: list
    log_prior: np.ndarray
    means: np.ndarray
    variances: np.ndarray

    def log_joint(self, x):
        x = np.asarray(x, dtype=float)
        ll = -0.5 * (np.log(2 * np.pi * self.variances)
                     + (x - self.means) ** 2 / self.variances).sum(axis=1)
        return self.log_prior + ll

    def predict(self, x):
        return self.class_names[int(np.argmax(self.log_joint(x)))]


def classify_gnb(train: FeatureDataset) -> GaussianNB:
    """Fit per-class, per-feature Gaussians (variance floored at 1e-9).

    Classes absent from the training rows are skipped; a present class with
    fewer than two rows is an error.
    """
    names, means, variances, counts = [], [], [], []
    for cls in train.class_names:
        rows = train.X[[l == cls for l in train.labels]]
        if len(rows) == 0:
            continue
        if len(rows) < 2:
            raise ValueError(f"class {cls!r} has {len(rows)} training row; need >= 2")
        names.append(cls)
        means.append(rows.mean(axis=0))
        variances.append(np.maximum(rows.var(axis=0), VAR_FLOOR))
        counts.append(len(rows))
    counts = np.array(counts, dtype=float)
    return GaussianNB(names, np.log(counts / counts.sum()),
                      np.array(means).reshape(len(names), train.dim),
                      np.array(variances).reshape(len(names), train.dim))


def predict(model, x):
    return model.predict(x)


class _NearestNeighbor:
    def __init__(self, train):
        self.train = train

    def predict(self, x):
        return classify_1nn(self.train, x)


def make_classifier(name, train: FeatureDataset):
    if name == "1nn":
        return _NearestNeighbor(train)
    if name == "gnb":
        return classify_gnb(train)
    raise ValueError(f"unknown classifier {name!r}; expected one of {CLASSIFIERS}")


# ----------------------------------------------------------------- metrics

@dataclass
class ConfusionMatrix:
    class_names: list
    counts: np.ndarray = None

    def __post_init__(self):
        c = len(self.class_names)
        if self.counts is None:
            self.counts = np.zeros((c, c), dtype=np.int64)

    def add(self, truth, predicted):
        i = self.class_names.index(truth)
        j = self.class_names.index(predicted)
        self.counts[i, j] += 1

    @property
    def total(self):
        return int(self.counts.sum())

    @property
    def accuracy(self):
        return float(np.trace(self.counts) / self.total) if self.total else float("nan")

    def binary(self, normal):
        """(TP, FN, TN, FP) with every non-``normal`` class as positive."""
        k = self.class_names.index(normal)
        tn = int(self.counts[k, k])
        fp = int(self.counts[k].sum() - tn)
        fn = int(self.counts[:, k].sum() - tn)
        tp = self.total - tn - fp - fn
        return tp, fn, tn, fp

    def __add__(self, other):
        return ConfusionMatrix(self.class_names, self.counts + other.counts)


def sensitivity_specificity(cm: ConfusionMatrix, normal="NORM"):
    if normal not in cm.class_names:
        return None, None
    tp, fn, tn, fp = cm.binary(normal)
    sens = tp / (tp + fn) if tp + fn else float("nan")
    spec = tn / (tn + fp) if tn + fp else float("nan")
    return sens, spec


@dataclass
class EvalReport:
    fold_matrices: list
    pooled: ConfusionMatrix
    overall_accuracy: float
    sensitivity: float | None
    specificity: float | None
    params: dict
    fingerprint: str
    predictions: list = field(default_factory=list)

    def to_dict(self):
        return {
            "fingerprint": self.fingerprint,
            "params": self.params,
            "class_names": list(self.pooled.class_names),
            "overall_accuracy": self.overall_accuracy,
            "sensitivity": self.sensitivity,
            "specificity": self.specificity,
            "pooled_confusion": self.pooled.counts.tolist(),
            "fold_confusion": [m.counts.tolist() for m in self.fold_matrices],
            "predictions": self.predictions,
        }


# ---------------------------------------------------------------- pipeline

def _scaled(fit_X, *apply_X):
    center, scale = standardization(fit_X)
    return [(X - center) / scale for X in apply_X]


def _transform(train: FeatureDataset, others, fisher, som_mode, som_cfg):
    """Fit the feature transforms on ``train`` only and apply to all sets."""
    sets = [train, *others]
    if fisher:
        model = fit_fisherfaces(train.X, train.labels)
        names = [f"fisher_{i}" for i in range(model.m)]
        sets = [ds.with_features(project(model, ds.X), names) for ds in sets]
    else:
        mats = _scaled(train.X, *(ds.X for ds in sets))
        sets = [ds.with_features(X, ds.feature_names) for ds, X in zip(sets, mats)]
    if som_mode != "off":
        som = fit_som(sets[0].X, som_cfg)
        replaced = [quantize_replace(som, ds) for ds in sets]
        if som_mode == "replace":
            sets = replaced
        else:
            sets = [augment(ds, r) for ds, r in zip(sets, replaced)]
    return sets[0], sets[1:]


def evaluate_classifiers(data: FeatureDataset, classifiers=("1nn",), *, fisher=True,
                         som_mode="off", som_cfg=None, plan: FoldPlan | None = None, k=10,
                         cv_seed=0, stratified=True, leakage_mode="per_fold", normal="NORM",
                         extra_params=None) -> dict:
    """Cross-validate several classifiers over one set of fitted transforms.

    Returns ``{classifier: EvalReport}``. See :func:`evaluate_pipeline`.
    """
    if som_mode not in SOM_MODES:
        raise ValueError(f"som_mode must be one of {SOM_MODES}")
    if leakage_mode not in LEAKAGE_MODES:
        raise ValueError(f"leakage_mode must be one of {LEAKAGE_MODES}")
    for name in classifiers:
        if name not in CLASSIFIERS:
            raise ValueError(f"unknown classifier {name!r}; expected one of {CLASSIFIERS}")
    if som_mode != "off" and som_cfg is None:
        som_cfg = SomConfig()
    if plan is None:
        plan = kfold_split(data.labels, k, cv_seed, stratified)
    if len(plan.assignment) != len(data):
        raise ValueError("fold plan does not match the dataset")

    base = {
        "fisher": bool(fisher), "som_mode": som_mode,
        "som": None if som_mode == "off" else vars(som_cfg),
        "k": plan.k, "cv_seed": plan.seed, "stratified": plan.stratified,
        "leakage_mode": leakage_mode, "n": len(data), "dim": data.dim,
        **(extra_params or {}),
    }
    if leakage_mode == "paper":
        full, _ = _transform(data, [], fisher, som_mode, som_cfg)

    tested = np.zeros(len(data), dtype=np.int64)
    mats = {name: [] for name in classifiers}
    predictions = {name: [None] * len(data) for name in classifiers}
    for fold in range(plan.k):
        tr, te = plan.train_rows(fold), plan.test_rows(fold)
        try:
            if leakage_mode == "paper":
                train_ds, test_ds = full.subset(tr), full.subset(te)
            else:
                # fit steps only ever see the training slice
                train_ds, (test_ds,) = _transform(data.subset(tr), [data.subset(te)],
                                                  fisher, som_mode, som_cfg)
            models = {name: make_classifier(name, train_ds) for name in classifiers}
        except Exception as exc:
            raise RuntimeError(f"fold {fold}: {exc}") from exc
        tested[te] += 1
        for name, clf in models.items():
            cm = ConfusionMatrix(list(data.class_names))
            for row, x, truth in zip(te, test_ds.X, test_ds.labels):
                pred = clf.predict(x)
                cm.add(truth, pred)
                predictions[name][row] = pred
            mats[name].append(cm)

    assert np.all(tested == 1), "every row must be tested exactly once"
    reports = {}
    for name in classifiers:
        pooled = mats[name][0]
        for cm in mats[name][1:]:
            pooled = pooled + cm
        sens, spec = sensitivity_specificity(pooled, normal)
        params = {**base, "classifier": name}
        reports[name] = EvalReport(mats[name], pooled, pooled.accuracy, sens, spec, params,
                                   fingerprint(params),
                                   [[i, p] for i, p in zip(data.ids, predictions[name])])
    return reports


def evaluate_pipeline(data: FeatureDataset, *, classifier="1nn", **kwargs) -> EvalReport:
    """k-fold cross-validation of one feature pipeline and one classifier.

    With ``leakage_mode="per_fold"`` standardization, Fisherfaces and the SOM
    are fitted on each training fold alone. ``"paper"`` fits them once on all
    rows before splitting, reproducing the original protocol.
    """
    return evaluate_classifiers(data, (classifier,), **kwargs)[classifier]


def evaluate_manifest(manifest, cfg, loader=None, **kwargs) -> EvalReport:
    data = assemble_dataset(manifest, cfg, loader)
    extra = {"partition": vars(cfg)}
    extra.update(kwargs.pop("extra_params", {}) or {})
    return evaluate_pipeline(data, extra_params=extra, **kwargs)


# --------------------------------------------------------------- rendering

def _pct(value):
    if value is None:
        return "-"
    if isinstance(value, str):
        return value
    return f"{100 * value:.2f}%"


def _table(title, header, rows):
    widths = [max(len(str(r[i])) for r in [header, *rows]) for i in range(len(header))]
    line = lambda cells: "  ".join(str(c).ljust(w) for c, w in zip(cells, widths)).rstrip()
    out = [title, line(header), line(["-" * w for w in widths])]
    out += [line(r) for r in rows]
    return "\n".join(out) + "\n"


def render_tables(cells, classifiers, feature_sets, map_sizes):
    """Plain-text tables in the layout of the original result tables.

    ``cells`` maps ``(feature_set, som_mode, map_size, classifier)`` to an
    accuracy or an error string; ``map_size`` is None when no SOM is used.
    One table per feature set compares the raw features with each SOM map
    size (replace mode), and a final table lists every feature set with its
    ``+SOMBased`` augmentation, one column per classifier.
    """
    blocks = []
    for n, fs in enumerate(feature_sets, start=1):
        header = ["Classifiers", f"{fs} Features", *[f"SOM {m}" for m in map_sizes]]
        rows = [[clf, _pct(cells.get((fs, "off", None, clf))),
                 *[_pct(cells.get((fs, "replace", m, clf))) for m in map_sizes]]
                for clf in classifiers]
        blocks.append(_table(f"Table {n}. {fs} features vs SOM-based features", header, rows))
    aug_sizes = sorted({key[2] for key in cells if key[1] == "augment"})
    if aug_sizes:
        rows = []
        for fs in feature_sets:
            rows.append([fs, *[_pct(cells.get((fs, "off", None, c))) for c in classifiers]])
            for m in aug_sizes:
                rows.append([f"{fs}+SOMBased" + (f" {m}" if len(aug_sizes) > 1 else ""),
                             *[_pct(cells.get((fs, "augment", m, c))) for c in classifiers]])
        blocks.append(_table(f"Table {len(feature_sets) + 1}. Overall accuracy with augmented "
                             f"features (map {', '.join(aug_sizes)})",
                             ["Feature Set", *classifiers], rows))
    return "\n".join(blocks)
