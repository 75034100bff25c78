"""Batch pipeline driven by one key-value configuration file.

    somtex ingest run.cfg       # MIAS index + PGMs -> manifest.jsonl
    somtex extract run.cfg      # texture features per ROI mode (CSV + ARFF)
    somtex reduce run.cfg       # Fisherfaces on the full feature sets
    somtex som run.cfg          # SOM-based feature sets per map size
    somtex evaluate run.cfg     # cross-validated report tables
    somtex run run.cfg          # all of the above
    somtex export-arff features.csv -o features.arff

``SOMTEX_DATA_ROOT`` and ``SOMTEX_OUTPUT_DIR`` override ``data_root`` and
``output``. Exit status is 0 on success, 1 on a pipeline error and 2 on a
configuration error.
"""

from __future__ import annotations

import argparse
import configparser
import dataclasses
import json
import logging
import math
import os
import sys
import tempfile
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path

import numpy as np

from .arff import export_arff
from .dataset import (DatasetManifest, DecodeError, parse_mias_index, preprocess,
                      read_manifest, read_pgm, records_from_index, write_manifest)
from .evaluation import (CLASSIFIERS, LEAKAGE_MODES, evaluate_classifiers, fingerprint,
                         kfold_split, render_tables)
from .fisherfaces import dump_model, fit_fisherfaces, project, standardization
from .roi import MODE_TITLES, MODES, PartitionConfig, assemble_dataset, read_csv, write_csv
from .som import SomConfig, augment, dump_map, fit_som, quantize_replace

log = logging.getLogger("somtex")

ENV_DATA_ROOT = "SOMTEX_DATA_ROOT"
ENV_OUTPUT = "SOMTEX_OUTPUT_DIR"


class ConfigError(ValueError):
    pass


def _grid(text):
    try:
        rows, cols = (int(t) for t in text.lower().split("x"))
    except ValueError:
        raise ConfigError(f"expected a grid like 3x2, got {text!r}") from None
    return rows, cols


def _list(text):
    return tuple(t.strip() for t in text.split(",") if t.strip())


def _bool(text):
    value = text.strip().lower()
    if value in ("1", "yes", "true", "on"):
        return True
    if value in ("0", "no", "false", "off"):
        return False
    raise ConfigError(f"expected yes/no, got {text!r}")


def _sample(text):
    out = {}
    for item in _list(text):
        label, _, count = item.partition(":")
        try:
            out[label.strip()] = int(count)
        except ValueError:
            raise ConfigError(f"sample entries look like NORM:30, got {item!r}") from None
    return out


def _optional_int(text):
    return None if text.strip().lower() in ("", "none", "default") else int(text)


_PARSERS = {
    "data_root": str, "index": str, "images": str, "image_suffix": str,
    "sample": _sample, "sample_seed": int,
    "crop_threshold": int, "levels": int,
    "modes": _list, "sub_grid": _grid, "bloc_grid": _grid, "clusters": int,
    "kmeans_seed": int,
    "fisher": _bool,
    "som_modes": _list, "map_sizes": _list, "augment_map_size": str,
    "som_iterations": _optional_int, "som_alpha0": float, "som_sigma_final": float,
    "som_seed": int,
    "classifiers": _list, "folds": int, "cv_seed": int, "stratified": _bool,
    "leakage_mode": str, "normal_class": str,
    "output": str, "workers": int, "strict": _bool,
}

# not parameters of the experiment; excluded from the fingerprint
_NON_PARAMS = ("data_root", "index", "images", "image_suffix", "output", "workers", "strict")


@dataclass(frozen=True)
class RunConfig:
    data_root: str = "."
    index: str = "Info.txt"
    images: str = "."
    image_suffix: str = ".pgm"
    sample: dict = field(default_factory=dict)
    sample_seed: int = 0
    crop_threshold: int = 10
    levels: int = 32
    modes: tuple = MODES
    sub_grid: tuple = (3, 2)
    bloc_grid: tuple = (4, 2)
    clusters: int = 3
    kmeans_seed: int = 0
    fisher: bool = True
    som_modes: tuple = ("replace", "augment")
    map_sizes: tuple = ("5x5", "10x10", "15x15")
    augment_map_size: str = "10x10"
    som_iterations: int | None = None
    som_alpha0: float = 0.5
    som_sigma_final: float = 0.5
    som_seed: int = 0
    classifiers: tuple = CLASSIFIERS
    folds: int = 10
    cv_seed: int = 0
    stratified: bool = True
    leakage_mode: str = "per_fold"
    normal_class: str = "NORM"
    output: str = "somtex-out"
    workers: int = 1
    strict: bool = False

    def __post_init__(self):
        bad = [m for m in self.modes if m not in MODES]
        if bad or not self.modes:
            raise ConfigError(f"modes must be drawn from {MODES}, got {list(self.modes)}")
        bad = [m for m in self.som_modes if m not in ("replace", "augment")]
        if bad:
            raise ConfigError(f"som_modes must be drawn from replace, augment; got {bad}")
        bad = [c for c in self.classifiers if c not in CLASSIFIERS]
        if bad or not self.classifiers:
            raise ConfigError(f"classifiers must be drawn from {CLASSIFIERS}, got {bad}")
        if self.leakage_mode not in LEAKAGE_MODES:
            raise ConfigError(f"leakage_mode must be one of {LEAKAGE_MODES}")
        for size in (*self.map_sizes, self.augment_map_size):
            _grid(size)
        try:
            for mode in self.modes:
                self.partition(mode)
            for size in self.map_sizes:
                self.som_config(size)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def from_text(cls, text, base_dir=".", env=None):
        env = os.environ if env is None else env
        parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
        try:
            parser.read_string("[run]\n" + text)
        except configparser.Error as exc:
            raise ConfigError(str(exc)) from None
        values = {}
        for key, raw in parser["run"].items():
            if key not in _PARSERS:
                raise ConfigError(f"unknown configuration key {key!r}")
            try:
                values[key] = _PARSERS[key](raw)
            except ValueError as exc:
                raise ConfigError(f"{key}: {exc}") from None
        if env.get(ENV_DATA_ROOT):
            values["data_root"] = env[ENV_DATA_ROOT]
        if env.get(ENV_OUTPUT):
            values["output"] = env[ENV_OUTPUT]
        for key in ("data_root", "output"):
            if key in values:
                values[key] = str(Path(base_dir, values[key]))
            else:
                values[key] = str(Path(base_dir, getattr(cls, key)))
        return cls(**values)

    @classmethod
    def load(cls, path, env=None):
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        return cls.from_text(text, base_dir=path.parent, env=env)

    def params(self):
        d = dataclasses.asdict(self)
        return {k: (list(v) if isinstance(v, tuple) else v)
                for k, v in d.items() if k not in _NON_PARAMS}

    @property
    def fingerprint(self):
        return fingerprint(self.params())

    def path(self, name):
        return Path(self.data_root, name)

    @property
    def out(self):
        return Path(self.output)

    def partition(self, mode):
        return PartitionConfig(mode, *self.sub_grid, *self.bloc_grid, L=self.clusters,
                               kmeans_seed=self.kmeans_seed, G=self.levels)

    def som_config(self, size):
        rows, cols = _grid(size)
        return SomConfig(rows, cols, iterations=self.som_iterations, alpha0=self.som_alpha0,
                         sigma_final=self.som_sigma_final, seed=self.som_seed)

    @property
    def som_cells(self):
        """(som_mode, map_size) cells to evaluate besides the raw features."""
        cells = []
        if "replace" in self.som_modes:
            cells += [("replace", s) for s in self.map_sizes]
        if "augment" in self.som_modes:
            cells.append(("augment", self.augment_map_size))
        return cells


# ------------------------------------------------------------------ files

def write_atomic(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n", encoding="ascii") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _json(obj):
    def clean(o):
        if isinstance(o, float) and not math.isfinite(o):
            return None
        if isinstance(o, dict):
            return {k: clean(v) for k, v in o.items()}
        if isinstance(o, (list, tuple)):
            return [clean(v) for v in o]
        if isinstance(o, np.generic):
            return clean(o.item())
        return o
    return json.dumps(clean(obj), indent=1, sort_keys=True) + "\n"


def load_image(record, crop_threshold, levels):
    return preprocess(read_pgm(record.path), crop_threshold, levels)


# --------------------------------------------------------------- commands

def cmd_ingest(cfg: RunConfig) -> DatasetManifest:
    index_path = cfg.path(cfg.index)
    images = cfg.path(cfg.images)
    if not index_path.is_file():
        raise FileNotFoundError(f"MIAS index not found: {index_path}")
    if not images.is_dir() or not any(images.iterdir()):
        raise FileNotFoundError(f"image directory missing or empty: {images}")
    records = records_from_index(parse_mias_index(index_path.read_text()))
    if not records:
        raise ValueError(f"no entries in {index_path}")

    good, bad = [], []
    for r in records:
        r.path = str(images / f"{r.id}{cfg.image_suffix}")
        try:
            read_pgm(r.path)
        except (OSError, DecodeError) as exc:
            bad.append(f"{r.id}: {exc}")
            continue
        good.append(r)
    if bad:
        if cfg.strict:
            raise ValueError("unreadable images:\n  " + "\n  ".join(bad))
        log.warning("skipping %d unreadable images:\n  %s", len(bad), "\n  ".join(bad))

    if cfg.sample:
        rng = np.random.default_rng(cfg.sample_seed)
        keep = set()
        for label, count in cfg.sample.items():
            pool = [r.id for r in good if r.class_label == label]
            if len(pool) < count:
                raise ValueError(f"sample wants {count} {label} images, only {len(pool)} exist")
            keep.update(pool[i] for i in np.sort(rng.choice(len(pool), count, replace=False)))
        good = [r for r in good if r.id in keep]

    manifest = DatasetManifest(good)
    hist = manifest.class_histogram()
    sev = {"normal": 0, "benign": 0, "malignant": 0}
    for r in good:
        sev[r.severity or "normal"] += 1
    log.info("manifest: %d images; classes %s; severity %s", len(good), hist, sev)
    write_atomic(cfg.out / "manifest.jsonl",
                 f"# fingerprint: {cfg.fingerprint}\n" + write_manifest(manifest))
    return manifest


def _read_manifest(cfg):
    path = cfg.out / "manifest.jsonl"
    if not path.is_file():
        raise FileNotFoundError(f"{path} missing; run 'somtex ingest' first")
    return read_manifest(path.read_text())


def cmd_extract(cfg: RunConfig) -> dict:
    manifest = _read_manifest(cfg)
    loader = partial(load_image, crop_threshold=cfg.crop_threshold, levels=cfg.levels)
    out, report = {}, {}
    for mode in cfg.modes:
        try:
            ds = assemble_dataset(manifest, cfg.partition(mode), loader, cfg.workers)
        except Exception as exc:
            raise RuntimeError(f"{mode} extraction failed: {exc}") from exc
        write_atomic(cfg.out / f"features_{mode}.csv", write_csv(ds, cfg.fingerprint))
        write_atomic(cfg.out / f"features_{mode}.arff",
                     export_arff(ds, MODE_TITLES[mode], cfg.fingerprint))
        report[mode] = {"dim": ds.dim, "rows": len(ds), "degenerate": ds.degenerate}
        log.info("%s: %d x %d features", mode, len(ds), ds.dim)
        out[mode] = ds
    write_atomic(cfg.out / "extract_report.json",
                 _json({"fingerprint": cfg.fingerprint, "modes": report}))
    return out


def _features(cfg, mode):
    path = cfg.out / f"features_{mode}.csv"
    if not path.is_file():
        raise FileNotFoundError(f"{path} missing; run 'somtex extract' first")
    return read_csv(path.read_text())


def _write_set(cfg, stem, ds, relation):
    write_atomic(cfg.out / f"{stem}.csv", write_csv(ds, cfg.fingerprint))
    write_atomic(cfg.out / f"{stem}.arff", export_arff(ds, relation, cfg.fingerprint))


def _reduced(cfg, mode):
    """Full-data reduction of one feature set (Fisherfaces or z-scores)."""
    ds = _features(cfg, mode)
    if not cfg.fisher:
        center, scale = standardization(ds.X)
        return ds.with_features((ds.X - center) / scale, ds.feature_names), None
    model = fit_fisherfaces(ds.X, ds.labels)
    return ds.with_features(project(model, ds.X),
                            [f"fisher_{i}" for i in range(model.m)]), model


def cmd_reduce(cfg: RunConfig) -> dict:
    out = {}
    for mode in cfg.modes:
        reduced, model = _reduced(cfg, mode)
        if model is not None:
            write_atomic(cfg.out / f"fisher_{mode}.model", dump_model(model, cfg.fingerprint))
            log.info("%s: Fisherfaces %d -> %d (PCA %d)", mode, model.n, model.m, model.d_pca)
        _write_set(cfg, f"reduced_{mode}", reduced, f"{MODE_TITLES[mode]}_reduced")
        out[mode] = reduced
    return out


def cmd_som(cfg: RunConfig) -> dict:
    out = {}
    sizes = list(dict.fromkeys(
        [*(cfg.map_sizes if "replace" in cfg.som_modes else ()),
         *((cfg.augment_map_size,) if "augment" in cfg.som_modes else ())]))
    for mode in cfg.modes:
        reduced, _ = _reduced(cfg, mode)
        title = MODE_TITLES[mode]
        for size in sizes:
            som = fit_som(reduced.X, cfg.som_config(size))
            write_atomic(cfg.out / f"som_{mode}_{size}.map", dump_map(som, cfg.fingerprint))
            based = quantize_replace(som, reduced)
            if "replace" in cfg.som_modes and size in cfg.map_sizes:
                _write_set(cfg, f"som_{mode}_{size}", based, f"{title}_SOMBased_{size}")
                out[(mode, "replace", size)] = based
            if "augment" in cfg.som_modes and size == cfg.augment_map_size:
                aug = augment(reduced, based)
                _write_set(cfg, f"augmented_{mode}_{size}", aug, f"{title}_plus_SOMBased_{size}")
                out[(mode, "augment", size)] = aug
    return out


def cmd_evaluate(cfg: RunConfig) -> dict:
    cells, entries = {}, []
    for mode in cfg.modes:
        data = _features(cfg, mode)
        title = MODE_TITLES[mode]
        plan = kfold_split(data.labels, cfg.folds, cfg.cv_seed, cfg.stratified)
        for som_mode, size in [("off", None), *cfg.som_cells]:
            som_cfg = cfg.som_config(size) if size else None
            try:
                reports = evaluate_classifiers(
                    data, cfg.classifiers, fisher=cfg.fisher, som_mode=som_mode,
                    som_cfg=som_cfg, plan=plan, leakage_mode=cfg.leakage_mode,
                    normal=cfg.normal_class,
                    extra_params={"partition": vars(cfg.partition(mode))})
            except Exception as exc:
                log.error("%s/%s/%s failed: %s", mode, som_mode, size, exc)
                for clf in cfg.classifiers:
                    cells[(title, som_mode, size, clf)] = f"error: {exc}"
                    entries.append({"feature_set": title, "som_mode": som_mode,
                                    "map_size": size, "classifier": clf, "error": str(exc)})
                continue
            for clf, rep in reports.items():
                cells[(title, som_mode, size, clf)] = rep.overall_accuracy
                entries.append({"feature_set": title, "som_mode": som_mode,
                                "map_size": size, "classifier": clf, **rep.to_dict()})
                log.info("%s %s %s %s: accuracy %.4f", title, som_mode, size or "-", clf,
                         rep.overall_accuracy)

    titles = [MODE_TITLES[m] for m in cfg.modes]
    sizes = list(cfg.map_sizes) if "replace" in cfg.som_modes else []
    text = render_tables(cells, list(cfg.classifiers), titles, sizes)
    header = (f"# fingerprint: {cfg.fingerprint}\n"
              f"# {cfg.folds}-fold cross-validation, leakage_mode={cfg.leakage_mode}, "
              f"fisher={'on' if cfg.fisher else 'off'}\n\n")
    write_atomic(cfg.out / "report.txt", header + text)
    write_atomic(cfg.out / "report.json", _json({"fingerprint": cfg.fingerprint,
                                                 "config": cfg.params(), "cells": entries}))
    return cells


def cmd_run(cfg: RunConfig) -> dict:
    cmd_ingest(cfg)
    cmd_extract(cfg)
    cmd_reduce(cfg)
    if cfg.som_modes:
        cmd_som(cfg)
    return cmd_evaluate(cfg)


def cmd_export_arff(csv_path, output=None, relation=None) -> str:
    csv_path = Path(csv_path)
    text = csv_path.read_text()
    fp = None
    for line in text.splitlines():
        if line.startswith("# fingerprint:"):
            fp = line.split(":", 1)[1].strip()
    arff = export_arff(read_csv(text), relation or csv_path.stem, fp)
    if output:
        write_atomic(output, arff)
    else:
        sys.stdout.write(arff)
    return arff


COMMANDS = {
    "ingest": cmd_ingest,
    "extract": cmd_extract,
    "reduce": cmd_reduce,
    "som": cmd_som,
    "evaluate": cmd_evaluate,
    "run": cmd_run,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="somtex", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        p = sub.add_parser(name, help=fn.__name__.replace("cmd_", "") + " step")
        p.add_argument("config", help="key = value configuration file")
        p.add_argument("--strict", action="store_true",
                       help="fail on unreadable images instead of skipping them")
    p = sub.add_parser("export-arff", help="convert a feature CSV to ARFF")
    p.add_argument("csv")
    p.add_argument("-o", "--output")
    p.add_argument("--relation")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "export-arff":
            cmd_export_arff(args.csv, args.output, args.relation)
            return 0
        cfg = RunConfig.load(args.config)
        if args.strict:
            cfg = dataclasses.replace(cfg, strict=True)
        COMMANDS[args.command](cfg)
    except ConfigError as exc:
        log.error("configuration error: %s", exc)
        return 2
    except Exception as exc:
        log.error("%s", exc)
        log.debug("traceback", exc_info=True)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
