"""Sweep runner: data preparation, ensemble training, evaluation and result files."""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import plotting
from .backends import derive_seed
from .boosting import EnsembleModel, ensemble_votes, qr_from_ensemble_votes, train_ensemble
from .config import ExperimentConfig, resolved
from .data import (
    Dataset,
    PcaTransform,
    ScalerParams,
    apply_pca,
    apply_standardizer,
    fit_pca,
    fit_standardizer,
    generate_synthetic,
    load_events,
    train_test_split,
)
from .tagging import TagReport, equal_population_bins, format_report, static_bins, tag_report

log = logging.getLogger(__name__)

# spawn-key path of the train/test split seed; member seeds use (k, 0) and (k, 1)
SPLIT_KEY = (2**32, 0)


@dataclass(eq=False)
class Prepared:
    train: Dataset
    test: Dataset
    raw_digest: str
    scaler: ScalerParams | None
    pca: PcaTransform | None

    def transform(self, d: Dataset) -> Dataset:
        if self.scaler is not None:
            d = apply_standardizer(d, self.scaler)
        if self.pca is not None:
            d = apply_pca(d, self.pca)
        return d

    def transforms_dict(self) -> dict:
        out = {}
        if self.scaler is not None:
            out["scaler"] = {"means": self.scaler.means.tolist(), "stdevs": self.scaler.stdevs.tolist()}
        if self.pca is not None:
            out["pca"] = {
                "mean": self.pca.mean.tolist(),
                "components": self.pca.components.tolist(),
                "explained_variance": self.pca.explained_variance.tolist(),
            }
        return out


def load_source(cfg: ExperimentConfig) -> Dataset:
    if cfg.data_path is not None:
        return load_events(cfg.data_path)
    return generate_synthetic(cfg.synthetic)


def split(cfg: ExperimentConfig, d: Dataset | None = None) -> tuple[Dataset, Dataset, str]:
    d = load_source(cfg) if d is None else d
    seed = derive_seed(cfg.ensemble.master_seed, *SPLIT_KEY)
    train, test = train_test_split(d, cfg.test_size, seed)
    return train, test, d.digest()


def prepare(cfg: ExperimentConfig, pieces=None) -> Prepared:
    """Split the source, then fit standardisation and PCA on the training part only."""
    train, test, digest = pieces if pieces is not None else split(cfg)
    scaler = fit_standardizer(train) if cfg.standardize else None
    if scaler is not None:
        train = apply_standardizer(train, scaler)
    pca = fit_pca(train, cfg.pca_k) if cfg.pca_k is not None else None
    prepared = Prepared(train, test, digest, scaler, None)
    if pca is not None:
        prepared.pca = pca
        prepared.train = apply_pca(train, pca)
    prepared.test = prepared.transform(test)
    return prepared


def make_report(qr, labels, mode: str) -> TagReport:
    binning = static_bins() if mode == "static" else equal_population_bins(np.abs(qr))
    return tag_report(qr, labels, binning)


def train_from_config(cfg: ExperimentConfig, prepared: Prepared, threads: int = 1, G=None, N=None) -> EnsembleModel:
    e = cfg.ensemble
    return train_ensemble(
        prepared.train,
        N or e.N,
        e.n_train_per_member,
        G or e.G,
        cfg.backend,
        e.C_reg,
        e.master_seed,
        threads=threads,
    )


def _fmt(v) -> str:
    return f"{v:.6g}" if isinstance(v, float) else str(v)


def _write_tsv(path: Path, header, rows):
    lines = ["\t".join(header)] + ["\t".join(_fmt(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _nested_points(cfg, prepared, axis, values, threads):
    """Generation and ensemble-size sweeps: one model, evaluated at nested prefixes."""
    big = max(values)
    t0 = time.perf_counter()
    if axis == "generation":
        model = train_from_config(cfg, prepared, threads, G=big)
    else:
        model = train_from_config(cfg, prepared, threads, N=big)
    v_train = ensemble_votes(model, prepared.train.X, threads)
    v_test = ensemble_votes(model, prepared.test.X, threads)
    fit_time = time.perf_counter() - t0
    points = []
    for value in values:
        t1 = time.perf_counter()
        if axis == "generation":
            qtr, qte = qr_from_ensemble_votes(v_train, value), qr_from_ensemble_votes(v_test, value)
        else:
            qtr, qte = qr_from_ensemble_votes(v_train[:value]), qr_from_ensemble_votes(v_test[:value])
        points.append((value, qtr, qte, fit_time + time.perf_counter() - t1))
    return points


def run_experiment(cfg: ExperimentConfig, out_dir=None, threads: int | None = None) -> Path:
    """Run the configured sweep and write its result files.

    ``results.tsv`` holds one row per sweep value: the value, then train and test
    efficiencies.  Wall-clock times go to ``timings.tsv`` so the results file is
    reproducible byte for byte.  A figure of the sweep is drawn next to it.
    """
    out = Path(out_dir or cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    threads = threads or cfg.threads
    axis = cfg.sweep_axis or "generation"
    values = list(cfg.sweep_values) or [cfg.ensemble.G]
    pieces = split(cfg)

    if axis in ("generation", "N"):
        prepared = prepare(cfg, pieces)
        points = _nested_points(cfg, prepared, axis, values, threads)
        labels = [(prepared.train.y, prepared.test.y)] * len(points)
    else:
        points, labels = [], []
        for value in values:
            t0 = time.perf_counter()
            sub = cfg.with_value(axis, value)
            prepared = prepare(sub, pieces)
            model = train_from_config(sub, prepared, threads)
            qtr = qr_from_ensemble_votes(ensemble_votes(model, prepared.train.X, threads))
            qte = qr_from_ensemble_votes(ensemble_votes(model, prepared.test.X, threads))
            points.append((value, qtr, qte, time.perf_counter() - t0))
            labels.append((prepared.train.y, prepared.test.y))
            log.info("%s=%s done", axis, value)

    rows, timings = [], []
    reports_dir = out / "reports"
    reports_dir.mkdir(exist_ok=True)
    last_report = None
    for (value, qtr, qte, dt), (ytr, yte) in zip(points, labels):
        rtr = make_report(qtr, ytr, cfg.binning)
        rte = make_report(qte, yte, cfg.binning)
        rows.append((value, rtr.epsilon_eff, rte.epsilon_eff))
        timings.append((value, dt))
        (reports_dir / f"test_{axis}_{value}.tsv").write_text(format_report(rte), encoding="utf-8")
        last_report = rte

    _write_tsv(out / "results.tsv", [axis, "epsilon_eff_train", "epsilon_eff_test"], rows)
    _write_tsv(out / "timings.tsv", [axis, "wall_time_s"], timings)
    manifest = {
        "config": resolved(cfg),
        "data_digest": pieces[2],
        "sweep": {"axis": axis, "values": values},
        "outputs": ["results.tsv", "timings.tsv", "results.png", "calibration.png", "reports/"],
    }
    (out / "manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    plotting.plot_sweep(rows, axis, out / "results.png")
    plotting.plot_calibration(last_report, out / "calibration.png")
    return out
