"""Experiment runner: per-seed training, best-seed selection and reports."""

from __future__ import annotations

import csv
import logging
import platform
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from filelock import FileLock, Timeout

from . import __version__
from .config import ConfigError, ExperimentConfig, dump_config
from .data import Dataset, Scaler, dataset_checksum, load_builtin, scale_fit_transform, train_test_split
from .kernels import pca_fit, pca_transform, thread_count
from .models.autoencoders import TrainingDivergence, ae_train, build_autoencoder
from .models.pqae import PqaeModel, pqae_encode, pqae_train
from .models.vqc import VqcModel, vqc_train
from .qsim import AnsatzSpec, FeatureMapSpec
from .serialize import save_checkpoint, write_json

log = logging.getLogger(__name__)

REPORT_SCHEMA = "qdimred.report/1"

FIG7_VARIANTS = ("iris2", "iris3", "seed", "wines")
TABLE_DATASETS = {
    "table1": ("iris", "wines", "seed", "mnist_binary_8x8"),
    "table3": ("iris", "seed", "wines"),
    "table4": ("iris",),
    "fig7": FIG7_VARIANTS,
}

CONVENTIONS = {
    "zz_angles": "RZ(2 x_i) per qubit, RZ(2 (pi - x_i)(pi - x_j)) per pair",
    "qubit_order": "qubit 0 is the least-significant bit",
    "encoder_angles": "raw encoder outputs, no clamping or pi scaling",
    "kpca_projection": "eigenvector entry times sqrt(max(eigenvalue, 0))",
    "vqc_readout": "bitstring integer value mod C",
    "mse": "mean over all samples and features",
}


class ExperimentDivergence(RuntimeError):
    def __init__(self, message, report_path=None):
        super().__init__(message)
        self.report_path = report_path


# ---------------------------------------------------------------------------
# canonical configurations


# Training settings per dataset, shared by every artifact that uses them.
# Latent-2 Iris (Bloch) needs a smaller step and longer schedule than latent 3.
AE_TRAINING = {
    "iris": {"epochs": 500, "lr": 1e-2, "batch_size": 16},
    "iris2": {"epochs": 3000, "lr": 3e-3, "batch_size": 16},
    "seed": {"epochs": 500, "lr": 1e-2, "batch_size": 16},
    "wines": {"epochs": 6000, "lr": 3e-4, "batch_size": 16},
}
VQC_TRAINING = {"pqae_epochs": 100, "pqae_lr": 1e-2, "vqc_epochs": 100, "vqc_lr": 0.05,
                "vqc_batch_size": 0}


def canonical_config(table: str, dataset: str | None = None) -> ExperimentConfig:
    """Settings for one column of a reproduced table or figure."""
    if table not in TABLE_DATASETS:
        raise ConfigError(f"unknown artifact {table!r}; expected one of {', '.join(TABLE_DATASETS)}")
    dataset = dataset or TABLE_DATASETS[table][0]
    if table == "fig7" and dataset == "iris":
        dataset = "iris3"
    if dataset not in TABLE_DATASETS[table]:
        raise ConfigError(f"{table} has no column {dataset!r}; choose from {', '.join(TABLE_DATASETS[table])}")
    cfg = ExperimentConfig()
    if table == "table1":
        encoding = "raw" if dataset == "iris" else "pca"
        return cfg.replace(
            experiment={"kind": "table1", "dataset": dataset},
            model={"kind": "pqae", "scaler": "minmax01", "n_q": 4, "n_d": 4, "batch_size": 32,
                   "reps": 2, "ansatz_reps": 3, "encoding": encoding, "center": False},
            training=VQC_TRAINING,
        )
    variant = ""
    if table == "fig7":
        variant, dataset = dataset, {"iris2": "iris", "iris3": "iris"}.get(dataset, dataset)
    training = AE_TRAINING[dataset]
    if dataset == "wines":
        model = {"kind": "qae", "scaler": "zscore", "latent": 12, "m": 4}
    elif table == "table4" or variant == "iris2":
        model = {"kind": "bloch_qae", "scaler": "zscore_l2", "latent": 2}
        training = AE_TRAINING["iris2"]
    else:
        model = {"kind": "qae", "scaler": "zscore_l2", "latent": 3, "m": 1}
    return cfg.replace(experiment={"kind": table, "dataset": dataset, "variant": variant},
                       model=model, training=training)


def _ae_jobs(cfg: ExperimentConfig) -> list[tuple[str, str, dict]]:
    """(row label, model kind, builder kwargs) for an autoencoder comparison."""
    m = cfg.model
    selection = m.selection or None
    qae_kw = dict(n=m.n, m=m.m, selection=selection, mode=m.extraction)
    if m.kind == "bloch_qae":
        quantum = ("bloch_qae", "bloch_qae", {})
        latent, post, poly_w, poly_m = 2, 3, 2, 1
    else:
        quantum = ("qae", "qae", qae_kw)
        chunk = len(selection) if selection else m.n**2 - 1
        latent, post = m.m * chunk, m.m * 2 * m.n
        poly_w, poly_m = 3, m.m
    linear = ("linear_ae", "linear", dict(latent=latent, post_width=post))
    kind = cfg.experiment.kind
    if kind in ("table3", "table4"):
        return [linear, quantum]
    if kind == "fig7":
        return [linear, ("poly_ae", "poly", dict(poly_width=poly_w, m=poly_m)), quantum]
    # single model
    if m.kind == "linear":
        return [("linear_ae", "linear", dict(latent=m.latent, post_width=m.post_width or None))]
    if m.kind == "poly":
        return [("poly_ae", "poly", dict(poly_width=m.poly_width, m=m.m))]
    return [quantum]


# ---------------------------------------------------------------------------
# per-seed runs


@dataclass
class Split:
    train: Dataset
    test: Dataset


def load_split(cfg: ExperimentConfig) -> Split:
    ds = load_builtin(cfg.experiment.dataset, tuple(cfg.model.digits))
    train, test = train_test_split(ds, cfg.split.fraction, cfg.split.seed, cfg.split.stratified)
    return Split(train, test)


def run_ae_seed(cfg: ExperimentConfig, split: Split, kind: str, kwargs: dict, seed: int) -> dict:
    Xtr, (Xte,), scaler = scale_fit_transform(cfg.model.scaler, split.train.features, split.test.features)
    model = build_autoencoder(kind, Xtr.shape[1], np.random.default_rng(seed), **kwargs)
    t = cfg.training
    hist = ae_train(model, Xtr, Xte, epochs=t.epochs, optimizer=t.optimizer or None, lr=t.lr,
                    batch_size=t.batch_size, seed=seed)
    return {"seed": seed, "train_mse": hist.train_mse[-1], "test_mse": hist.test_mse[-1],
            "latent_dim": model.latent_dim, "skipped_steps": hist.skipped_steps,
            "_model": model, "_scaler": scaler}


def _pca_encoding(Xtr, Xte, n_q):
    pca = pca_fit(Xtr, n_q)
    Ttr, (Tte,), rescale = scale_fit_transform("minmax01", pca_transform(pca, Xtr), pca_transform(pca, Xte))
    return Ttr, Tte


def run_vqc_seed(cfg: ExperimentConfig, split: Split, encoding: str, seed: int) -> dict:
    """Encode the split (raw / PCA / trained PQAE), then train and score a VQC."""
    m, t = cfg.model, cfg.training
    Xtr, (Xte,), scaler = scale_fit_transform(m.scaler, split.train.features, split.test.features)
    fm = FeatureMapSpec(m.n_q, m.reps, m.entanglement)
    out = {"seed": seed}
    if encoding == "raw":
        if Xtr.shape[1] != m.n_q:
            raise ConfigError(f"raw encoding needs N == n_q, got N={Xtr.shape[1]}, n_q={m.n_q}")
        Etr, Ete = Xtr, Xte
    elif encoding == "pca":
        Etr, Ete = _pca_encoding(Xtr, Xte, m.n_q)
    else:
        pq = PqaeModel.init(Xtr.shape[1], fm, m.n_d, np.random.default_rng(seed),
                            batch_size=m.batch_size, center=m.center,
                            encoder_widths=m.encoder_widths, decoder_widths=m.decoder_widths)
        hist = pqae_train(pq, Xtr, epochs=t.pqae_epochs, optimizer=t.optimizer or "adam",
                          lr=t.pqae_lr, seed=seed)
        Etr, Ete = pqae_encode(pq, Xtr), pqae_encode(pq, Xte)
        out["pqae_train_mse"] = hist.train_mse[-1]
        out["_model"], out["_scaler"] = pq, scaler
    # the classifier reuses the encoder's feature-map spec object
    vqc = VqcModel.init(fm, AnsatzSpec(m.n_q, m.ansatz_reps, m.entanglement),
                        split.train.n_classes, np.random.default_rng(seed))
    if "_model" in out and out["_model"].feature_map is not vqc.feature_map:
        raise RuntimeError("PQAE encoder and VQC must share one feature map")
    vh = vqc_train(vqc, Etr, split.train.labels, Ete, split.test.labels, epochs=t.vqc_epochs,
                   lr=t.vqc_lr, batch_size=t.vqc_batch_size, seed=seed)
    out.update(train_accuracy=vh.train_accuracy[-1], test_accuracy=vh.test_accuracy[-1],
               final_loss=vh.loss[-1])
    out["_vqc"] = vqc
    return out


# ---------------------------------------------------------------------------
# orchestration


def _map_seeds(fn, seeds):
    workers = thread_count()
    if workers > 1 and len(seeds) > 1:
        with ThreadPoolExecutor(max_workers=min(workers, len(seeds))) as pool:
            return list(pool.map(fn, seeds))
    return [fn(s) for s in seeds]


def _row(label, kind, metric, criterion, runs):
    values = [r[metric] for r in runs]
    pick = int(np.argmin(values) if criterion == "min" else np.argmax(values))
    public = [{k: v for k, v in r.items() if not k.startswith("_")} for r in runs]
    return {"model": label, "kind": kind, "metric": metric, "criterion": criterion,
            "per_seed": public, "best_seed": public[pick]["seed"], "best": values[pick]}, runs[pick]


def run_rows(cfg: ExperimentConfig, split: Split):
    """Execute every row the config asks for; returns (rows, best-run artifacts)."""
    seeds = list(cfg.training.seeds)
    rows, best = [], {}
    kind = cfg.experiment.kind
    if kind == "table1" or cfg.model.kind in ("pqae", "vqc"):
        encodings = []
        if kind == "table1":
            encodings = [cfg.model.encoding if cfg.model.encoding != "pqae" else "pca", "pqae"]
        elif cfg.model.kind == "pqae":
            encodings = ["pqae"]
        else:
            encodings = [cfg.model.encoding]
        for enc in encodings:
            runs = _map_seeds(lambda s: run_vqc_seed(cfg, split, enc, s), seeds)
            row, top = _row(f"{enc}_encoding", "vqc", "test_accuracy", "max", runs)
            rows.append(row)
            best[row["model"]] = top
        return rows, best
    for label, mkind, kwargs in _ae_jobs(cfg):
        runs = _map_seeds(lambda s: run_ae_seed(cfg, split, mkind, kwargs, s), seeds)
        row, top = _row(label, mkind, "test_mse", "min", runs)
        row["latent_dim"] = runs[0]["latent_dim"]
        rows.append(row)
        best[label] = top
    return rows, best


def _write_artifacts(out_dir: Path, best: dict) -> list[str]:
    written = []
    for label, run in best.items():
        if "_model" in run:
            name = f"{label}_seed{run['seed']}.ckpt.json"
            save_checkpoint(out_dir / name, run["_model"], scaler=run.get("_scaler"))
            written.append(name)
        if "_vqc" in run:
            name = f"{label}_vqc_seed{run['seed']}.ckpt.json"
            save_checkpoint(out_dir / name, run["_vqc"])
            written.append(name)
    return written


def _write_metrics_csv(path: Path, rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["model", "seed", "metric", "train", "test", "best"])
        for row in rows:
            train_key = "train_mse" if row["metric"] == "test_mse" else "train_accuracy"
            for r in row["per_seed"]:
                w.writerow([row["model"], r["seed"], row["metric"], format(r[train_key], ".17g"),
                            format(r[row["metric"]], ".17g"), int(r["seed"] == row["best_seed"])])


def run_experiment(cfg: ExperimentConfig, out_dir=None) -> dict:
    """Run ``cfg``, write ``report.json``, ``metrics.csv``, ``config.toml`` and checkpoints."""
    cfg.validate()
    out_dir = Path(out_dir or cfg.output.dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    lock = FileLock(str(out_dir / ".lock"))
    try:
        lock.acquire(timeout=0)
    except Timeout:
        raise ConfigError(f"output directory {out_dir} is in use by another experiment") from None
    try:
        return _run_locked(cfg, out_dir)
    finally:
        lock.release()


def _run_locked(cfg: ExperimentConfig, out_dir: Path) -> dict:
    start = time.perf_counter()
    split = load_split(cfg)
    report = {
        "schema": REPORT_SCHEMA,
        "version": __version__,
        "experiment": cfg.experiment.kind,
        "dataset": cfg.experiment.dataset,
        "variant": cfg.experiment.variant,
        "status": "ok",
        "config": cfg.to_dict(),
        "dataset_checksums": {cfg.experiment.dataset: dataset_checksum(cfg.experiment.dataset)},
        "split": {"train": split.train.n, "test": split.test.n},
        "conventions": dict(CONVENTIONS, kpca_center=cfg.model.center),
        "platform": platform.platform(),
        "rows": [],
    }
    (out_dir / "config.toml").write_text(dump_config(cfg), encoding="utf-8")
    try:
        rows, best = run_rows(cfg, split)
    except TrainingDivergence as exc:
        report.update(status="diverged", error=str(exc),
                      wall_clock_s=time.perf_counter() - start)
        write_json(report, out_dir / "report.json")
        raise ExperimentDivergence(str(exc), out_dir / "report.json") from exc
    report["rows"] = rows
    report["artifacts"] = _write_artifacts(out_dir, best)
    report["wall_clock_s"] = time.perf_counter() - start
    write_json(report, out_dir / "report.json")
    _write_metrics_csv(out_dir / "metrics.csv", rows)
    return report


REPORT_JSON_SCHEMA = {
    "type": "object",
    "required": ["schema", "experiment", "dataset", "status", "config", "dataset_checksums",
                 "rows", "wall_clock_s"],
    "properties": {
        "schema": {"const": REPORT_SCHEMA},
        "status": {"enum": ["ok", "diverged"]},
        "wall_clock_s": {"type": "number", "minimum": 0},
        "dataset_checksums": {"type": "object",
                              "additionalProperties": {"type": "string", "pattern": "^[0-9a-f]{64}$"}},
        "rows": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["model", "metric", "criterion", "per_seed", "best_seed", "best"],
                "properties": {
                    "criterion": {"enum": ["min", "max"]},
                    "metric": {"enum": ["test_mse", "test_accuracy"]},
                    "per_seed": {"type": "array", "minItems": 1,
                                 "items": {"type": "object", "required": ["seed"]}},
                    "best": {"type": "number"},
                },
            },
        },
    },
}
