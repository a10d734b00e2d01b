"""Datasets, scalers, splits and the bundled benchmark snapshots."""

from __future__ import annotations

import csv
import hashlib
import io
import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

SCALERS = ("none", "minmax01", "l2_rows", "zscore", "zscore_l2")
BUILTINS = ("iris", "wines", "seed", "mnist_binary_8x8")

_FILES = {
    "iris": "iris.csv",
    "wines": "wines.csv",
    "seed": "seed.csv",
    "mnist_binary_8x8": "digits8x8.csv",
}


class DataError(ValueError):
    pass


class MissingResourceError(FileNotFoundError):
    pass


@dataclass(frozen=True)
class Dataset:
    name: str
    features: np.ndarray
    labels: np.ndarray
    n_classes: int
    feature_names: tuple[str, ...] | None = None
    label_mapping: dict = field(default_factory=dict)

    def __post_init__(self):
        X = np.asarray(self.features, dtype=float)
        y = np.asarray(self.labels, dtype=int)
        if X.ndim != 2 or X.shape[0] < 1:
            raise DataError("dataset needs a non-empty 2-D feature matrix")
        if not np.all(np.isfinite(X)):
            raise DataError("dataset contains non-finite feature values")
        if y.shape != (X.shape[0],):
            raise DataError(f"expected {X.shape[0]} labels, got {y.shape}")
        if y.min() < 0 or y.max() >= self.n_classes:
            raise DataError(f"labels must lie in [0, {self.n_classes})")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def N(self) -> int:
        return self.features.shape[1]

    def subset(self, idx) -> "Dataset":
        return Dataset(self.name, self.features[idx], self.labels[idx], self.n_classes,
                       self.feature_names, self.label_mapping)

    def summary(self) -> str:
        return f"n={self.n}, N={self.N}, C={self.n_classes}"


# ---------------------------------------------------------------------------
# CSV


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def _is_number(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def _remap_labels(raw: Sequence[str]):
    uniq = sorted(set(raw))
    if all(_is_number(u) for u in uniq):
        uniq = sorted(uniq, key=float)
    mapping = {u: i for i, u in enumerate(uniq)}
    return np.array([mapping[r] for r in raw], dtype=int), mapping


def load_csv(
    path,
    label_column: int | str = -1,
    delimiter: str = ",",
    header: bool | None = None,
    name: str | None = None,
) -> Dataset:
    """Read a numeric CSV with one label column.

    ``header=None`` auto-detects a header row (a first row with any
    non-numeric feature cell).  Labels are remapped to ``0..C-1`` in sorted
    order; the mapping is kept on the dataset.
    """
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    return _parse_csv(text, label_column, delimiter, header, name or path.stem, str(path))


def _parse_csv(text, label_column, delimiter, header, name, source):
    rows = [r for r in csv.reader(io.StringIO(text), delimiter=delimiter) if r and any(c.strip() for c in r)]
    if not rows:
        raise DataError(f"{source}: empty file")
    width = len(rows[0])
    if isinstance(label_column, str) and not _is_number(label_column):
        header = True if header is None else header
        if not header:
            raise DataError("a named label column needs a header row")
        names = [c.strip() for c in rows[0]]
        if label_column not in names:
            raise DataError(f"{source}: no column named {label_column!r}")
        lab = names.index(label_column)
    else:
        lab = int(label_column) % width
        if header is None:
            header = any(not _is_number(c) for j, c in enumerate(rows[0]) if j != lab)
    feature_names = None
    if header:
        feature_names = tuple(c.strip() for j, c in enumerate(rows[0]) if j != lab)
        rows = rows[1:]
        if not rows:
            raise DataError(f"{source}: no data rows after the header")
    start = 2 if header else 1
    feats, raw_labels = [], []
    for lineno, row in enumerate(rows, start=start):
        if len(row) != width:
            raise DataError(f"{source}: line {lineno} has {len(row)} columns, expected {width}")
        vals = []
        for j, cell in enumerate(row):
            if j == lab:
                continue
            try:
                vals.append(float(cell))
            except ValueError:
                raise DataError(
                    f"{source}: line {lineno}, column {j + 1}: non-numeric value {cell.strip()!r}"
                ) from None
        feats.append(vals)
        raw_labels.append(row[lab].strip())
    labels, mapping = _remap_labels(raw_labels)
    return Dataset(name, np.array(feats, dtype=float), labels, len(mapping), feature_names, mapping)


def write_csv(dataset: Dataset, path) -> None:
    """Write features (17 significant digits) plus a trailing ``label`` column."""
    names = dataset.feature_names or tuple(f"x{j}" for j in range(dataset.N))
    inverse = {v: k for k, v in dataset.label_mapping.items()} if dataset.label_mapping else {}
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(names) + ["label"])
        for row, lab in zip(dataset.features, dataset.labels):
            w.writerow([_fmt(v) for v in row] + [inverse.get(int(lab), str(int(lab)))])


def write_matrix_csv(M: np.ndarray, path, prefix: str = "x") -> None:
    M = np.atleast_2d(M)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"{prefix}{j}" for j in range(M.shape[1])])
        for row in M:
            w.writerow([_fmt(v) for v in row])


def read_matrix_csv(path, header: bool | None = None) -> np.ndarray:
    rows = [r for r in csv.reader(open(path, encoding="utf-8")) if r]
    if not rows:
        raise DataError(f"{path}: empty file")
    if header is None:
        header = any(not _is_number(c) for c in rows[0])
    if header:
        rows = rows[1:]
    try:
        return np.array([[float(c) for c in r] for r in rows], dtype=float)
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from None


# ---------------------------------------------------------------------------
# bundled datasets


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _data_dir() -> Path:
    return Path(str(resources.files("qdimred") / "datasets"))


def manifest() -> dict[str, str]:
    out = {}
    for line in (_data_dir() / "MANIFEST.sha256").read_text().splitlines():
        if line.strip() and not line.startswith("#"):
            digest, fname = line.split()
            out[fname] = digest
    return out


def builtin_path(name: str) -> Path:
    """Location of a bundled dataset; ``QDIMRED_DATA_DIR`` is searched first."""
    if name not in _FILES:
        raise DataError(f"unknown dataset {name!r}; expected one of {BUILTINS}")
    fname = _FILES[name]
    override = os.environ.get("QDIMRED_DATA_DIR")
    candidates = ([Path(override) / fname] if override else []) + [_data_dir() / fname]
    for p in candidates:
        if p.is_file():
            return p
    raise MissingResourceError(
        f"dataset {name!r} not found (looked for {', '.join(str(c) for c in candidates)})"
    )


def load_builtin(name: str, digits: tuple[int, int] = (0, 1)) -> Dataset:
    path = builtin_path(name)
    expected = manifest().get(path.name)
    if expected and path.parent == _data_dir() and sha256_file(path) != expected:
        raise DataError(f"checksum mismatch for bundled {path.name}")
    ds = load_csv(path, label_column="label", name=name)
    if name == "mnist_binary_8x8":
        keep = np.isin(ds.labels, digits)
        labels = np.where(ds.labels[keep] == digits[0], 0, 1)
        ds = Dataset(name, ds.features[keep], labels, 2, ds.feature_names,
                     {str(digits[0]): 0, str(digits[1]): 1})
    return ds


def dataset_checksum(name: str) -> str:
    return sha256_file(builtin_path(name))


# ---------------------------------------------------------------------------
# scaling


@dataclass
class Scaler:
    kind: str = "none"
    low: np.ndarray | None = None
    high: np.ndarray | None = None
    mean: np.ndarray | None = None
    std: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in SCALERS:
            raise DataError(f"unknown scaler {self.kind!r}; expected one of {SCALERS}")

    def fit(self, X: np.ndarray) -> "Scaler":
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.kind == "minmax01":
            self.low, self.high = X.min(axis=0), X.max(axis=0)
        elif self.kind in ("zscore", "zscore_l2"):
            self.mean, self.std = X.mean(axis=0), X.std(axis=0)
        return self

    def transform(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.kind == "none":
            return X.copy()
        if self.kind == "minmax01":
            span = self.high - self.low
            safe = np.where(span > 0, span, 1.0)
            return np.where(span > 0, (X - self.low) / safe, 0.0)
        if self.kind == "l2_rows":
            return _l2_rows(X)
        safe = np.where(self.std > 0, self.std, 1.0)
        Z = np.where(self.std > 0, (X - self.mean) / safe, 0.0)
        return _l2_rows(Z) if self.kind == "zscore_l2" else Z

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        for key in ("low", "high", "mean", "std"):
            v = getattr(self, key)
            if v is not None:
                d[key] = np.asarray(v).tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Scaler":
        kw = {k: np.asarray(d[k], dtype=float) for k in ("low", "high", "mean", "std") if k in d}
        return cls(d["kind"], **kw)


def _l2_rows(X):
    norms = np.linalg.norm(X, axis=1, keepdims=True)
    if np.any(norms == 0):
        raise DataError("cannot l2-normalize a zero row")
    return X / norms


def scale_fit_transform(kind: str, train: np.ndarray, *evals: np.ndarray):
    """Fit on ``train`` and transform it plus any evaluation splits.

    Returns ``(train_scaled, [eval_scaled...], scaler)``.
    """
    train = np.atleast_2d(np.asarray(train, dtype=float))
    for e in evals:
        if np.atleast_2d(e).shape[1] != train.shape[1]:
            raise DataError("train and evaluation widths differ")
    scaler = Scaler(kind).fit(train)
    return scaler.transform(train), [scaler.transform(e) for e in evals], scaler


# ---------------------------------------------------------------------------
# splitting


def train_test_split(dataset: Dataset, test_fraction: float = 0.3, seed: int = 0,
                     stratified: bool = True) -> tuple[Dataset, Dataset]:
    if not 0 < test_fraction < 1:
        raise DataError(f"test fraction must lie in (0, 1), got {test_fraction}")
    rng = np.random.default_rng(seed)
    if stratified:
        test = []
        for c in range(dataset.n_classes):
            members = np.flatnonzero(dataset.labels == c)
            if len(members) == 0:
                continue
            if len(members) < 2:
                raise DataError(f"class {c} has {len(members)} sample(s); stratified split needs 2")
            k = min(max(1, int(round(test_fraction * len(members)))), len(members) - 1)
            test.extend(rng.permutation(members)[:k].tolist())
        test_idx = np.sort(np.array(test, dtype=int))
    else:
        k = int(round(test_fraction * dataset.n))
        if not 0 < k < dataset.n:
            raise DataError(f"cannot split {dataset.n} samples with fraction {test_fraction}")
        test_idx = np.sort(rng.permutation(dataset.n)[:k])
    mask = np.zeros(dataset.n, dtype=bool)
    mask[test_idx] = True
    return dataset.subset(np.flatnonzero(~mask)), dataset.subset(test_idx)
