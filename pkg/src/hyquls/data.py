"""Datasets: CSV ingestion, synthetic blobs and unit-ball scaling."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class DataError(ValueError):
    """Raised for malformed or invalid datasets."""


class MalformedRow(DataError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line


class InvalidLabel(DataError):
    def __init__(self, line: int, value: str):
        super().__init__(f"line {line}: label {value!r} is not -1 or +1")
        self.line = line
        self.value = value


@dataclass(frozen=True, eq=False)
class Dataset:
    """Feature matrix (M samples x N features) with +-1 labels."""

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        x = np.array(self.features, dtype=float)
        y = np.array(self.labels, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if x.ndim != 2:
            raise DataError("features must be a 2-D array")
        if y.shape != (x.shape[0],):
            raise DataError(f"expected {x.shape[0]} labels, got shape {y.shape}")
        if x.shape[0] < 2 or x.shape[1] < 1:
            raise DataError(f"need M >= 2 and N >= 1, got {x.shape}")
        if not np.all(np.isfinite(x)):
            raise DataError("features contain non-finite values")
        if not np.all(np.isin(y, (-1.0, 1.0))):
            raise DataError("labels must be -1 or +1")
        x.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "labels", y)

    @property
    def m(self) -> int:
        return self.features.shape[0]

    @property
    def n(self) -> int:
        return self.features.shape[1]

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.features.shape == other.features.shape
            and np.array_equal(self.features, other.features)
            and np.array_equal(self.labels, other.labels)
        )

    __hash__ = None


@dataclass(frozen=True)
class ScalingReport:
    shift: tuple[float, ...]
    scale: tuple[float, ...]
    global_scale: float
    max_row_norm: float
    degenerate: bool = False


def _parse_label(text: str, line: int) -> float:
    s = text.strip().replace("−", "-")
    try:
        v = float(s)
    except ValueError:
        raise InvalidLabel(line, text) from None
    if v not in (-1.0, 1.0):
        raise InvalidLabel(line, text)
    return v


def _is_numeric(cells) -> bool:
    try:
        for c in cells:
            float(c.strip().replace("−", "-"))
    except ValueError:
        return False
    return True


def parse_csv(text: str, label_column: int = -1) -> Dataset:
    rows = [(i + 1, r) for i, r in enumerate(csv.reader(io.StringIO(text))) if r]
    if rows and not _is_numeric(rows[0][1]):
        rows = rows[1:]
    if not rows:
        raise DataError("empty file")
    width = len(rows[0][1])
    if width < 2:
        raise MalformedRow(rows[0][0], "need at least one feature and a label")
    col = label_column % width if -width <= label_column < width else None
    if col is None:
        raise DataError(f"label column {label_column} out of range for {width} columns")
    feats, labels = [], []
    for line, row in rows:
        if len(row) != width:
            raise MalformedRow(line, f"expected {width} fields, got {len(row)}")
        labels.append(_parse_label(row[col], line))
        try:
            feats.append([float(c.replace("−", "-")) for j, c in enumerate(row) if j != col])
        except ValueError as exc:
            raise MalformedRow(line, str(exc)) from None
    if len(feats) < 2:
        raise DataError("need at least two samples")
    return Dataset(np.array(feats), np.array(labels))


def load_csv(path, label_column: int = -1) -> Dataset:
    """Read a dataset; the label column defaults to the last one."""
    return parse_csv(Path(path).read_text(encoding="utf-8"), label_column)


def format_csv(dataset: Dataset) -> str:
    """Serialize with the label last and 17 significant digits."""
    out = io.StringIO()
    for x, y in zip(dataset.features, dataset.labels):
        cells = [format(float(v), ".17g") for v in x]
        cells.append("1" if y > 0 else "-1")
        out.write(",".join(cells) + "\n")
    return out.getvalue()


def save_csv(dataset: Dataset, path) -> None:
    Path(path).write_text(format_csv(dataset), encoding="utf-8")


def generate_blobs(m_per_class: int, n: int, separation: float, seed: int) -> Dataset:
    """Two unit-variance Gaussian clusters centred at +-(separation/2) e1.

    The +1 cluster comes first.
    """
    if m_per_class < 1 or n < 1:
        raise ValueError("m_per_class and n must be >= 1")
    if not separation > 0:
        raise ValueError("separation must be positive")
    rng = np.random.default_rng(seed)
    centre = np.zeros(n)
    centre[0] = separation / 2
    pos = centre + rng.standard_normal((m_per_class, n))
    neg = -centre + rng.standard_normal((m_per_class, n))
    labels = np.concatenate([np.ones(m_per_class), -np.ones(m_per_class)])
    return Dataset(np.vstack([pos, neg]), labels)


def scale_to_unit_ball(dataset: Dataset) -> tuple[Dataset, ScalingReport]:
    """Shrink all rows by one global factor so that every row norm is <= 1.

    Data already inside the unit ball is returned untouched, which makes the
    operation idempotent.
    """
    x = dataset.features
    norms = np.linalg.norm(x, axis=1)
    peak = float(norms.max())
    n = dataset.n
    if peak == 0.0:
        report = ScalingReport((0.0,) * n, (1.0,) * n, 1.0, 0.0, degenerate=True)
        return dataset, report
    if peak <= 1.0:
        return dataset, ScalingReport((0.0,) * n, (1.0,) * n, 1.0, peak)
    scale = 1.0 / peak
    scaled = x * scale
    # rounding can leave a norm a few ulps above one
    while np.linalg.norm(scaled, axis=1).max() > 1.0:
        scale = np.nextafter(scale, 0.0)
        scaled = x * scale
    new_peak = float(np.linalg.norm(scaled, axis=1).max())
    report = ScalingReport((0.0,) * n, (scale,) * n, scale, new_peak)
    return Dataset(scaled, dataset.labels), report
