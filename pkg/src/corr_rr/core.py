"""Shared types, errors, seeding and dataset I/O."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

MarginalTable = list  # list[np.ndarray], one frequency vector per attribute
RngStream = np.random.Generator


class CorrRRError(ValueError):
    """Base class for every error raised by this package."""


class ShapeError(CorrRRError):
    pass


class DomainViolation(CorrRRError):
    def __init__(self, row: int, col: int, value=None, size=None):
        self.row, self.col = row, col
        msg = f"value at row {row}, column {col} is outside its domain"
        if value is not None:
            msg += f" ({value} not in 0..{size - 1})"
        super().__init__(msg)


class InvalidDomain(CorrRRError):
    pass


class InvalidBudget(CorrRRError):
    pass


class CountMismatch(CorrRRError):
    pass


class PriorShapeError(CorrRRError):
    pass


class HeterogeneousDomains(CorrRRError):
    pass


class TooLarge(CorrRRError):
    pass


class EmptyPhase(CorrRRError):
    pass


class SplitError(CorrRRError):
    pass


def check_epsilon(epsilon: float) -> float:
    epsilon = float(epsilon)
    if not math.isfinite(epsilon) or epsilon <= 0:
        raise InvalidBudget(f"epsilon must be positive and finite, got {epsilon}")
    return epsilon


def check_domain_size(k: int) -> int:
    if int(k) != k or k < 2:
        raise InvalidDomain(f"domain size must be an integer >= 2, got {k}")
    return int(k)


def rng_stream(master_seed: int, *key: int) -> RngStream:
    """Return an independent generator for ``(master_seed, *key)``.

    Equal arguments give identical draw sequences; distinct keys give
    statistically independent streams (``SeedSequence`` spawn keys).
    """
    seq = np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(x) for x in key))
    return np.random.default_rng(seq)


@dataclass(frozen=True, eq=False)
class Dataset:
    """n integer-coded records over d categorical attributes.

    ``records`` is an (n, d) integer array; attribute ``j`` takes values in
    ``0..domains[j]-1``. The array is made read-only on construction.
    """

    records: np.ndarray
    domains: tuple

    def __post_init__(self):
        validate_dataset(self)
        arr = np.array(self.records, dtype=np.int64)
        arr.setflags(write=False)
        object.__setattr__(self, "records", arr)
        object.__setattr__(self, "domains", tuple(int(k) for k in self.domains))

    @property
    def n(self) -> int:
        return self.records.shape[0]

    @property
    def d(self) -> int:
        return self.records.shape[1]

    @property
    def uniform_k(self) -> int | None:
        """The common domain size, or None when domains differ."""
        ks = set(self.domains)
        return ks.pop() if len(ks) == 1 else None


def validate_dataset(dataset: Dataset) -> None:
    """Raise unless every Dataset invariant holds."""
    domains = list(dataset.domains)
    records = dataset.records
    if len(domains) < 1:
        raise ShapeError("at least one attribute is required")
    for j, k in enumerate(domains):
        try:
            check_domain_size(k)
        except InvalidDomain as exc:
            raise InvalidDomain(f"attribute {j}: {exc}") from None
    if isinstance(records, np.ndarray):
        if records.ndim != 2 or records.shape[1] != len(domains):
            raise ShapeError(f"records must have shape (n, {len(domains)}), got {records.shape}")
        arr = records
    else:
        rows = list(records)
        for i, row in enumerate(rows):
            if len(row) != len(domains):
                raise ShapeError(f"row {i} has {len(row)} entries, expected {len(domains)}")
        arr = np.array(rows, dtype=np.int64).reshape(len(rows), len(domains))
    if arr.shape[0] < 1:
        raise ShapeError("dataset has no records")
    if not np.issubdtype(arr.dtype, np.integer):
        if not np.all(np.equal(np.mod(arr, 1), 0)):
            raise ShapeError("attribute values must be integer codes")
    bad = (arr < 0) | (arr >= np.asarray(domains)[None, :])
    if bad.any():
        i, j = map(int, np.argwhere(bad)[0])
        raise DomainViolation(i, j, int(arr[i, j]), domains[j])


def clamp_normalize(table: Sequence[np.ndarray]) -> MarginalTable:
    """Clip each row to [0, 1] and rescale it to sum to one.

    A row that clips to all zeros becomes uniform. Already-normalized rows
    come back unchanged.
    """
    out = []
    for row in table:
        row = np.asarray(row, dtype=float)
        if np.all((row >= 0) & (row <= 1)) and abs(row.sum() - 1.0) <= 1e-9:
            out.append(row.copy())
            continue
        clipped = np.clip(row, 0.0, 1.0)
        total = clipped.sum()
        if total <= 0:
            out.append(np.full(row.shape, 1.0 / row.size))
        else:
            out.append(clipped / total)
    return out


def is_normalized(table: Sequence[np.ndarray], atol: float = 1e-9) -> bool:
    return all(
        np.all((np.asarray(r) >= 0) & (np.asarray(r) <= 1)) and abs(np.sum(r) - 1.0) <= atol
        for r in table
    )


def true_marginals(dataset: Dataset) -> MarginalTable:
    """Exact per-attribute value frequencies of ``dataset``."""
    return [
        np.bincount(dataset.records[:, j], minlength=k) / dataset.n
        for j, k in enumerate(dataset.domains)
    ]


def metadata_path(csv_path: str | Path) -> Path:
    return Path(csv_path).with_suffix(".json")


def save_dataset(dataset: Dataset, path: str | Path, metadata: dict | None = None) -> Path:
    """Write ``attr_0..attr_{d-1}`` CSV plus a JSON sidecar; return the sidecar path."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([f"attr_{j}" for j in range(dataset.d)])
        writer.writerows(dataset.records.tolist())
    meta = dict(metadata or {})
    meta.setdefault("n", dataset.n)
    meta.setdefault("d", dataset.d)
    meta["domains"] = list(dataset.domains)
    side = metadata_path(path)
    side.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return side


def load_dataset(path: str | Path) -> tuple[Dataset, dict]:
    """Read a CSV written by :func:`save_dataset` (sidecar optional)."""
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ShapeError(f"{path} is empty")
    header, body = rows[0], rows[1:]
    records = np.array([[int(v) for v in r] for r in body], dtype=np.int64).reshape(len(body), len(header))
    side = metadata_path(path)
    meta = json.loads(side.read_text()) if side.exists() else {}
    domains = meta.get("domains")
    if domains is None:
        k = max(2, int(records.max()) + 1) if records.size else 2
        domains = [k] * len(header)
    return Dataset(records, tuple(domains)), meta
