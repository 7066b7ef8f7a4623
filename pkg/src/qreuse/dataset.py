"""Concept datasets, the class partition they induce, and qRAM initialization."""

from __future__ import annotations

import csv
import enum
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import DatasetError
from .statevec import StateVector


class Mode(str, enum.Enum):
    FULL = "full"
    REDUCED = "reduced"


class DatasetWarning(UserWarning):
    pass


@dataclass(frozen=True)
class ConceptDataset:
    """Binary concept over ``N`` inputs with a sampling distribution.

    ``labels[i]`` is the class of input ``i`` and ``weights[i]`` its
    probability ``D(x_i)``.  Inputs are indexed ``0 .. N-1``.
    """

    n_bits: int
    labels: tuple[int, ...]
    weights: tuple[float, ...]

    def __post_init__(self) -> None:
        labels = tuple(int(v) for v in self.labels)
        weights = tuple(float(w) for w in self.weights)
        if self.n_bits < 1:
            raise DatasetError("n_bits must be positive")
        if not labels:
            raise DatasetError("dataset must contain at least one input")
        if len(labels) != len(weights):
            raise DatasetError("every input needs exactly one label and one weight")
        if len(labels) > 2**self.n_bits:
            raise DatasetError(f"{len(labels)} inputs do not fit in {self.n_bits}-bit strings")
        if any(v not in (0, 1) for v in labels):
            raise DatasetError("labels must be 0 or 1")
        if any(not math.isfinite(w) or w < 0 for w in weights):
            raise DatasetError("weights must be finite and non-negative")
        total = math.fsum(weights)
        if abs(total - 1.0) > 1e-12:
            raise DatasetError(f"weights sum to {total!r}, expected 1")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "weights", weights)

    @property
    def size(self) -> int:
        return len(self.labels)

    @classmethod
    def from_mapping(cls, labels: Mapping[int, int], weights: Mapping[int, float],
                     n_bits: int | None = None, renormalize: bool = True) -> "ConceptDataset":
        n = len(labels)
        if set(labels) != set(range(n)) or set(weights) != set(range(n)):
            raise DatasetError("indices must be exactly 0..N-1 for both labels and weights")
        w = np.array([float(weights[i]) for i in range(n)])
        if renormalize:
            w = _renormalize(w)
        bits = n_bits if n_bits is not None else max(1, (n - 1).bit_length())
        return cls(bits, tuple(labels[i] for i in range(n)), tuple(w))

    @classmethod
    def from_xi0(cls, xi0: float, n_bits: int = 2) -> "ConceptDataset":
        """Synthetic dataset: first half of the ``2**n_bits`` inputs in class 0.

        Weight inside each class is uniform, so the class-0 mass is ``xi0``.
        """
        if not 0.0 <= xi0 <= 1.0:
            raise DatasetError(f"xi0={xi0} outside [0, 1]")
        n = 2**n_bits
        half = n // 2
        labels = (0,) * half + (1,) * (n - half)
        weights = (xi0 / half,) * half + ((1.0 - xi0) / (n - half),) * (n - half)
        return cls(n_bits, labels, tuple(_renormalize(np.array(weights))))

    @classmethod
    def load(cls, path: str | Path, n_bits: int | None = None) -> "ConceptDataset":
        """Read an ``index,label,weight`` CSV file with a header line."""
        labels: dict[int, int] = {}
        weights: dict[int, float] = {}
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [h.strip().lower() for h in header] != ["index", "label", "weight"]:
                raise DatasetError(f"{path}: expected header 'index,label,weight'")
            for lineno, row in enumerate(reader, start=2):
                if not row or all(not c.strip() for c in row):
                    continue
                if len(row) != 3:
                    raise DatasetError(f"{path}:{lineno}: expected 3 fields, got {len(row)}")
                try:
                    i, lab, w = int(row[0]), int(row[1]), float(row[2])
                except ValueError as exc:
                    raise DatasetError(f"{path}:{lineno}: {exc}") from None
                if i in labels:
                    raise DatasetError(f"{path}:{lineno}: duplicate index {i}")
                labels[i] = lab
                weights[i] = w
        if not labels:
            raise DatasetError(f"{path}: no data rows")
        return cls.from_mapping(labels, weights, n_bits=n_bits)

    def dump(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["index", "label", "weight"])
            for i, (lab, w) in enumerate(zip(self.labels, self.weights)):
                writer.writerow([i, lab, repr(w)])


def _renormalize(w: np.ndarray) -> np.ndarray:
    if np.any(~np.isfinite(w)) or np.any(w < 0):
        raise DatasetError("weights must be finite and non-negative")
    total = math.fsum(w)
    if not total > 0:
        raise DatasetError("dataset has zero total weight")
    if abs(total - 1.0) > 1e-9:
        warnings.warn(f"dataset weights sum to {total:.12g}; renormalizing", DatasetWarning,
                      stacklevel=3)
    return w / total


@dataclass(frozen=True)
class Partition:
    """Split of the inputs by concept value and the class masses ``xi``."""

    xi0: float
    xi1: float
    members0: frozenset[int]
    members1: frozenset[int]

    @property
    def xi(self) -> tuple[float, float]:
        return (self.xi0, self.xi1)

    def members(self, tau: int) -> frozenset[int]:
        return self.members1 if tau else self.members0


def partition(ds: ConceptDataset) -> Partition:
    m0 = frozenset(i for i, v in enumerate(ds.labels) if v == 0)
    m1 = frozenset(i for i, v in enumerate(ds.labels) if v == 1)
    xi0 = math.fsum(ds.weights[i] for i in sorted(m0))
    xi1 = math.fsum(ds.weights[i] for i in sorted(m1))
    # absorb rounding so xi0 + xi1 == 1 to machine precision
    total = xi0 + xi1
    return Partition(xi0 / total, xi1 / total, m0, m1)


@dataclass
class QueryCounter:
    """Monotone counter of initialization (or oracle) calls."""

    queries: int = field(default=0)

    def tick(self) -> None:
        self.queries += 1


QramCounter = QueryCounter


def class_state(ds: ConceptDataset, tau: int) -> np.ndarray:
    """Normalized ``|X_tau>`` in the full ``N``-dimensional data register.

    A class with members but zero mass gets the uniform superposition of
    its members; an empty class yields the zero vector.
    """
    members = [i for i, v in enumerate(ds.labels) if v == tau]
    vec = np.zeros(ds.size, dtype=np.complex128)
    if not members:
        return vec
    w = np.array([ds.weights[i] for i in members])
    if w.sum() > 0:
        vec[members] = np.sqrt(w / w.sum())
    else:
        vec[members] = 1.0 / np.sqrt(len(members))
    return vec


def qram_init(ds: ConceptDataset, counter: QueryCounter | None = None,
              mode: Mode | str = Mode.REDUCED) -> StateVector:
    """Prepare the input superposition; one call is one qRAM query.

    ``full`` gives ``sum_i sqrt(D_i)|i>`` on ``N`` levels; ``reduced`` gives
    ``sqrt(xi0)|X0> + sqrt(xi1)|X1>`` on two levels.
    """
    mode = Mode(mode)
    w = np.asarray(ds.weights)
    if not w.sum() > 0:
        raise DatasetError("zero-weight dataset")
    if mode is Mode.FULL:
        amps = np.sqrt(w)
    else:
        part = partition(ds)
        amps = np.sqrt(np.array([part.xi0, part.xi1]))
    amps = amps / np.linalg.norm(amps)
    state = StateVector((amps.size,), amps)
    if counter is not None:
        counter.tick()
    return state


@dataclass(frozen=True, eq=False)
class ClassBasis:
    """Class projectors and class states of the data register for one mode."""

    mode: Mode
    dim: int
    projectors: tuple[np.ndarray, np.ndarray]
    states: tuple[np.ndarray, np.ndarray]

    def present(self, tau: int) -> bool:
        return bool(np.any(self.states[tau]))


def class_basis(ds: ConceptDataset, mode: Mode | str = Mode.REDUCED) -> ClassBasis:
    mode = Mode(mode)
    if mode is Mode.REDUCED:
        eye = np.eye(2, dtype=np.complex128)
        return ClassBasis(mode, 2, (np.diag([1.0, 0.0]).astype(complex),
                                    np.diag([0.0, 1.0]).astype(complex)), (eye[0], eye[1]))
    labels = np.asarray(ds.labels)
    projs = tuple(np.diag((labels == tau).astype(float)).astype(complex) for tau in (0, 1))
    return ClassBasis(mode, ds.size, projs, (class_state(ds, 0), class_state(ds, 1)))
