"""Dense statevector engine.

States are immutable vectors over an ordered list of registers.  The
protocol uses the fixed ordering ``[ancilla beta, answer alpha, data]``;
register ``0`` is the leftmost (most significant) factor of the tensor
product, matching ``numpy.kron`` ordering.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    CapacityError,
    DimensionError,
    InvalidStateError,
    NonUnitaryError,
)

DEFAULT_MAX_DIM = 2**20


@dataclass
class EngineSettings:
    """Global numerical settings; mutate ``settings`` to override."""

    tol: float = 1e-10
    max_dim: int = field(
        default_factory=lambda: int(os.environ.get("QREUSE_MAX_DIM", DEFAULT_MAX_DIM))
    )


settings = EngineSettings()


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=np.complex128, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class StateVector:
    """Normalized pure state over registers of dimensions ``dims``."""

    dims: tuple[int, ...]
    amps: np.ndarray

    def __post_init__(self) -> None:
        dims = tuple(int(d) for d in self.dims)
        if not dims or any(d < 1 for d in dims):
            raise DimensionError(f"register dimensions must be positive, got {dims}")
        amps = _frozen(np.ravel(self.amps))
        if amps.size != math.prod(dims):
            raise DimensionError(
                f"{amps.size} amplitudes do not match dims {dims} (product {math.prod(dims)})"
            )
        # NaN/inf anywhere propagates into the squared norm
        sq = np.vdot(amps, amps).real
        if not math.isfinite(sq):
            raise InvalidStateError("amplitudes must be finite")
        norm = math.sqrt(sq)
        if abs(norm - 1.0) > settings.tol:
            raise InvalidStateError(f"state norm {norm!r} differs from 1 by more than {settings.tol}")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "amps", amps)

    @classmethod
    def from_amplitudes(cls, amps: Iterable[complex], dims: Sequence[int] | None = None,
                        normalize: bool = False) -> "StateVector":
        vec = np.asarray(list(amps) if not isinstance(amps, np.ndarray) else amps,
                         dtype=np.complex128).ravel()
        if normalize:
            norm = np.linalg.norm(vec)
            if norm == 0 or not np.isfinite(norm):
                raise InvalidStateError("cannot normalize a zero or non-finite vector")
            vec = vec / norm
        return cls(tuple(dims) if dims is not None else (vec.size,), vec)

    @classmethod
    def basis(cls, index: int, dim: int) -> "StateVector":
        if not 0 <= index < dim:
            raise DimensionError(f"basis index {index} outside [0, {dim})")
        vec = np.zeros(dim, dtype=np.complex128)
        vec[index] = 1.0
        return cls((dim,), vec)

    @property
    def dim(self) -> int:
        return self.amps.size

    @property
    def n_registers(self) -> int:
        return len(self.dims)

    def tensor_view(self) -> np.ndarray:
        return self.amps.reshape(self.dims)

    def __repr__(self) -> str:
        return f"StateVector(dims={self.dims}, amps={np.array2string(self.amps, precision=5)})"


@dataclass(frozen=True, eq=False)
class DenseOperator:
    """Dense complex matrix acting on one or more registers."""

    matrix: np.ndarray

    def __post_init__(self) -> None:
        mat = _frozen(self.matrix)
        if mat.ndim != 2:
            raise DimensionError("operator matrix must be two-dimensional")
        object.__setattr__(self, "matrix", mat)

    @property
    def dim_in(self) -> int:
        return self.matrix.shape[1]

    @property
    def dim_out(self) -> int:
        return self.matrix.shape[0]

    @cached_property
    def isometry_defect(self) -> float:
        """Max-entry deviation of ``M^dagger M`` from the identity."""
        gram = self.matrix.conj().T @ self.matrix
        return float(np.max(np.abs(gram - np.eye(self.dim_in))))

    def is_unitary(self, tol: float | None = None) -> bool:
        tol = settings.tol if tol is None else tol
        return self.dim_in == self.dim_out and self.isometry_defect <= tol

    @property
    def dagger(self) -> "DenseOperator":
        return DenseOperator(self.matrix.conj().T)

    def __matmul__(self, other: "DenseOperator") -> "DenseOperator":
        return DenseOperator(self.matrix @ other.matrix)


@dataclass(frozen=True)
class MeasurementResult:
    outcome: int
    probability: float
    post_state: StateVector


def identity(dim: int) -> DenseOperator:
    return DenseOperator(np.eye(dim))


def kron(*ops: DenseOperator | np.ndarray) -> DenseOperator:
    out = np.eye(1, dtype=np.complex128)
    for op in ops:
        out = np.kron(out, op.matrix if isinstance(op, DenseOperator) else op)
    return DenseOperator(out)


def tensor(a: StateVector, b: StateVector) -> StateVector:
    """Product state ``a (x) b``; registers of ``b`` follow those of ``a``."""
    size = a.dim * b.dim
    if size > settings.max_dim:
        raise CapacityError(f"tensor product dimension {size} exceeds max_dim={settings.max_dim}")
    amps = np.outer(a.amps, b.amps).ravel()
    # products of unit vectors drift by ~1 ulp; snap back
    amps = amps / math.sqrt(np.vdot(amps, amps).real)
    return StateVector(a.dims + b.dims, amps)


def _check_register(state: StateVector, register: int) -> None:
    if not 0 <= register < state.n_registers:
        raise DimensionError(f"register {register} out of range for dims {state.dims}")


def apply(op: DenseOperator, state: StateVector, targets: Sequence[int],
          strict: bool = True) -> StateVector:
    """Apply ``op`` to ``targets`` (in the listed order) and identity elsewhere.

    With ``strict`` the operator must be unitary up to ``settings.tol``.
    Without it the check is skipped, but the result must still be
    normalized or :class:`InvalidStateError` is raised.
    """
    targets = list(targets)
    for t in targets:
        _check_register(state, t)
    if len(set(targets)) != len(targets):
        raise DimensionError(f"duplicate target registers {targets}")
    tdims = [state.dims[t] for t in targets]
    tdim = math.prod(tdims)
    if op.dim_in != tdim or op.dim_out != tdim:
        raise DimensionError(
            f"operator is {op.dim_out}x{op.dim_in} but target registers {targets} span {tdim}"
        )
    if strict and not op.is_unitary():
        raise NonUnitaryError(f"operator deviates from unitarity by {op.isometry_defect:.3e}")

    k = len(targets)
    psi = np.moveaxis(state.tensor_view(), targets, list(range(k)))
    rest_shape = psi.shape[k:]
    out = op.matrix @ psi.reshape(tdim, -1)
    out = np.moveaxis(out.reshape(tuple(tdims) + rest_shape), list(range(k)), targets)
    return StateVector(state.dims, out.ravel())


def born_probabilities(state: StateVector, register: int) -> np.ndarray:
    """Marginal outcome distribution of a computational-basis measurement."""
    _check_register(state, register)
    weights = np.abs(state.tensor_view()) ** 2
    axes = tuple(i for i in range(state.n_registers) if i != register)
    return weights.sum(axis=axes)


def project(state: StateVector, register: int, outcome: int) -> tuple[float, StateVector]:
    """Project ``register`` onto ``|outcome>``; return (Born weight, renormalized state)."""
    _check_register(state, register)
    if not 0 <= outcome < state.dims[register]:
        raise DimensionError(f"outcome {outcome} outside register of dim {state.dims[register]}")
    psi = state.tensor_view()
    proj = np.zeros_like(psi)
    index = [slice(None)] * state.n_registers
    index[register] = outcome
    proj[tuple(index)] = psi[tuple(index)]
    weight = float(np.vdot(proj, proj).real)
    if weight <= 0.0:
        raise InvalidStateError(f"outcome {outcome} on register {register} has zero probability")
    return weight, StateVector(state.dims, proj.ravel() / np.sqrt(weight))


def measure(state: StateVector, register: int, rng: np.random.Generator) -> MeasurementResult:
    """Projective computational-basis measurement with collapse.

    Consumes exactly one uniform draw from ``rng``.
    """
    probs = born_probabilities(state, register)
    total = probs.sum()
    if not total > 0:
        raise InvalidStateError("all-zero marginal")
    cdf = np.cumsum(probs / total)
    u = rng.random()
    outcome = int(np.searchsorted(cdf, u, side="right"))
    if outcome >= probs.size:
        outcome = int(np.flatnonzero(probs)[-1])
    weight, post = project(state, register, outcome)
    return MeasurementResult(outcome, weight, post)


def conditional_state(state: StateVector, fixed: dict[int, int]) -> StateVector:
    """State of the remaining registers given basis values of ``fixed``.

    Intended for product states such as ``|b>|a>|phi>`` after collapse;
    the extracted component is renormalized.
    """
    index: list = [slice(None)] * state.n_registers
    for reg, val in fixed.items():
        _check_register(state, reg)
        index[reg] = val
    sub = state.tensor_view()[tuple(index)]
    norm = np.linalg.norm(sub)
    if norm == 0:
        raise InvalidStateError(f"component {fixed} is empty")
    dims = tuple(d for i, d in enumerate(state.dims) if i not in fixed)
    return StateVector(dims, sub.ravel() / norm)


def fidelity(a: StateVector, b: StateVector) -> float:
    """``|<a|b>|^2``."""
    if a.dims != b.dims:
        raise DimensionError(f"cannot compare states with dims {a.dims} and {b.dims}")
    return float(abs(np.vdot(a.amps, b.amps)) ** 2)
