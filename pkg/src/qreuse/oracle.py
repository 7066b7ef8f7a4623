"""The unreliable learning oracle.

The oracle entangles the answer register with the class of the data:
``|X_tau>|0> -> |X_tau>(sqrt(l+)|tau> + sqrt(l-)|tau^1>)`` with
``l+- = (1 +- L)/2``.  Its matrix acts on ``answer (x) data``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dataset import ClassBasis, QueryCounter
from .errors import DomainError, PreconditionError
from .statevec import DenseOperator, StateVector, apply, born_probabilities, settings

ANSWER_REGISTER = 1
DATA_REGISTER = 2


def lambdas(reliability: float) -> tuple[float, float]:
    """``((1+L)/2, (1-L)/2)`` for reliability ``L`` in ``[0, 1]``."""
    L = float(reliability)
    if not (0.0 <= L <= 1.0) or math.isnan(L):
        raise DomainError(f"reliability must lie in [0, 1], got {reliability!r}")
    return (1.0 + L) / 2.0, (1.0 - L) / 2.0


@dataclass(frozen=True)
class OracleConfig:
    reliability: float

    def __post_init__(self) -> None:
        lambdas(self.reliability)

    @property
    def lambda_plus(self) -> float:
        return lambdas(self.reliability)[0]

    @property
    def lambda_minus(self) -> float:
        return lambdas(self.reliability)[1]


def answer_unitary(cfg: OracleConfig, tau: int) -> np.ndarray:
    """2x2 answer-register unitary used on class ``tau``.

    Column 0 is ``sqrt(l+)|tau> + sqrt(l-)|tau^1>``; column 1 completes it
    to a unitary.  Only column 0 is ever exercised.
    """
    c, s = math.sqrt(cfg.lambda_plus), math.sqrt(cfg.lambda_minus)
    rot = np.array([[c, -s], [s, c]], dtype=np.complex128)
    if tau:
        rot = np.array([[0, 1], [1, 0]], dtype=np.complex128) @ rot
    return rot


def build_oracle(cfg: OracleConfig, basis: ClassBasis) -> DenseOperator:
    """Oracle as a unitary on ``answer (x) data``, block diagonal over the classes."""
    mat = np.zeros((2 * basis.dim, 2 * basis.dim), dtype=np.complex128)
    for tau in (0, 1):
        mat += np.kron(answer_unitary(cfg, tau), basis.projectors[tau])
    return DenseOperator(mat)


def apply_oracle(state: StateVector, op: DenseOperator,
                 counter: QueryCounter | None = None) -> StateVector:
    """Query the oracle on a ``[beta, alpha, data]`` state whose answer is ``|0>``."""
    if state.n_registers != 3 or state.dims[ANSWER_REGISTER] != 2:
        raise PreconditionError(f"expected [beta, alpha, data] registers, got dims {state.dims}")
    p_answer = born_probabilities(state, ANSWER_REGISTER)
    if abs(p_answer[0] - 1.0) > settings.tol:
        raise PreconditionError("answer register must be prepared in |0> before a query")
    out = apply(op, state, [ANSWER_REGISTER, DATA_REGISTER])
    if counter is not None:
        counter.tick()
    return out
