"""Answer read-out and state recovery.

Reading the answer register after the oracle acts on the data as one of
two Kraus operators.  A conditional unitary on ``ancilla (x) data``
followed by a measurement of the ancilla then either certifies the answer
(outcomes agree) or returns the data register exactly to the initial
superposition (outcomes disagree).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .dataset import ClassBasis, Partition
from .errors import DimensionError, PreconditionError
from .oracle import ANSWER_REGISTER, DATA_REGISTER, OracleConfig
from .statevec import (
    DenseOperator,
    StateVector,
    apply,
    born_probabilities,
    conditional_state,
    measure,
    settings,
)

ANCILLA_REGISTER = 0

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
EYE2 = np.eye(2, dtype=np.complex128)
P0 = np.diag([1.0, 0.0]).astype(np.complex128)
P1 = np.diag([0.0, 1.0]).astype(np.complex128)


class OutcomeKind(str, enum.Enum):
    EXTRACTED = "extracted"
    RECOVERED = "recovered"


@dataclass(frozen=True)
class KrausPair:
    a0: DenseOperator
    a1: DenseOperator

    def __getitem__(self, m: int) -> DenseOperator:
        return (self.a0, self.a1)[m]

    def completeness_defect(self) -> float:
        total = sum(a.matrix.conj().T @ a.matrix for a in (self.a0, self.a1))
        return float(np.max(np.abs(total - np.eye(total.shape[0]))))


@dataclass(frozen=True)
class AlphaResult:
    m_alpha: int
    probability: float
    phi: StateVector
    state: StateVector


@dataclass(frozen=True)
class RecoverySetup:
    theta: float
    u0: DenseOperator
    u1: DenseOperator

    def __getitem__(self, m: int) -> DenseOperator:
        return (self.u0, self.u1)[m]


@dataclass(frozen=True)
class BetaResult:
    m_beta: int
    m_alpha: int
    probability: float
    post: StateVector
    state: StateVector

    @property
    def consistent(self) -> bool:
        return self.m_beta == self.m_alpha

    @property
    def kind(self) -> OutcomeKind:
        return OutcomeKind.EXTRACTED if self.consistent else OutcomeKind.RECOVERED

    @property
    def answer(self) -> int | None:
        return self.m_alpha if self.consistent else None


def kraus_pair(cfg: OracleConfig, basis: ClassBasis) -> KrausPair:
    """``A_m = sum_tau sqrt(l(m, tau)) Pi_tau`` with ``l = l+`` when ``m == tau``."""
    lp, lm = math.sqrt(cfg.lambda_plus), math.sqrt(cfg.lambda_minus)
    pi0, pi1 = basis.projectors
    return KrausPair(DenseOperator(lp * pi0 + lm * pi1), DenseOperator(lm * pi0 + lp * pi1))


def apply_kraus(kraus: KrausPair, m_alpha: int, psi0: StateVector) -> tuple[float, StateVector]:
    """Return ``(P_m, phi_m)`` with ``A_m|psi0> = sqrt(P_m)|phi_m>``."""
    vec = kraus[m_alpha].matrix @ psi0.amps
    p = float(np.vdot(vec, vec).real)
    return p, StateVector(psi0.dims, vec / math.sqrt(p))


def alpha_probabilities(cfg: OracleConfig, part: Partition) -> tuple[float, float]:
    """Closed-form answer probabilities ``((1 + dL)/2, (1 - dL)/2)``, ``d = xi0 - xi1``."""
    d = (part.xi0 - part.xi1) * cfg.reliability
    return (1.0 + d) / 2.0, (1.0 - d) / 2.0


def consistency_probabilities(cfg: OracleConfig, part: Partition,
                              m_alpha: int) -> tuple[float, float]:
    """Closed-form ``(Q_consistent, Q_inconsistent)`` for answer ``m_alpha``.

    ``Q_consistent = xi_m L / P_m`` and ``Q_inconsistent = l- / P_m``.  When
    ``P_m == 0`` the branch never occurs and ``(nan, nan)`` is returned.
    """
    p = alpha_probabilities(cfg, part)[m_alpha]
    if p <= 0.0:
        return math.nan, math.nan
    return part.xi[m_alpha] * cfg.reliability / p, cfg.lambda_minus / p


def _check_cycle_state(state: StateVector) -> None:
    if state.n_registers != 3 or state.dims[0] != 2 or state.dims[1] != 2:
        raise PreconditionError(f"expected [beta, alpha, data] registers, got dims {state.dims}")


def measure_alpha(state: StateVector, rng: np.random.Generator) -> AlphaResult:
    """Read the oracle's answer from a post-oracle ``[beta, alpha, data]`` state."""
    _check_cycle_state(state)
    if abs(born_probabilities(state, ANCILLA_REGISTER)[0] - 1.0) > settings.tol:
        raise PreconditionError("ancilla must be |0> when the answer is read")
    res = measure(state, ANSWER_REGISTER, rng)
    phi = conditional_state(res.post_state, {ANCILLA_REGISTER: 0, ANSWER_REGISTER: res.outcome})
    return AlphaResult(res.outcome, res.probability, phi, res.post_state)


def optimal_theta(cfg: OracleConfig) -> float:
    """``arccos sqrt(l-/l+)``; zero when ``L = 0`` and ``pi/2`` when ``L = 1``."""
    ratio = cfg.lambda_minus / cfg.lambda_plus
    return math.acos(min(1.0, math.sqrt(ratio)))


def build_recovery(m_alpha: int, theta: float) -> DenseOperator:
    """Recovery unitary on ``ancilla (x) {|X0>, |X1>}`` for answer ``m_alpha``.

    ``(cos t (X^(m^1) (x) 1) + i (-1)^(m^1) sin t C) (1 (x) R(t))`` where ``C``
    flips the ancilla on ``|X1>`` and ``R(t) = diag(1, e^{it})``.
    """
    if m_alpha not in (0, 1):
        raise DimensionError(f"m_alpha must be 0 or 1, got {m_alpha}")
    flip = m_alpha ^ 1
    ctrl = np.kron(EYE2, P0) + np.kron(SIGMA_X, P1)
    phase = np.diag([1.0, np.exp(1j * theta)])
    left = (math.cos(theta) * np.kron(np.linalg.matrix_power(SIGMA_X, flip), EYE2)
            + 1j * (-1) ** flip * math.sin(theta) * ctrl)
    return DenseOperator(left @ np.kron(EYE2, phase))


def embed_recovery(op: DenseOperator, basis: ClassBasis) -> DenseOperator:
    """Lift a 4x4 ``ancilla (x) span{X0, X1}`` operator to ``ancilla (x) data``.

    The orthogonal complement of the class states receives the identity.
    """
    if op.dim_in != 4:
        raise DimensionError("recovery operator must act on ancilla (x) 2-level data")
    w = np.column_stack([basis.states[0], basis.states[1]])
    block = op.matrix.reshape(2, 2, 2, 2)  # [b_out, tau_out, b_in, tau_in]
    mat = np.zeros((2 * basis.dim, 2 * basis.dim), dtype=np.complex128)
    for t_out in (0, 1):
        for t_in in (0, 1):
            mat += np.kron(block[:, t_out, :, t_in], np.outer(w[:, t_out], w[:, t_in].conj()))
    complement = np.eye(basis.dim) - w @ w.conj().T
    mat += np.kron(EYE2, complement)
    return DenseOperator(mat)


def recovery_setup(cfg: OracleConfig, basis: ClassBasis, theta: float | None = None) -> RecoverySetup:
    theta = optimal_theta(cfg) if theta is None else float(theta)
    return RecoverySetup(theta, embed_recovery(build_recovery(0, theta), basis),
                         embed_recovery(build_recovery(1, theta), basis))


def apply_recovery(alpha: AlphaResult, setup: RecoverySetup) -> StateVector:
    return apply(setup[alpha.m_alpha], alpha.state, [ANCILLA_REGISTER, DATA_REGISTER])


def measure_beta(state: StateVector, m_alpha: int, rng: np.random.Generator) -> BetaResult:
    """Measure the ancilla and classify by the consistency rule."""
    _check_cycle_state(state)
    if abs(born_probabilities(state, ANSWER_REGISTER)[m_alpha] - 1.0) > settings.tol:
        raise PreconditionError(f"answer register is not collapsed to |{m_alpha}>")
    res = measure(state, ANCILLA_REGISTER, rng)
    post = conditional_state(res.post_state, {ANCILLA_REGISTER: res.outcome, ANSWER_REGISTER: m_alpha})
    return BetaResult(res.outcome, m_alpha, res.probability, post, res.post_state)
