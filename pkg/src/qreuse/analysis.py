"""Reusability bounds and a numerical search for recovery operations that beat them.

Everything here works in the two-level class basis ``{|X0>, |X1>}``; the
recovery candidates are unitaries on ``ancilla (x) class`` followed by a
computational-basis measurement of the ancilla.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dataset import Partition
from .errors import DomainError
from .oracle import OracleConfig, lambdas
from .postproc import alpha_probabilities, build_recovery, optimal_theta

CONCLUSIVE_TOL = 1e-9
BOUND_TOL = 1e-9


def tradeoff_bound(reliability: float) -> float:
    """Largest achievable reusability, ``1 - L``."""
    lambdas(reliability)
    return 1.0 - reliability


def paper_mean_reuse(R: float) -> float:
    """``sum_n n R^n = R / (1 - R)^2``.

    This is the unnormalized series; the mean of the geometric law
    ``R^n (1 - R)`` is ``R / (1 - R)`` instead (see :func:`geometric_mean_reuse`).
    """
    if not 0.0 <= R < 1.0:
        if R == 1.0:
            raise DomainError("mean reuse diverges at R = 1")
        raise DomainError(f"R must lie in [0, 1), got {R!r}")
    return R / (1.0 - R) ** 2


def reuse_bound(reliability: float) -> float:
    """``L^-1 (L^-1 - 1)``, the value of :func:`paper_mean_reuse` at ``R = 1 - L``."""
    lambdas(reliability)
    if reliability == 0:
        return math.inf
    inv = 1.0 / reliability
    return inv * (inv - 1.0)


def geometric_mean_reuse(reliability: float) -> float:
    """Expected number of recoveries before success when each cycle succeeds w.p. ``L``."""
    lambdas(reliability)
    return math.inf if reliability == 0 else (1.0 - reliability) / reliability


def haar_unitary(dim: int, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Haar-random unitary (or a stack of ``size`` of them) via phase-fixed QR."""
    shape = (dim, dim) if size is None else (size, dim, dim)
    z = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r, axis1=-2, axis2=-1)
    return q * (d / np.abs(d))[..., None, :]


@dataclass(frozen=True)
class TradeoffWitness:
    m_alpha: int
    eta: float
    p: float
    ratio: float
    lambda_minus: float

    def holds(self, tol: float = 1e-10) -> bool:
        if self.eta < 0 or self.eta > self.lambda_minus + tol:
            return False
        if self.p > 0 and self.ratio > self.lambda_minus / self.p + tol:
            return False
        return True


def post_answer_states(cfg: OracleConfig, part: Partition) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(P, phi, psi0)``: answer probabilities, post-answer class states (rows), input state."""
    lp, lm = cfg.lambda_plus, cfg.lambda_minus
    p = np.array(alpha_probabilities(cfg, part))
    xi = np.array(part.xi)
    raw = np.sqrt(np.array([[xi[0] * lp, xi[1] * lm], [xi[0] * lm, xi[1] * lp]]))
    with np.errstate(invalid="ignore", divide="ignore"):
        phi = np.where(p[:, None] > 0, raw / np.sqrt(np.where(p > 0, p, 1.0))[:, None], 0.0)
    return p, phi.astype(np.complex128), np.sqrt(xi).astype(np.complex128)


def recovery_weights(unitaries: np.ndarray, phi: np.ndarray, psi0: np.ndarray,
                     conclusive_tol: float = CONCLUSIVE_TOL) -> np.ndarray:
    """Probability of conclusively recovering ``psi0`` for each candidate.

    ``unitaries`` has shape ``(..., 4, 4)`` on ``ancilla (x) class``; the
    ancilla starts in ``|0>``.  Every ancilla outcome whose class-register
    branch has fidelity at least ``1 - conclusive_tol`` with ``psi0`` adds
    its weight; other branches add nothing.
    """
    out = unitaries[..., :, :2] @ phi  # ancilla |0> selects input columns 0, 1
    branches = out.reshape(out.shape[:-1] + (2, 2))  # [..., beta, class]
    weight = np.sum(np.abs(branches) ** 2, axis=-1)
    overlap = np.abs(branches @ psi0.conj()) ** 2
    with np.errstate(invalid="ignore", divide="ignore"):
        fid = np.where(weight > 0, overlap / np.where(weight > 0, weight, 1.0), 0.0)
    conclusive = fid >= 1.0 - conclusive_tol
    return np.sum(np.where(conclusive, weight * fid, 0.0), axis=-1)


def candidate_reusability(u0: np.ndarray, u1: np.ndarray, cfg: OracleConfig,
                          part: Partition) -> tuple[np.ndarray, list[list[TradeoffWitness]]]:
    """Reusability of candidate recovery pairs and their per-answer witnesses.

    ``u0``/``u1`` are applied after answers 0/1 and may be stacked with a
    leading batch axis.  Returns ``R`` with the batch shape and, for each
    candidate, one witness per answer that occurs with non-zero probability.
    """
    u0 = np.asarray(u0, dtype=np.complex128)
    u1 = np.asarray(u1, dtype=np.complex128)
    p, phi, psi0 = post_answer_states(cfg, part)
    rec = [recovery_weights(u, phi[m], psi0) for m, u in ((0, u0), (1, u1))]
    R = sum(p[m] * rec[m] for m in (0, 1) if p[m] > 0)
    flat = [np.ravel(r) for r in rec]
    witnesses = []
    for k in range(flat[0].size):
        witnesses.append([
            TradeoffWitness(m, float(p[m] * flat[m][k]), float(p[m]), float(flat[m][k]),
                            cfg.lambda_minus)
            for m in (0, 1) if p[m] > 0
        ])
    return np.asarray(R, dtype=float), witnesses


def optimal_pair(cfg: OracleConfig) -> tuple[np.ndarray, np.ndarray]:
    theta = optimal_theta(cfg)
    return build_recovery(0, theta).matrix, build_recovery(1, theta).matrix


def adversarial_bound_sweep(cfg: OracleConfig, part: Partition, n_samples: int,
                            rng: np.random.Generator) -> tuple[np.ndarray, list[list[TradeoffWitness]]]:
    """Evaluate ``n_samples`` Haar-random recovery pairs at one ``(xi0, L)`` point."""
    if n_samples < 1:
        raise DomainError("n_samples must be at least 1")
    u0 = haar_unitary(4, rng, n_samples)
    u1 = haar_unitary(4, rng, n_samples)
    return candidate_reusability(u0, u1, cfg, part)


@dataclass(frozen=True)
class BoundReport:
    points: int
    unitaries: int
    evaluations: int
    max_R_candidate: float
    max_excess: float
    violations: int
    witness_failures: int
    conclusive_candidates: int
    optimal_max_deviation: float

    @property
    def ok(self) -> bool:
        return self.violations == 0 and self.witness_failures == 0


def verify_bounds(n_unitaries: int, n_points: int, seed: int,
                  xi_range: tuple[float, float] = (0.05, 0.95),
                  chunk: int = 2048) -> BoundReport:
    """Check ``R <= 1 - L`` for random recovery pairs across random ``(xi0, L)`` points.

    ``xi0`` is kept away from 0 and 1: there the input state is a class
    state, untouched by the answer read-out, so doing nothing recovers it
    with certainty.  The bound concerns recoveries that do not depend on
    the unknown weights.
    """
    if n_unitaries < 1 or n_points < 1:
        raise DomainError("need at least one unitary and one point")
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(2,)))
    xs = rng.uniform(*xi_range, size=n_points)
    Ls = rng.uniform(0.0, 1.0, size=n_points)
    pairs = [(haar_unitary(4, rng, min(chunk, n_unitaries - s)),
              haar_unitary(4, rng, min(chunk, n_unitaries - s)))
             for s in range(0, n_unitaries, chunk)]

    max_r, max_excess, violations, failures, conclusive, opt_dev = -math.inf, -math.inf, 0, 0, 0, 0.0
    for xi0, L in zip(xs, Ls):
        cfg = OracleConfig(float(L))
        part = Partition(float(xi0), float(1.0 - xi0), frozenset({0}), frozenset({1}))
        bound = tradeoff_bound(cfg.reliability)
        r_opt, _ = candidate_reusability(*optimal_pair(cfg), cfg, part)
        opt_dev = max(opt_dev, abs(float(r_opt) - bound))
        for u0, u1 in pairs:
            R, wits = candidate_reusability(u0, u1, cfg, part)
            max_r = max(max_r, float(R.max()))
            max_excess = max(max_excess, float((R - bound).max()))
            violations += int(np.count_nonzero(R > bound + BOUND_TOL))
            conclusive += int(np.count_nonzero(R > 0))
            failures += sum(not w.holds() for ws in wits for w in ws)
    return BoundReport(n_points, n_unitaries, n_points * n_unitaries, max_r, max_excess,
                       violations, failures, conclusive, opt_dev)
