"""Learning-query loop with state recycling, and the Monte Carlo harness.

One qRAM initialization prepares the input superposition.  Each cycle
queries the oracle, reads the answer, applies the recovery unitary and
reads the ancilla.  Agreement of the two read-outs ends the run with a
certified answer; disagreement leaves the data register back in the
initial superposition, which is fed into the next cycle.

Two engines are provided.  ``statevector`` pushes every trial through the
dense simulator.  ``markov`` first propagates the branch structure of a
cycle through the simulator (no sampling), then samples whole runs in
vectorized blocks; this is valid because a recovered data register is the
initial state, so cycles are i.i.d.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple

import numpy as np

from .dataset import (
    ClassBasis,
    ConceptDataset,
    Mode,
    Partition,
    QueryCounter,
    class_basis,
    partition,
    qram_init,
)
from .errors import DomainError, InvalidStateError, PreconditionError
from .oracle import ANSWER_REGISTER, DATA_REGISTER, OracleConfig, apply_oracle, build_oracle
from .postproc import (
    ANCILLA_REGISTER,
    OutcomeKind,
    RecoverySetup,
    apply_recovery,
    measure_alpha,
    measure_beta,
    recovery_setup,
)
from .statevec import DenseOperator, StateVector, apply, fidelity, measure, project, tensor

BLOCK_SIZE = 1 << 16
DEFAULT_MAX_CYCLES = 10_000
ENGINES = ("statevector", "markov")

_ZERO = StateVector((2,), np.array([1.0, 0.0]))


@dataclass(frozen=True)
class ProtocolConfig:
    reliability: float
    dataset: ConceptDataset
    mode: Mode = Mode.REDUCED
    max_cycles: int = DEFAULT_MAX_CYCLES
    trials: int = 1000
    master_seed: int = 0
    theta: float | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "mode", Mode(self.mode))
        OracleConfig(self.reliability)
        if self.max_cycles < 1:
            raise DomainError("max_cycles must be at least 1")
        if self.trials < 1:
            raise DomainError("trials must be at least 1")
        if not 0 <= self.master_seed < 2**64:
            raise DomainError("master_seed must be a 64-bit unsigned integer")


@dataclass(frozen=True, eq=False)
class ProtocolSetup:
    """Operators and reference states shared by every trial of a config."""

    config: ProtocolConfig
    oracle_cfg: OracleConfig
    part: Partition
    basis: ClassBasis
    oracle: DenseOperator
    recovery: RecoverySetup
    psi0: StateVector
    labels: np.ndarray

    def class_state(self, tau: int) -> StateVector:
        return StateVector((self.basis.dim,), self.basis.states[tau])


def prepare(cfg: ProtocolConfig) -> ProtocolSetup:
    ocfg = OracleConfig(cfg.reliability)
    basis = class_basis(cfg.dataset, cfg.mode)
    return ProtocolSetup(
        config=cfg,
        oracle_cfg=ocfg,
        part=partition(cfg.dataset),
        basis=basis,
        oracle=build_oracle(ocfg, basis),
        recovery=recovery_setup(ocfg, basis, cfg.theta),
        psi0=qram_init(cfg.dataset, None, cfg.mode),
        labels=np.asarray(cfg.dataset.labels),
    )


@dataclass(frozen=True)
class CycleOutcome:
    m_alpha: int
    m_beta: int
    p_alpha: float
    p_beta: float
    kind: OutcomeKind
    fidelity: float
    """Overlap of the data register with ``|psi0>`` (recovered) or ``|X_m>`` (extracted)."""

    @property
    def consistent(self) -> bool:
        return self.m_alpha == self.m_beta


@dataclass
class RunRecord:
    cycles: int
    qram_queries: int
    oracle_queries: int
    success: bool
    answer: int | None
    trace: list[CycleOutcome] = field(default_factory=list)
    sampled_index: int | None = None

    @property
    def outcome_trace(self) -> list[tuple[int, int]]:
        return [(c.m_alpha, c.m_beta) for c in self.trace]

    @property
    def reuses(self) -> int:
        return sum(c.kind is OutcomeKind.RECOVERED for c in self.trace)


def trial_rng(master_seed: int, trial_index: int) -> np.random.Generator:
    """Counter-based stream owned by one trial."""
    seq = np.random.SeedSequence(master_seed, spawn_key=(0, trial_index))
    return np.random.Generator(np.random.Philox(seq))


def block_rng(master_seed: int, block_index: int) -> np.random.Generator:
    seq = np.random.SeedSequence(master_seed, spawn_key=(1, block_index))
    return np.random.Generator(np.random.Philox(seq))


def run_cycle(data: StateVector, setup: ProtocolSetup, rng: np.random.Generator,
              oracle_counter: QueryCounter | None = None) -> tuple[CycleOutcome, StateVector]:
    """One oracle / read / recover / read pass on fresh ``|0>`` answer and ancilla."""
    if data.dims != (setup.basis.dim,):
        raise PreconditionError(f"data register has dims {data.dims}, expected ({setup.basis.dim},)")
    state = tensor(_ZERO, tensor(_ZERO, data))
    state = apply_oracle(state, setup.oracle, oracle_counter)
    alpha = measure_alpha(state, rng)
    beta = measure_beta(apply_recovery(alpha, setup.recovery), alpha.m_alpha, rng)
    ref = setup.class_state(alpha.m_alpha) if beta.consistent else setup.psi0
    outcome = CycleOutcome(alpha.m_alpha, beta.m_beta, alpha.probability, beta.probability,
                           beta.kind, fidelity(beta.post, ref))
    return outcome, beta.post


def run_until_success(cfg: ProtocolConfig, rng: np.random.Generator,
                      setup: ProtocolSetup | None = None) -> RunRecord:
    """Cycle one qRAM-prepared state until an answer is certified or ``max_cycles``."""
    setup = prepare(cfg) if setup is None else setup
    qram, oracle = QueryCounter(), QueryCounter()
    data = qram_init(cfg.dataset, qram, cfg.mode)
    record = RunRecord(0, 0, 0, False, None)
    for _ in range(cfg.max_cycles):
        outcome, data = run_cycle(data, setup, rng, oracle)
        record.trace.append(outcome)
        record.cycles += 1
        if outcome.consistent:
            record.success = True
            record.answer = outcome.m_alpha
            if cfg.mode is Mode.FULL:
                record.sampled_index = measure(data, 0, rng).outcome
            break
    record.qram_queries = qram.queries
    record.oracle_queries = oracle.queries
    return record


@dataclass(frozen=True)
class BranchTable:
    """Exact per-cycle branch probabilities propagated through the simulator."""

    p_alpha: tuple[float, float]
    q_consistent: tuple[float, float]
    recovery_fidelity: tuple[float, float]
    extraction_fidelity: tuple[float, float]

    @property
    def q_inconsistent(self) -> tuple[float, float]:
        return tuple(math.nan if math.isnan(q) else 1.0 - q for q in self.q_consistent)

    @property
    def reusability(self) -> float:
        return math.fsum(p * (1.0 - q) for p, q in zip(self.p_alpha, self.q_consistent) if p > 0)

    @property
    def success_probability(self) -> float:
        return math.fsum(p * q for p, q in zip(self.p_alpha, self.q_consistent) if p > 0)


def branch_table(setup: ProtocolSetup) -> BranchTable:
    """Project (rather than sample) every branch of one cycle started from ``|psi0>``."""
    state = tensor(_ZERO, tensor(_ZERO, setup.psi0))
    state = apply_oracle(state, setup.oracle)
    p_alpha, q_cons, rec_fid, ext_fid = [], [], [], []
    for m in (0, 1):
        try:
            p, post = project(state, ANSWER_REGISTER, m)
        except InvalidStateError:
            p_alpha.append(0.0)
            q_cons.append(math.nan)
            rec_fid.append(math.nan)
            ext_fid.append(math.nan)
            continue
        out = apply(setup.recovery[m], post, [ANCILLA_REGISTER, DATA_REGISTER])
        p_alpha.append(p)
        fids = {}
        q = 0.0
        for b in (0, 1):
            try:
                w, branch = project(out, ANCILLA_REGISTER, b)
            except InvalidStateError:
                fids[b] = math.nan
                continue
            data = StateVector((setup.basis.dim,), branch.tensor_view()[b, m, :])
            if b == m:
                q = w
                fids[b] = fidelity(data, setup.class_state(m))
            else:
                fids[b] = fidelity(data, setup.psi0)
        q_cons.append(q)
        ext_fid.append(fids[m])
        rec_fid.append(fids[1 - m])
    return BranchTable(tuple(p_alpha), tuple(q_cons), tuple(rec_fid), tuple(ext_fid))


@dataclass
class Tally:
    """Integer counts from which every Monte Carlo estimate is formed."""

    trials: int = 0
    first_alpha: list[int] = field(default_factory=lambda: [0, 0])
    first_consistent: list[int] = field(default_factory=lambda: [0, 0])
    successes: int = 0
    cycles_success: int = 0
    cycles_success_sq: int = 0
    qram_success: int = 0
    total_cycles: int = 0
    total_recovered: int = 0

    def merge(self, other: "Tally") -> "Tally":
        return Tally(
            self.trials + other.trials,
            [a + b for a, b in zip(self.first_alpha, other.first_alpha)],
            [a + b for a, b in zip(self.first_consistent, other.first_consistent)],
            self.successes + other.successes,
            self.cycles_success + other.cycles_success,
            self.cycles_success_sq + other.cycles_success_sq,
            self.qram_success + other.qram_success,
            self.total_cycles + other.total_cycles,
            self.total_recovered + other.total_recovered,
        )

    def add_record(self, rec: RunRecord) -> None:
        first = rec.trace[0]
        self.trials += 1
        self.first_alpha[first.m_alpha] += 1
        self.first_consistent[first.m_alpha] += int(first.consistent)
        self.total_cycles += rec.cycles
        self.total_recovered += rec.reuses
        if rec.success:
            self.successes += 1
            self.cycles_success += rec.cycles
            self.cycles_success_sq += rec.cycles**2
            self.qram_success += rec.qram_queries


def _statevector_chunk(cfg: ProtocolConfig, start: int, stop: int) -> Tally:
    setup = prepare(cfg)
    tally = Tally()
    for t in range(start, stop):
        tally.add_record(run_until_success(cfg, trial_rng(cfg.master_seed, t), setup))
    return tally


def _markov_block(cfg: ProtocolConfig, table: BranchTable, block: int) -> Tally:
    start = block * BLOCK_SIZE
    n = min(BLOCK_SIZE, cfg.trials - start)
    rng = block_rng(cfg.master_seed, block)
    p0 = table.p_alpha[0]
    q = np.nan_to_num(np.asarray(table.q_consistent), nan=0.0)

    cycles = np.zeros(n, dtype=np.int64)
    success = np.zeros(n, dtype=bool)
    active = np.arange(n)
    tally = Tally(trials=n)
    first = True
    while active.size:
        u = rng.random((2, active.size))
        m = (u[0] >= p0).astype(np.int64)
        ok = u[1] < q[m]
        cycles[active] += 1
        if first:
            tally.first_alpha = np.bincount(m, minlength=2).tolist()
            tally.first_consistent = np.bincount(m, weights=ok, minlength=2).astype(int).tolist()
            first = False
            if not q.any():
                # success impossible: every run exhausts max_cycles
                cycles[:] = cfg.max_cycles
                break
        success[active[ok]] = True
        active = active[~ok & (cycles[active] < cfg.max_cycles)]

    done = cycles[success]
    tally.successes = int(success.sum())
    tally.cycles_success = int(done.sum())
    tally.cycles_success_sq = int((done**2).sum())
    tally.qram_success = tally.successes  # one initialization per run, never repeated
    tally.total_cycles = int(cycles.sum())
    tally.total_recovered = tally.total_cycles - tally.successes
    return tally


def _chunks(total: int, size: int) -> Iterator[tuple[int, int]]:
    for start in range(0, total, size):
        yield start, min(total, start + size)


def simulate(cfg: ProtocolConfig, engine: str = "markov", workers: int = 1) -> Tally:
    """Run ``cfg.trials`` independent runs and reduce them in trial order."""
    if engine not in ENGINES:
        raise DomainError(f"unknown engine {engine!r}; choose from {ENGINES}")
    if engine == "markov":
        table = branch_table(prepare(cfg))
        if any(p > 0 and not f >= 1.0 - 1e-10
               for p, q, f in zip(table.p_alpha, table.q_consistent, table.recovery_fidelity)
               if q < 1.0):
            raise PreconditionError("markov engine needs conclusive recovery; use the statevector engine")
        n_blocks = -(-cfg.trials // BLOCK_SIZE)
        jobs = [(cfg, table, b) for b in range(n_blocks)]
        fn = _markov_block
    else:
        jobs = [(cfg, a, b) for a, b in _chunks(cfg.trials, 2048)]
        fn = _statevector_chunk
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(fn, *zip(*jobs)))
    else:
        parts = [fn(*job) for job in jobs]
    total = Tally()
    for part in parts:
        total = total.merge(part)
    return total


class Estimate(NamedTuple):
    value: float
    radius: float
    reliable: bool


def _proportion(k: float, n: int) -> tuple[float, float]:
    if n == 0:
        return math.nan, math.nan
    p = k / n
    return p, (math.sqrt(p * (1.0 - p) / n) if n > 1 else math.nan)


@dataclass(frozen=True)
class SweepStats:
    reliability: float
    xi0: float
    trials: int
    mode: str
    emp_P0: float
    se_P0: float
    analytic_P0: float
    emp_Q_consistent: tuple[float, float]
    se_Q_consistent: tuple[float, float]
    analytic_Q_consistent: tuple[float, float]
    emp_R: float
    se_R: float
    analytic_R: float
    emp_success_rate: float
    se_success_rate: float
    emp_first_cycle_success: float
    mean_cycles: float
    se_cycles: float
    analytic_mean_cycles: float
    mean_reuses: float
    se_reuses: float
    geometric_mean_reuses: float
    paper_mean_reuse: float
    qram_queries_per_success: float
    radii_defined: bool
    strata_populated: bool

    @classmethod
    def from_tally(cls, cfg: ProtocolConfig, table: BranchTable, tally: Tally) -> "SweepStats":
        from .analysis import paper_mean_reuse

        n = tally.trials
        emp_p0, se_p0 = _proportion(tally.first_alpha[0], n)
        qs = [_proportion(tally.first_consistent[m], tally.first_alpha[m]) for m in (0, 1)]
        first_recovered = sum(tally.first_alpha) - sum(tally.first_consistent)
        emp_r, se_r = _proportion(first_recovered, n)
        emp_s, se_s = _proportion(tally.successes, n)
        k = tally.successes
        if k:
            mean_c = tally.cycles_success / k
            var_c = (tally.cycles_success_sq - k * mean_c**2) / (k - 1) if k > 1 else math.nan
            se_c = math.sqrt(max(var_c, 0.0) / k) if k > 1 else math.nan
            qps = tally.qram_success / k
        else:
            mean_c = se_c = qps = math.nan
        L = cfg.reliability
        analytic_r = table.reusability
        return cls(
            reliability=L,
            xi0=partition(cfg.dataset).xi0,
            trials=n,
            mode=cfg.mode.value,
            emp_P0=emp_p0,
            se_P0=se_p0,
            analytic_P0=table.p_alpha[0],
            emp_Q_consistent=(qs[0][0], qs[1][0]),
            se_Q_consistent=(qs[0][1], qs[1][1]),
            analytic_Q_consistent=table.q_consistent,
            emp_R=emp_r,
            se_R=se_r,
            analytic_R=analytic_r,
            emp_success_rate=emp_s,
            se_success_rate=se_s,
            emp_first_cycle_success=1.0 - emp_r,
            mean_cycles=mean_c,
            se_cycles=se_c,
            analytic_mean_cycles=1.0 / L if L > 0 else math.inf,
            mean_reuses=mean_c - 1.0,
            se_reuses=se_c,
            geometric_mean_reuses=(1.0 - L) / L if L > 0 else math.inf,
            paper_mean_reuse=paper_mean_reuse(analytic_r) if analytic_r < 1.0 else math.inf,
            qram_queries_per_success=qps,
            radii_defined=n > 1,
            strata_populated=all(c > 0 for c, p in zip(tally.first_alpha, table.p_alpha) if p > 0),
        )


def monte_carlo(cfg: ProtocolConfig, engine: str = "markov", workers: int = 1) -> SweepStats:
    table = branch_table(prepare(cfg))
    return SweepStats.from_tally(cfg, table, simulate(cfg, engine, workers))


def estimate_reusability(cfg: ProtocolConfig, engine: str = "markov",
                         workers: int = 1) -> Estimate:
    """Fraction of first cycles that end in a recovered input, with its standard error.

    Equals ``sum_m P^_m Q^_m(inconsistent)`` with both factors estimated
    from the same first cycles.
    """
    stats = monte_carlo(cfg, engine, workers)
    return Estimate(stats.emp_R, stats.se_R, stats.radii_defined and stats.strata_populated)
