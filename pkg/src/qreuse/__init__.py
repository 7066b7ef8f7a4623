"""Statevector simulation of query-based learning with an unreliable oracle
and recycling of the qRAM-prepared input state."""

__version__ = "0.1.0"

from .analysis import (  # noqa: E402
    adversarial_bound_sweep,
    paper_mean_reuse,
    tradeoff_bound,
    verify_bounds,
)
from .dataset import ConceptDataset, Mode, Partition, QramCounter, partition, qram_init  # noqa: E402
from .oracle import OracleConfig, build_oracle, lambdas  # noqa: E402
from .postproc import kraus_pair, optimal_theta  # noqa: E402
from .protocol import (  # noqa: E402
    ProtocolConfig,
    RunRecord,
    SweepStats,
    estimate_reusability,
    monte_carlo,
    run_until_success,
)

__all__ = [
    "ConceptDataset", "Mode", "Partition", "QramCounter", "partition", "qram_init",
    "OracleConfig", "build_oracle", "lambdas", "kraus_pair", "optimal_theta",
    "ProtocolConfig", "RunRecord", "SweepStats", "estimate_reusability", "monte_carlo",
    "run_until_success", "adversarial_bound_sweep", "paper_mean_reuse", "tradeoff_bound",
    "verify_bounds",
]
