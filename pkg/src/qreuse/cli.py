"""Command line entry point: ``qreuse run | sweep | verify-bounds``.

Exit status: 0 success, 1 usage error, 2 bound violation, 3 I/O failure.
Settings come from flags, then a ``--config`` key=value file, then defaults.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from . import __version__
from .analysis import verify_bounds
from .dataset import ConceptDataset, Mode
from .errors import QReuseError
from .protocol import DEFAULT_MAX_CYCLES, ENGINES, ProtocolConfig, monte_carlo
from .report import (
    BOUND_COLUMNS,
    SWEEP_COLUMNS,
    bound_row,
    render_svg,
    sweep_row,
    to_csv,
    to_json,
    write_atomic,
)

log = logging.getLogger("qreuse")

EXIT_OK, EXIT_USAGE, EXIT_VIOLATION, EXIT_IO = 0, 1, 2, 3
COMMANDS = ("run", "sweep", "verify-bounds")
DEFAULT_TRIALS = {"run": 1000, "sweep": 100_000, "verify-bounds": 10_000}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(f"{self.prog}: {message}")


def _unit_interval(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError(f"{v} is outside [0, 1]")
    return v


def parse_grid(text: str) -> list[float]:
    """``start:stop:step`` (inclusive) or a comma-separated list, within ``[0, 1]``."""
    try:
        if ":" in text:
            start, stop, step = (float(p) for p in text.split(":"))
            if step <= 0:
                raise argparse.ArgumentTypeError("grid step must be positive")
            n = int(round((stop - start) / step)) + 1
            values = [round(start + i * step, 12) for i in range(n)]
        else:
            values = [float(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"malformed grid {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("empty grid")
    if any(not 0.0 <= v <= 1.0 for v in values):
        raise argparse.ArgumentTypeError(f"grid {text!r} leaves [0, 1]")
    if any(b <= a for a, b in zip(values, values[1:])):
        raise argparse.ArgumentTypeError(f"grid {text!r} is not strictly ascending")
    return values


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"{v} must be at least 1")
    return v


def _seed(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return v


@dataclass
class ExperimentSpec:
    command: str
    reliabilities: list[float]
    xi0s: list[float] = field(default_factory=lambda: [0.5])
    dataset: Path | None = None
    n_bits: int = 2
    trials: int = 1000
    seed: int = 0
    mode: Mode = Mode.REDUCED
    max_cycles: int = DEFAULT_MAX_CYCLES
    output: Path | None = None
    format: str = "csv"
    plot: bool = False
    engine: str = "markov"
    workers: int = 1
    points: int = 100


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", type=Path, help="key=value settings file (flags win)")
    common.add_argument("--trials", type=_positive_int)
    common.add_argument("--seed", type=_seed, default=0)
    common.add_argument("--output", type=Path, help="report path (default: stdout)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")

    sim = _Parser(add_help=False)
    src = sim.add_mutually_exclusive_group()
    src.add_argument("--xi0", help="class-0 mass (sweep: grid or list)")
    src.add_argument("--dataset", type=Path, help="index,label,weight CSV file")
    sim.add_argument("--n-bits", type=_positive_int, default=2,
                     help="input bits for the synthetic --xi0 dataset")
    sim.add_argument("--mode", choices=[m.value for m in Mode], default=Mode.REDUCED.value)
    sim.add_argument("--max-cycles", type=_positive_int, default=DEFAULT_MAX_CYCLES)
    sim.add_argument("--plot", action="store_true", help="also write <output>.svg")
    sim.add_argument("--engine", choices=ENGINES)
    sim.add_argument("--workers", type=_positive_int, default=1)

    parser = _Parser(prog="qreuse", description="Unreliable-oracle state recycling simulator")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    run = sub.add_parser("run", parents=[common, sim], help="Monte Carlo at one reliability")
    run.add_argument("--reliability", type=_unit_interval, required=True)
    sweep = sub.add_parser("sweep", parents=[common, sim], help="grid over reliability and xi0")
    sweep.add_argument("--reliability-grid", type=parse_grid, required=True)
    vb = sub.add_parser("verify-bounds", parents=[common],
                        help="search random recovery unitaries for bound violations")
    vb.add_argument("--points", type=_positive_int, default=100)
    return parser


def read_config(path: Path) -> dict[str, str]:
    values: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key=value")
            key, value = (p.strip() for p in line.split("=", 1))
            values[key.replace("-", "_")] = value
    return values


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> None:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", type=Path)
    pre.add_argument("command", nargs="?")
    known, _ = pre.parse_known_args(argv)
    if known.config is None:
        return
    try:
        values = read_config(known.config)
    except OSError as exc:
        raise UsageError(f"--config: cannot read {known.config}: {exc.strerror}") from None
    subparsers = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    target = subparsers.choices.get(known.command)
    if target is None:
        return
    dests = {a.dest: a for a in target._actions}
    for key, value in values.items():
        action = dests.get(key)
        if action is None or key in ("help", "config"):
            raise UsageError(f"--config: unknown key {key!r}")
        if isinstance(action, argparse._StoreTrueAction):
            value = value.lower() in ("1", "true", "yes", "on")
        elif action.type is not None:
            try:
                value = action.type(value)
            except argparse.ArgumentTypeError as exc:
                raise UsageError(f"--config: {key}: {exc}") from None
        target.set_defaults(**{key: value})
        if action.required:
            action.required = False


def parse_args(argv: Sequence[str]) -> ExperimentSpec:
    argv = list(argv)
    parser = build_parser()
    _apply_config(parser, argv)
    ns = parser.parse_args(argv)
    if ns.verbose:
        logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    trials = ns.trials if ns.trials is not None else DEFAULT_TRIALS[ns.command]
    if ns.command == "verify-bounds":
        return ExperimentSpec("verify-bounds", [], trials=trials, seed=ns.seed, output=ns.output,
                              format=ns.format, points=ns.points)

    if ns.command == "run":
        if getattr(ns, "reliability", None) is None:
            raise UsageError("qreuse run: the following arguments are required: --reliability")
        reliabilities = [ns.reliability]
    else:
        if getattr(ns, "reliability_grid", None) is None:
            raise UsageError("qreuse sweep: the following arguments are required: --reliability-grid")
        reliabilities = ns.reliability_grid
    xi0s = [0.5]
    if ns.xi0 is not None:
        try:
            xi0s = [_unit_interval(ns.xi0)] if ns.command == "run" else parse_grid(ns.xi0)
        except argparse.ArgumentTypeError as exc:
            raise UsageError(f"qreuse {ns.command}: argument --xi0: {exc}") from None
    if ns.plot and ns.output is None:
        raise UsageError(f"qreuse {ns.command}: argument --plot: requires --output")
    engine = ns.engine or ("statevector" if ns.command == "run" else "markov")
    return ExperimentSpec(ns.command, reliabilities, xi0s, ns.dataset, ns.n_bits, trials, ns.seed,
                          Mode(ns.mode), ns.max_cycles, ns.output, ns.format, ns.plot, engine,
                          ns.workers)


def _emit(spec: ExperimentSpec, rows: list[dict], columns: Sequence[str]) -> None:
    text = to_json(rows, columns) if spec.format == "json" else to_csv(rows, columns)
    if spec.output is None:
        sys.stdout.write(text)
    else:
        write_atomic(spec.output, text)
    if spec.plot and spec.output is not None:
        write_atomic(spec.output.with_suffix(".svg"), render_svg(rows))


def execute(spec: ExperimentSpec) -> int:
    if spec.command == "verify-bounds":
        report = verify_bounds(spec.trials, spec.points, spec.seed)
        _emit(spec, [bound_row(report)], BOUND_COLUMNS)
        if not report.ok:
            log.error("bound violated: %d candidates exceed 1 - L", report.violations)
            return EXIT_VIOLATION
        return EXIT_OK

    if spec.dataset is not None:
        datasets = [ConceptDataset.load(spec.dataset)]
    else:
        datasets = [ConceptDataset.from_xi0(x, spec.n_bits) for x in spec.xi0s]
    rows = []
    for ds in datasets:
        for L in spec.reliabilities:
            cfg = ProtocolConfig(L, ds, spec.mode, spec.max_cycles, spec.trials, spec.seed)
            log.info("L=%.6g trials=%d engine=%s", L, spec.trials, spec.engine)
            rows.append(sweep_row(monte_carlo(cfg, spec.engine, spec.workers)))
    _emit(spec, rows, SWEEP_COLUMNS)
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        spec = parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    try:
        return execute(spec)
    except OSError as exc:
        print(f"qreuse: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except QReuseError as exc:
        print(f"qreuse: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
