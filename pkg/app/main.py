"""
Command-line entry point.

Subcommands: topology, validate, lifelong, baseline, report. Exit codes are
0 success, 1 usage/config error, 2 validation failure, 3 runtime error.
"""
from pathlib import Path
from typing import Optional, Sequence
import argparse
import json
import logging
import sys

from pydantic import ValidationError

from app.core.config import settings
from app.core.errors import (
    EXIT_RUNTIME,
    EXIT_USAGE,
    ConfigError,
    FogForgeError,
    ValidationFailedError,
)
from app.core.logging_config import setup_logging
from app.core.trial_pool import run_trials
from app.schemas.experiment import ExperimentConfig, Representation, TransferMode
from app.services.baselines import BaselineKind
from app.services.harness import run_baseline, run_lifelong
from app.services.reporting import (
    aggregate_frame,
    plot_boxplots,
    read_results,
    results_frame,
    timings_frame,
    write_csv,
)
from app.services.topology import build_topology, cluster_counts, save_topology
from app.services.validation import MM1_HORIZON, run_validation

logger = logging.getLogger(__name__)

EFFECTIVE_CONFIG = "effective_config.json"


class CliArgumentParser(argparse.ArgumentParser):
    """argparse with usage errors mapped to exit code 1."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def load_config(path: Optional[str]) -> ExperimentConfig:
    """
    Read an experiment document; defaults fill every omitted key.

    Raises:
        ConfigError: On invalid JSON or schema violations, with the dotted key path
        FileNotFoundError: If path does not exist
    """
    if path is None:
        return ExperimentConfig()
    if not Path(path).is_file():
        raise FileNotFoundError(f"Config file not found: {path}")
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError("<root>", f"not valid JSON ({e})")
    return _validate_config(raw)


def _validate_config(raw) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(raw)
    except ValidationError as e:
        first = e.errors()[0]
        key_path = ".".join(str(part) for part in first.get("loc", ())) or "<root>"
        raise ConfigError(key_path, first.get("msg", "invalid value"))


def apply_overrides(config: ExperimentConfig, args: argparse.Namespace) -> ExperimentConfig:
    """Fold CLI flags into the config and re-validate the result."""
    data = config.model_dump(mode="json")
    if getattr(args, "seed", None) is not None:
        data["seed"] = args.seed
    if getattr(args, "trials", None) is not None:
        data["trials"] = args.trials
    if getattr(args, "out", None) is not None:
        data["output_dir"] = args.out
    if getattr(args, "mode", None):
        data["modes"] = [m.value for m in TransferMode] if args.mode == "all" else [args.mode]
    if getattr(args, "representation", None):
        data["agent"]["representation"] = args.representation
    return _validate_config(data)


def write_effective_config(config: ExperimentConfig) -> str:
    path = Path(config.output_dir) / EFFECTIVE_CONFIG
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(config.model_dump_json(indent=2) + "\n", encoding="utf-8")
    return str(path)


def cmd_topology(args: argparse.Namespace) -> int:
    config = apply_overrides(load_config(args.config), args)
    topology = build_topology(config.topology, config.seed)
    path = args.output or str(Path(config.output_dir) / "topology.json")
    save_topology(topology, path)
    counts = cluster_counts(topology)
    summary = ", ".join(f"fog {fog}: {n}" for fog, n in sorted(counts.items()))
    print(f"Wrote {path} ({len(topology.fog_ids)} fog nodes, clusters per node: {summary})")
    return 0


def cmd_validate(args: argparse.Namespace) -> int:
    results = run_validation(horizon=args.horizon)
    for result in results:
        verdict = "PASS" if result.passed else "FAIL"
        print(f"{verdict}  {result.name:<42} measured={result.measured:<14.6g} expected={result.expected:.6g}")
    if args.out:
        path = Path(args.out) / "validation.json"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps([r.model_dump() for r in results], indent=2), encoding="utf-8")
    failed = [r.name for r in results if not r.passed]
    if failed:
        raise ValidationFailedError(failed)
    return 0


def _write_outputs(config: ExperimentConfig, results, prefix: str) -> None:
    out = Path(config.output_dir)
    frame = results_frame(results)
    write_csv(frame, str(out / f"{prefix}results.csv"))
    write_csv(timings_frame(results), str(out / f"{prefix}timings.csv"))
    write_csv(aggregate_frame(frame), str(out / f"{prefix}aggregate.csv"))


def cmd_lifelong(args: argparse.Namespace) -> int:
    config = apply_overrides(load_config(args.config), args)
    write_effective_config(config)
    checkpoint_dir = str(Path(config.output_dir) / "checkpoints") if args.checkpoints else None

    results = []
    for mode in config.modes:
        logger.info(f"Mode {mode.value}: {config.trials} trials from seed {config.seed}")
        arg_list = [(config, mode, seed, checkpoint_dir) for seed in config.trial_seeds()]
        results.extend(run_trials(run_lifelong, arg_list, jobs=args.jobs))
    _write_outputs(config, results, prefix="")
    return 0


def cmd_baseline(args: argparse.Namespace) -> int:
    config = apply_overrides(load_config(args.config), args)
    write_effective_config(config)
    kinds = list(BaselineKind) if args.policy == "all" else [BaselineKind(args.policy)]

    results = []
    for kind in kinds:
        arg_list = [(config, kind, seed) for seed in config.trial_seeds()]
        results.extend(run_trials(run_baseline, arg_list, jobs=args.jobs))
    _write_outputs(config, results, prefix="baseline_")
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    frame = read_results(args.csv)
    aggregate = aggregate_frame(frame)
    out = args.out or "."
    write_csv(aggregate, str(Path(out) / "aggregate.csv"))
    if args.plot:
        plot_boxplots(aggregate, out)
    return 0


def _add_run_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="Experiment JSON document (defaults fill omitted keys)")
    parser.add_argument("--seed", type=int, help="Seed base; trial k uses seed + k")
    parser.add_argument("--trials", type=int, help="Trials per mode (default 11)")
    parser.add_argument("--out", help="Output directory")
    parser.add_argument("--jobs", type=int, default=None,
                        help="Parallel trial processes (default FOGFORGE_JOBS or logical cores)")


def build_parser() -> argparse.ArgumentParser:
    parser = CliArgumentParser(prog="fogforge", description="Fog load-balancing lifelong RL experiments")
    parser.add_argument("--log", choices=["error", "warn", "info", "debug"],
                        help="Log level (overrides FOGFORGE_LOG)")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=CliArgumentParser)

    topology = sub.add_parser("topology", help="Generate and export a topology")
    _add_run_flags(topology)
    topology.add_argument("--output", help="Topology JSON path (default <out>/topology.json)")
    topology.set_defaults(func=cmd_topology)

    validate = sub.add_parser("validate", help="Run the built-in oracle checks")
    validate.add_argument("--horizon", type=float, default=MM1_HORIZON,
                          help="Simulated time per M/M/1 check")
    validate.add_argument("--out", help="Directory for validation.json")
    validate.set_defaults(func=cmd_validate)

    lifelong = sub.add_parser("lifelong", help="Run the lifelong train/infer/transfer protocol")
    _add_run_flags(lifelong)
    lifelong.add_argument("--mode", choices=[m.value for m in TransferMode] + ["all"])
    lifelong.add_argument("--representation", choices=[r.value for r in Representation])
    lifelong.add_argument("--checkpoints", action="store_true",
                          help="Write per-phase checkpoints and inference policies")
    lifelong.set_defaults(func=cmd_lifelong)

    baseline = sub.add_parser("baseline", help="Run non-learning placement policies")
    _add_run_flags(baseline)
    baseline.add_argument("--policy", choices=[k.value for k in BaselineKind] + ["all"], default="all")
    baseline.set_defaults(func=cmd_baseline)

    report = sub.add_parser("report", help="Aggregate result CSVs into box statistics")
    report.add_argument("csv", nargs="+", help="Per-trial result CSVs")
    report.add_argument("--out", help="Output directory (default current directory)")
    report.add_argument("--plot", action="store_true", help="Also write SVG box plots")
    report.set_defaults(func=cmd_report)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(level=args.log)
    if getattr(args, "jobs", None) is None and hasattr(args, "jobs"):
        args.jobs = settings.effective_jobs()

    try:
        return args.func(args)
    except FogForgeError as e:
        logger.error(e.message, extra={"extra_fields": e.to_dict()})
        return e.exit_code
    except FileNotFoundError as e:
        logger.error(str(e))
        return EXIT_USAGE
    except Exception as e:
        logger.error(f"Unexpected error: {e}", exc_info=True)
        return EXIT_RUNTIME


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
