"""
Command line interface for absorption-qfi.
Results go to stdout (or to files under --out); logs and error objects go to stderr.
"""

import argparse
import io
import json
import logging
import math
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import pandas as pd

from absorption_qfi import __version__
from absorption_qfi.core.configurations import GainSpec, eta_from_kappa, kappa_from_eta
from absorption_qfi.core.figures import FIGURES, reproduce_figure
from absorption_qfi.core.invariants import DEFAULT_DRAWS, run_invariants
from absorption_qfi.core.logging_config import setup_logging, setup_logging_from_config
from absorption_qfi.core.run_config import ESTIMAND_NAMES, RunConfig, load_config
from absorption_qfi.core.sweep import Flag, SweepResult, crossover, fit_from_sweep, run_sweep
from absorption_qfi.error_handling.exceptions import AbsorptionQfiError, NumericalError, ParameterError
from absorption_qfi.performance.caching import (
    CACHE_TYPE,
    get_cache_manager_or_none,
    initialize_cache_manager,
)

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML run configuration (defaults apply when omitted)")
    common.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="SECTION.KEY=VALUE",
        help="Override one configuration value; repeatable",
    )
    common.add_argument("--out", help="Output directory; results go to stdout when omitted")
    common.add_argument("--format", choices=["csv", "json"], default="csv", help="Result format (default: csv)")
    common.add_argument("--log-level", help="Logging level, overriding the configuration")
    common.add_argument("--workers", type=int, help="Sweep worker processes (0 uses every core)")

    parser = argparse.ArgumentParser(
        prog="absorption-qfi",
        description="Photon-number moments and quantum Fisher information for absorption estimation "
        "with undetected photons",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    for name, help_text in (
        ("moments", "Output moments of the configured model at one point"),
        ("qfi", "QFI of the configured model and access scenario at one point"),
    ):
        point = commands.add_parser(name, parents=[common], help=help_text)
        point.add_argument("--gain", type=float, required=True, help="Peak vacuum photon number N^P")
        where = point.add_mutually_exclusive_group(required=True)
        where.add_argument("--kappa", type=float, help="Idler decay rate (nm^-1)")
        where.add_argument("--eta", type=float, help="Idler transmission")

    commands.add_parser("sweep", parents=[common], help="Evaluate the configured quantity over the grid")

    cross = commands.add_parser("crossover", parents=[common], help="Decay rate where two sweeps cross")
    cross.add_argument("sweep_a", nargs="?", help="Numerator sweep CSV (default: a DL sweep of the config)")
    cross.add_argument("sweep_b", nargs="?", help="Denominator sweep CSV (default: an SU(1,1) sweep of the config)")

    fit = commands.add_parser("fit-alpha", parents=[common], help="Fit the approximate DL QFI coefficient")
    fit.add_argument("--from-csv", help="Inverse-ratio sweep CSV; a DL sweep of the config is run when omitted")

    reproduce = commands.add_parser("reproduce", parents=[common], help="Write the CSVs and plots of a figure")
    reproduce.add_argument("figure", choices=FIGURES)

    invariants = commands.add_parser("invariants", parents=[common], help="Run the randomized invariant suite")
    invariants.add_argument("--draws", type=int, default=DEFAULT_DRAWS, help="Draws per check")
    return parser


def _prepare(args: argparse.Namespace) -> RunConfig:
    overrides = list(args.overrides)
    if args.workers is not None:
        overrides.append(f"sweep.workers={args.workers}")
    cfg = load_config(args.config, overrides)

    logging_cfg = cfg.logging.model_dump()
    if args.log_level:
        logging_cfg["level"] = args.log_level
    setup_logging_from_config(logging_cfg)

    if cfg.cache.enabled and get_cache_manager_or_none() is None:
        initialize_cache_manager({"cache_type": CACHE_TYPE.LRU, "cache_max_size": cfg.cache.max_size})
    return cfg


def _emit_text(text: str, args: argparse.Namespace, name: str) -> None:
    if args.out:
        path = Path(args.out) / name
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as f:
            f.write(text)
        logger.info(f"Wrote {path}")
    else:
        sys.stdout.write(text)


def _records_text(records: List[Dict[str, Any]], fmt: str) -> str:
    if fmt == "json":
        return json.dumps(records, indent=2) + "\n"
    buffer = io.StringIO()
    pd.DataFrame(records).to_csv(buffer, index=False, lineterminator="\n")
    return buffer.getvalue()


def _flatten(values: Dict[str, Any]) -> Dict[str, Any]:
    flat: Dict[str, Any] = {}
    for key, value in values.items():
        if isinstance(value, list):
            flat[f"{key}_re"], flat[f"{key}_im"] = value
        else:
            flat[key] = value
    return flat


def _point(args: argparse.Namespace, cfg: RunConfig) -> Tuple[GainSpec, float]:
    length = cfg.grid.length_nm
    if args.gain < 0:
        raise ParameterError(f"--gain must be non-negative, got {args.gain}")
    if args.kappa is not None:
        kappa = args.kappa
    else:
        kappa = kappa_from_eta(args.eta, length)
    return GainSpec(args.gain), kappa


def cmd_moments(args: argparse.Namespace, cfg: RunConfig) -> int:
    gain, kappa = _point(args, cfg)
    values = cfg.to_scenario().describe(gain, kappa)
    if args.format == "json":
        _emit_text(json.dumps(values, indent=2) + "\n", args, "moments.json")
    else:
        _emit_text(_records_text([_flatten(values)], "csv"), args, "moments.csv")
    return 0


def cmd_qfi(args: argparse.Namespace, cfg: RunConfig) -> int:
    gain, kappa = _point(args, cfg)
    scenario = cfg.to_scenario()
    result = scenario.qfi(gain, scenario.epsilon_of(kappa))
    record = {
        "model": cfg.run.model,
        "access": cfg.run.access,
        "estimand": cfg.run.estimand,
        "gain_Npeak": gain.n_peak,
        "kappa_i_nm^-1": kappa,
        "eta_i": eta_from_kappa(kappa, cfg.grid.length_nm),
        "qfi": result.value,
        "method": result.method.value,
    }
    _emit_text(_records_text([record], args.format), args, f"qfi.{args.format}")
    return 0


def cmd_sweep(args: argparse.Namespace, cfg: RunConfig) -> int:
    result = run_sweep(cfg)
    name = f"sweep_{cfg.run.model}_{cfg.run.access}_{cfg.run.estimand}_{cfg.run.quantity}"
    if args.format == "json":
        payload = {"metadata": result.metadata, "rows": result.frame.to_dict(orient="records")}
        _emit_text(json.dumps(payload, indent=2) + "\n", args, f"{name}.json")
    else:
        _emit_text(result.to_csv_text(), args, f"{name}.csv")
    return 0


def cmd_crossover(args: argparse.Namespace, cfg: RunConfig) -> int:
    if (args.sweep_a is None) != (args.sweep_b is None):
        raise ParameterError("crossover takes either two sweep CSVs or none")
    if args.sweep_a is not None:
        res_a, res_b = SweepResult.read_csv(args.sweep_a), SweepResult.read_csv(args.sweep_b)
        length = float(res_a.metadata.get("length_nm", cfg.grid.length_nm))
    else:
        res_a = run_sweep(cfg.derive({"run.model": "dl"}))
        res_b = run_sweep(cfg.derive({"run.model": "su11"}))
        length = cfg.grid.length_nm
    points = crossover(res_a, res_b)
    records = [
        {
            "gain_Npeak": gain,
            "kappa_i_nm^-1": kappa,
            "eta_i": math.nan if math.isnan(kappa) else eta_from_kappa(kappa, length),
            "flag": (Flag.NO_CROSSOVER if math.isnan(kappa) else Flag.OK).value,
        }
        for gain, kappa in sorted(points.items())
    ]
    _emit_text(_records_text(records, args.format), args, f"crossover.{args.format}")
    return 0


def cmd_fit_alpha(args: argparse.Namespace, cfg: RunConfig) -> int:
    if args.from_csv:
        result = SweepResult.read_csv(args.from_csv)
        if result.metadata.get("quantity") != "inverse_ratio":
            raise ParameterError(f"{args.from_csv} is not an inverse-ratio sweep")
        estimand = ESTIMAND_NAMES[result.metadata.get("estimand", cfg.run.estimand)]
        length = float(result.metadata.get("length_nm", cfg.grid.length_nm))
    else:
        fit_cfg = cfg.derive({"run.model": "dl", "run.access": "all", "run.quantity": "inverse_ratio"})
        result = run_sweep(fit_cfg)
        estimand = fit_cfg.estimand
        length = fit_cfg.grid.length_nm
    report = fit_from_sweep(result, length, estimand)
    logger.info(f"Fitted alpha={report.alpha:.6g} (mean R^2 {report.r_squared:.6f})")
    record = {
        "estimand": estimand.value,
        "alpha": report.alpha,
        "r_squared": report.r_squared,
        "r_squared_per_gain": " ".join(repr(r) for r in report.r_squared_per_gain),
    }
    if args.format == "json":
        record["r_squared_per_gain"] = list(report.r_squared_per_gain)
    _emit_text(_records_text([record], args.format), args, f"fit_alpha.{args.format}")
    return 0


def cmd_reproduce(args: argparse.Namespace, cfg: RunConfig) -> int:
    written = reproduce_figure(args.figure, args.out or "out", cfg)
    for path in written:
        print(path)
    return 0


def cmd_invariants(args: argparse.Namespace, cfg: RunConfig) -> int:
    report = run_invariants(cfg.run.seed, args.draws)
    if args.out:
        report.write_csv(Path(args.out) / "invariants.csv")
    else:
        header = "".join(f"# {key}: {value}\n" for key, value in report.metadata.items())
        sys.stdout.write(header + report.frame.to_csv(index=False, lineterminator="\n"))
    if not report.passed:
        raise NumericalError(f"Invariant checks failed: {', '.join(report.failures())}")
    return 0


COMMANDS = {
    "moments": cmd_moments,
    "qfi": cmd_qfi,
    "sweep": cmd_sweep,
    "crossover": cmd_crossover,
    "fit-alpha": cmd_fit_alpha,
    "reproduce": cmd_reproduce,
    "invariants": cmd_invariants,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run one command and return its exit code (0 ok, 2 configuration, 3 numerical)."""
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level or "INFO")
    try:
        cfg = _prepare(args)
        return COMMANDS[args.command](args, cfg)
    except AbsorptionQfiError as e:
        logger.error(f"{e.__class__.__name__}: {e.message}")
        error = e.to_dict()
        if math.isinf(getattr(e, "value", 0.0)):
            error["data"]["value"] = "inf"
        print(json.dumps(error, default=str), file=sys.stderr)
        return e.exit_code
    except OSError as e:
        logger.error(f"I/O error: {e}")
        return 1


def main_cli() -> None:
    """Command line entry point."""
    try:
        sys.exit(main())
    except KeyboardInterrupt:
        logger.info("Interrupted by user")
        sys.exit(130)


if __name__ == "__main__":
    main_cli()
