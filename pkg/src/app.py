import argparse
import json
import logging
import os
import sys
from pathlib import Path

from dotenv import load_dotenv
from pydantic import ValidationError

load_dotenv()

from src.harness import (
    ConfigError,
    RUN_ERRORS,
    build_bundle,
    expand_grid,
    fit_scaling,
    load_config,
    run_single,
    run_sweep,
    tables_report,
)
from src.models import ModelError, check_compliance, make_sequence, maximal_mixing_violation, sector_projectors
from src.settings import ENV_LOG_LEVEL

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_RUN_FAILED = 1
EXIT_BAD_CONFIG = 2


def configure_logging(verbose: bool):
    level = logging.DEBUG if verbose else os.getenv(ENV_LOG_LEVEL, "INFO").upper()
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def cmd_run(args) -> int:
    config = load_config(args.config)
    results, index = run_single(config, args.output)
    for result in results:
        print(result.csv_path)
    logger.info(f"{len(results)} run(s) done, index at {index}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    config = load_config(args.config)
    if args.workers is not None:
        config = config.model_copy(update={"workers": args.workers})
    results, index = run_sweep(config, args.output)
    print(index)
    logger.info(f"Sweep finished: {len(results)} run(s)")
    return EXIT_OK


def cmd_fit_scaling(args) -> int:
    fit = fit_scaling(args.index)
    path = Path(args.index).parent / "scaling_fit.json"
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(fit.to_dict(), f, indent=2)
        f.write("\n")
    if fit.beta_hat is not None:
        print(f"beta_hat = {fit.beta_hat:.4f} +- {fit.stderr:.4f} (r^2 = {fit.r_squared:.4f})")
    else:
        print(f"slope ~ gamma^{fit.exponent:.4f}, max linearity deviation {fit.linearity_deviation:.2%}")
    return EXIT_OK


def cmd_tables(args) -> int:
    print(tables_report())
    return EXIT_OK


def cmd_validate(args) -> int:
    """Check a config without evolving anything."""
    config = load_config(args.config)
    bundle = build_bundle(config)
    print(f"model {bundle.model}, L={bundle.L}, dim={bundle.dim}, {len(bundle.jump_ops)} jump operators")
    print(f"grid points: {len(expand_grid(config))}")
    print(f"violation at maximal mixing: {maximal_mixing_violation(bundle):.6g}")
    if config.protection.kind == "linear":
        sequence = make_sequence(config.protection.sequence, config.model.L, config.protection.coefficients)
        sectors = [s.sector for s in sector_projectors(bundle, config.protection.source)]
        report = check_compliance(sequence, sectors, bundle.protection_target(config.protection.source))
        print(f"sequence {sequence.kind}: {'compliant' if report.compliant else 'noncompliant'}")
        for sector in report.offending:
            print(f"  resonant sector {sector}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Gauge-protection dynamics of small lattice gauge theories under 1/f noise")
    parser.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Run every point of a config sequentially")
    run.add_argument("config", help="TOML config, or a run's JSON metadata")
    run.add_argument("--output", help="Output directory (default: LGP_OUTPUT_ROOT or output.root)")
    run.set_defaults(func=cmd_run)

    sweep = sub.add_parser("sweep", help="Run the gamma x V x beta grid in parallel")
    sweep.add_argument("config")
    sweep.add_argument("--output")
    sweep.add_argument("--workers", type=int, help="Parallel workers (overridden by LGP_WORKERS)")
    sweep.set_defaults(func=cmd_sweep)

    fit = sub.add_parser("fit-scaling", help="Fit early-time violation slopes of a finished sweep")
    fit.add_argument("index", help="index.csv of the sweep")
    fit.set_defaults(func=cmd_fit_scaling)

    tables = sub.add_parser("tables", help="Print the eigenvalue and sector-weight tables")
    tables.set_defaults(func=cmd_tables)

    validate = sub.add_parser("validate", help="Validate a config and report compliance")
    validate.add_argument("config")
    validate.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.verbose)
    try:
        return args.func(args)
    except (ConfigError, ValidationError, ModelError) as e:
        logger.error(f"Invalid configuration: {e}")
        return EXIT_BAD_CONFIG
    except RUN_ERRORS as e:
        logger.error(f"Run failed: {e}")
        return EXIT_RUN_FAILED


if __name__ == "__main__":
    sys.exit(main())
