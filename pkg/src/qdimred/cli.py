"""Command line entry point: ``qdimred run|reproduce|encode|info``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, load_config
from .data import DataError, MissingResourceError, load_builtin, read_matrix_csv, write_matrix_csv
from .experiments import TABLE_DATASETS, ExperimentDivergence, canonical_config, run_experiment
from .models.pqae import PqaeModel, pqae_encode
from .serialize import CheckpointError, load_checkpoint

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED, EXIT_MISSING = 0, 2, 3, 4

log = logging.getLogger("qdimred")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="qdimred", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run an experiment from a TOML config (or a report.json)")
    run.add_argument("config")
    run.add_argument("--out", help="output directory (overrides [output].dir)")

    rep = sub.add_parser("reproduce", help="run the canonical config for a table or figure")
    rep.add_argument("artifact", choices=sorted(TABLE_DATASETS))
    rep.add_argument("--dataset", help="single column; default runs every available one")
    rep.add_argument("--seeds", type=int, help="use seeds 0..K-1")
    rep.add_argument("--out", default="runs", help="output directory (default: runs)")

    enc = sub.add_parser("encode", help="apply a trained PQAE encoder to a CSV")
    enc.add_argument("--checkpoint", required=True)
    enc.add_argument("--input", required=True)
    enc.add_argument("--output", required=True)

    info = sub.add_parser("info", help="describe a bundled resource")
    info.add_argument("what", choices=["dataset"])
    info.add_argument("name")
    return p


def _print_report(report: dict) -> None:
    title = report["experiment"] + "/" + (report.get("variant") or report["dataset"])
    print(f"{title}: {report['wall_clock_s']:.1f}s")
    for row in report["rows"]:
        extra = f" latent={row['latent_dim']}" if "latent_dim" in row else ""
        print(f"  {row['model']:<16} {row['metric']}={row['best']:.6g} (seed {row['best_seed']}){extra}")


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    out = Path(args.out or cfg.output.dir)
    _print_report(run_experiment(cfg, out))
    return EXIT_OK


def _cmd_reproduce(args) -> int:
    if args.seeds is not None and args.seeds < 1:
        raise ConfigError("--seeds must be >= 1")
    columns = [args.dataset] if args.dataset else list(TABLE_DATASETS[args.artifact])
    out = Path(args.out)
    status = EXIT_OK
    for col in columns:
        try:
            cfg = canonical_config(args.artifact, col)
            if args.seeds is not None:
                cfg = cfg.replace(training={"seeds": list(range(args.seeds))})
            _print_report(run_experiment(cfg, out / args.artifact / col))
        except MissingResourceError as exc:
            if args.dataset:
                raise
            print(f"{args.artifact}/{col}: skipped ({exc})", file=sys.stderr)
            status = EXIT_MISSING
    return status


def _cmd_encode(args) -> int:
    model, scaler, _ = load_checkpoint(args.checkpoint)
    if not isinstance(model, PqaeModel):
        raise CheckpointError(f"{args.checkpoint} does not hold a PQAE model")
    path = Path(args.input)
    if not path.exists():
        raise MissingResourceError(f"input {path} not found")
    X = read_matrix_csv(path)
    if X.shape[1] != model.encoder.in_dim:
        raise DataError(f"input has {X.shape[1]} columns, the encoder expects {model.encoder.in_dim}")
    if scaler is not None:
        X = scaler.transform(X)
    Z = pqae_encode(model, X)
    write_matrix_csv(np.atleast_2d(Z), args.output, prefix="q")
    return EXIT_OK


def _cmd_info(args) -> int:
    print(load_builtin(args.name).summary())
    return EXIT_OK


COMMANDS = {"run": _cmd_run, "reproduce": _cmd_reproduce, "encode": _cmd_encode, "info": _cmd_info}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ExperimentDivergence as exc:
        print(f"error: training diverged: {exc} (partial report: {exc.report_path})", file=sys.stderr)
        return EXIT_DIVERGED
    except (FileNotFoundError, MissingResourceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except (ConfigError, DataError, CheckpointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
