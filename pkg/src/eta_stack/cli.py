"""Command line: ``eta-stack <command> [options]``.

Exit codes: 0 success, 1 other fatal error, 2 unknown command or bad
usage, 3 invalid configuration, 4 missing upstream artifact.
"""

from __future__ import annotations

import argparse
import logging
import os
import shutil
import sys
from contextlib import contextmanager
from pathlib import Path

from . import pipeline
from .config import PROFILES, ConfigError, from_dict, load_config, profile

log = logging.getLogger("eta_stack")

EXIT_OK, EXIT_FATAL, EXIT_USAGE, EXIT_CONFIG, EXIT_MISSING = 0, 1, 2, 3, 4
COMMANDS = ("prepare", "train", "evaluate", "explain", "join", "scenario", "export")


class LockedError(RuntimeError):
    pass


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON or YAML run configuration")
    common.add_argument("--profile", choices=PROFILES, help="built-in profile when no --config is given")
    common.add_argument("--seed", type=int, help="override the configured seed")
    common.add_argument("--out", type=Path, help="output directory (overrides the config)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="eta-stack", description="Stacked ETA ensembles and their explanations.")
    sub = p.add_subparsers(dest="command", metavar="command")
    sub.required = True
    prep = sub.add_parser("prepare", parents=[common], help="ingest, filter and split trips")
    prep.add_argument("--synthetic", action="store_true", help="generate the synthetic trip set first")
    sub.add_parser("train", parents=[common], help="fit level-1 models and every level-2 alternative")
    sub.add_parser("evaluate", parents=[common], help="test-split metrics for all models")
    ex = sub.add_parser("explain", parents=[common], help="explain level-1, level-2 and the whole ensemble")
    ex.add_argument("--sample", type=int, action="append", help="test trip id (repeatable); default: scenario trips")
    ex.add_argument("--method", choices=("lime", "shap"), help="default: every configured method")
    jn = sub.add_parser("join", parents=[common], help="combine explanations with JM1/JM2/JM3 and BL")
    jn.add_argument("--jm", choices=pipeline.JM_CHOICES, action="append")
    sub.add_parser("scenario", parents=[common], help="scenario samples and separation reports")
    sub.add_parser("export", parents=[common], help="long-format attribution tables per scenario cohort")
    return p


def resolve_config(args):
    if args.config is not None:
        cfg = load_config(args.config)
    else:
        cfg = from_dict({"profile": args.profile or "paper-nyc"})
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.out = str(args.out)
    return cfg.validate()


@contextmanager
def locked(out: Path):
    out.mkdir(parents=True, exist_ok=True)
    lock = out / ".lock"
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise LockedError(f"{out} is in use by another run (remove {lock} if stale)") from None
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        yield
    finally:
        lock.unlink(missing_ok=True)


def publish(stage: Path, target: Path) -> None:
    """Swap ``stage`` into place as ``target``, replacing any earlier version."""
    old = target.with_name(f".old-{target.name}")
    if old.exists():
        shutil.rmtree(old)
    if target.exists():
        target.rename(old)
    stage.rename(target)
    if old.exists():
        shutil.rmtree(old)


def run(command: str, cfg, **opts) -> dict:
    out = Path(cfg.out)
    with locked(out):
        stage = out / f".staging-{command}"
        if stage.exists():
            shutil.rmtree(stage)
        stage.mkdir()
        ctx = pipeline.Context(cfg, out, stage)
        try:
            if command == "prepare":
                summary = pipeline.prepare(ctx, synthetic=opts.get("synthetic", False))
            elif command == "train":
                summary = pipeline.train(ctx)
            elif command == "evaluate":
                summary = pipeline.evaluate(ctx)
            elif command == "explain":
                methods = [opts["method"]] if opts.get("method") else None
                summary = pipeline.explain_stage(ctx, opts.get("sample"), methods)
            elif command == "join":
                summary = pipeline.join_stage(ctx, opts.get("jm"))
            elif command == "scenario":
                summary = pipeline.scenario_stage(ctx)
            elif command == "export":
                summary = pipeline.export_stage(ctx)
            else:
                raise ValueError(f"unknown command {command!r}")
        except BaseException:
            shutil.rmtree(stage, ignore_errors=True)
            raise
        publish(stage, out / pipeline.STAGE_OUTPUT[command])
    return summary


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = resolve_config(args)
    except ConfigError as exc:
        print(f"eta-stack: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    opts = {k: getattr(args, k) for k in ("synthetic", "sample", "method", "jm") if hasattr(args, k)}
    try:
        summary = run(args.command, cfg, **opts)
    except pipeline.MissingArtifactError as exc:
        print(f"eta-stack: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except ConfigError as exc:
        print(f"eta-stack: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - report and exit non-zero
        print(f"eta-stack: {args.command} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        if args.verbose:
            raise
        return EXIT_FATAL
    print(f"{args.command}: " + ", ".join(f"{k}={v}" for k, v in summary.items()))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
