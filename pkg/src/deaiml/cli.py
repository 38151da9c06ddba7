"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__, dea
from .config import load_config
from .errors import ConfigError, DataError, NumericError
from .pipeline import STAGES, Pipeline, StageError

log = logging.getLogger("deaiml")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, help="TOML configuration file")
    p.add_argument("--seed", type=int, help="override the master seed")
    p.add_argument("--reps", type=int, help="override the bootstrap replications")
    p.add_argument("--out", help="override the output directory")
    p.add_argument("--jobs", type=int, help="worker processes (results do not depend on it)")
    p.add_argument("--force", action="store_true", help="recompute even when cached outputs are current")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="deaiml", description="Frontier efficiency scores and their drivers.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, text in (("dea", "efficiency scores with bootstrap bias correction"),
                       ("sdtest", "stochastic dominance tests between the groups"),
                       ("outliers", "order-alpha outlier screen and trimmed rerun"),
                       ("explain", "classifier grid search and SHAP explanations")):
        p = sub.add_parser(name, help=text)
        _common(p)
        if name == "dea":
            p.add_argument("--dump-lp", metavar="ID", action="append", default=[],
                           help="also write the envelopment LP of this unit (per frontier) in LP format")
    p = sub.add_parser("pipeline", help="run every stage in order, reusing cached outputs")
    _common(p)
    p.add_argument("--stage", action="append", choices=STAGES,
                   help="run only this stage (repeatable); upstream outputs must be current")
    p = sub.add_parser("report", help="render the stage outputs as a markdown report")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p = sub.add_parser("simulate", help="write a synthetic panel and a matching configuration")
    p.add_argument("directory")
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    return ap


def _pipeline(args) -> Pipeline:
    cfg = load_config(args.config).with_overrides(
        seed=args.seed, reps=getattr(args, "reps", None), out=args.out, jobs=getattr(args, "jobs", None))
    return Pipeline(cfg)


def _dump_lp(pipe: Pipeline, ids) -> None:
    d = pipe.out / "debug"
    d.mkdir(parents=True, exist_ok=True)
    panel = pipe.panel
    for uid in ids:
        if uid not in panel.ids:
            raise DataError(f"--dump-lp: unknown unit id {uid!r}")
        group = panel.records[panel.ids.index(uid)].group
        sub = pipe.group_panel(group)
        for fr in pipe.cfg.frontiers:
            X, Y = pipe.spec(fr, sub).matrices(sub)
            lp = dea.envelopment_program(X, Y, sub.ids.index(uid), fr.rts)
            path = d / f"lp_{fr.name}_{uid}.lp"
            path.write_text(lp.to_lp_text(f"{fr.name} envelopment program of {uid} within {group}"),
                            encoding="utf-8")
            log.info("wrote %s", path)


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "simulate":
            from .synth import write_synthetic
            data, conf = write_synthetic(args.directory, n=args.n, seed=args.seed)
            print(f"wrote {data} and {conf}")
            return EXIT_OK
        if args.command == "report":
            from .report import render_report
            cfg = load_config(args.config).with_overrides(out=args.out)
            path = Path(cfg.out) / "report.md"
            path.write_text(render_report(cfg, cfg.out), encoding="utf-8")
            print(f"wrote {path}")
            return EXIT_OK
        pipe = _pipeline(args)
        stages = STAGES if args.command == "pipeline" else (args.command,)
        if args.command == "pipeline" and args.stage:
            stages = tuple(args.stage)
        manifest = pipe.run(stages, force=args.force)
        if args.command == "dea" and args.dump_lp:
            _dump_lp(pipe, args.dump_lp)
        for name, rec in manifest.stages.items():
            state = "cached" if rec.cached else f"{rec.seconds:.1f}s"
            print(f"{name}: {state}")
        print(f"manifest {manifest.manifest_hash[:16]} -> {pipe.out / 'manifest.json'}")
        return EXIT_OK
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _code(exc.cause)
    except (ConfigError, DataError, NumericError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _code(exc)


def _code(exc: Exception) -> int:
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, NumericError):
        return EXIT_NUMERIC
    return EXIT_DATA


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
