"""Command-line front end: ``subfilter <verb> [options]``.

Exit status is 0 on success, 1 on invalid input and 2 on runtime failure.
A diverged filter is a result, not a failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .errors import SubfilterError, ValidationError
from .harness.config import SCHEMA_VERSION, config_keys_help, load_config, parse_overrides
from .harness.experiment import (RECORD_SCHEMA, fit_full_basis, read_records, run_experiment, snapshot_set,
                                 twin_data, write_records)
from .harness.report import write_report
from .harness.rokf import rokf_demo
from .harness.sweep import default_jobs, grid_search

VERBS = ("snapshots", "fit-basis", "gen-data", "run", "sweep", "rokf-demo", "report")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.format_usage()}{self.prog}: {message}")


def _common(p: argparse.ArgumentParser, config: bool = True) -> None:
    if config:
        p.add_argument("--config", help="TOML experiment file")
        p.add_argument("--override", "-o", action="append", default=[], metavar="KEY=VALUE",
                       help="set a config key (repeatable)")
        p.add_argument("--seed", type=int, help="master seed; beats the config file and overrides")
        p.add_argument("--cache", help="artifact cache directory (default: <out>/cache)")
    p.add_argument("--out", default="out", help="output directory (default: out)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="subfilter", description="Subspace-constrained Gaussian filters and twin experiments.")
    parser.add_argument("--version", action="store_true", help="print version and schema identifiers")
    sub = parser.add_subparsers(dest="verb", metavar="VERB", parser_class=_Parser)
    epilog = "configuration keys:\n" + config_keys_help()
    fmt = argparse.RawDescriptionHelpFormatter
    helps = {
        "snapshots": "write the snapshot run for the configured basis to snapshots.csv",
        "fit-basis": "fit the configured basis and write basis.npz and basis_fit.json",
        "gen-data": "write the truth trajectory and observations to twin.npz",
        "run": "run one experiment and write run.jsonl",
        "sweep": "run a Cartesian grid of experiments and write sweep.jsonl",
        "rokf-demo": "2-D comparison of covariance and precision projections",
        "report": "aggregate run records into summary and figure CSV files",
    }
    ps = {v: sub.add_parser(v, help=helps[v], description=helps[v], epilog=epilog, formatter_class=fmt)
          for v in VERBS}
    for v in ("snapshots", "fit-basis", "gen-data", "run", "sweep"):
        _common(ps[v])
    ps["sweep"].add_argument("--grid", "-g", action="append", default=[], metavar="KEY=V1,V2,...",
                             help="grid axis (repeatable)")
    ps["sweep"].add_argument("--jobs", "-j", type=int, default=default_jobs(),
                             help="worker processes (default: logical cores)")
    _common(ps["rokf-demo"], config=False)
    ps["rokf-demo"].add_argument("--trials", type=int, default=1000)
    ps["rokf-demo"].add_argument("--seed", type=int, default=1)
    ps["rokf-demo"].add_argument("--q", type=float, default=0.1, help="model error variance, Q = q I")
    _common(ps["report"], config=True)
    ps["report"].add_argument("records", nargs="+", help="JSON-lines run record files")
    ps["report"].add_argument("--no-timing", action="store_true",
                              help="leave wall_ms empty so the summary is reproducible byte for byte")
    return parser


def _config(args):
    overrides = parse_overrides(args.override)
    if args.seed is not None:
        overrides["seed"] = args.seed
    return load_config(args.config, overrides)


def _dirs(args) -> tuple[Path, Path]:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cache = Path(args.cache) if getattr(args, "cache", None) else out / "cache"
    return out, cache


def _parse_grid(items) -> dict:
    grid = {}
    for item in items:
        if "=" not in item:
            raise ValidationError(f"grid axis {item!r} is not KEY=V1,V2,...")
        key, values = item.split("=", 1)
        key = key.strip()
        grid[key] = [parse_overrides([f"{key}={v}"])[key] for v in values.split(",")]
    return grid


def _atomic_text(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    tmp.replace(path)


def _dispatch(args) -> int:
    if args.verb == "rokf-demo":
        out, _ = _dirs(args)
        if args.trials < 1:
            raise ValidationError("--trials must be positive")
        rec = rokf_demo(args.seed, args.trials, args.q)
        _atomic_text(out / "rokf_demo.json", rec.to_json() + "\n")
        status = "PASS" if rec.passed else "FAIL"
        print(f"{status} marginal >= conditional over {args.trials} trials (min gap {rec.min_gap:.3e})")
        return 0 if rec.passed else 2
    if args.verb == "report":
        out, cache = _dirs(args)
        records = [r for path in args.records for r in read_records(path)]
        if not records:
            raise ValidationError("no run records found")
        paths = write_report(records, out, cache, timing=not args.no_timing)
        for p in paths:
            print(p)
        return 0

    cfg = _config(args)
    out, cache = _dirs(args)
    if args.verb == "snapshots":
        snaps = snapshot_set(cfg, cache)
        snaps.save_csv(out / "snapshots.csv")
        print(out / "snapshots.csv")
    elif args.verb == "fit-basis":
        basis, info = fit_full_basis(cfg, snapshot_set(cfg, cache))
        basis.truncate(cfg.r).save(out / "basis.npz")
        _atomic_text(out / "basis_fit.json", json.dumps(info, sort_keys=True) + "\n")
        print(out / "basis.npz")
    elif args.verb == "gen-data":
        twin_data(cfg, cache).save(out / "twin.npz")
        print(out / "twin.npz")
    elif args.verb == "run":
        rec = run_experiment(cfg, cache)
        write_records(out / "run.jsonl", [rec])
        s = rec.summary
        print(f"{s['filter']} basis={s['basis']} r={s['r']} mean_rmse={s['mean_rmse']:.6g} "
              f"diverged={str(s['diverged']).lower()} -> {out / 'run.jsonl'}")
    elif args.verb == "sweep":
        grid = _parse_grid(args.grid)
        if not grid:
            raise ValidationError("sweep needs at least one --grid axis")
        records = grid_search(cfg, grid, jobs=args.jobs, cache_dir=cache)
        write_records(out / "sweep.jsonl", records)
        print(f"{len(records)} runs -> {out / 'sweep.jsonl'}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.version:
            print(f"subfilter {__version__} (config schema {SCHEMA_VERSION}, record schema {RECORD_SCHEMA})")
            return 0
        if args.verb is None:
            raise _UsageError(parser.format_usage() + "subfilter: a verb is required")
        return _dispatch(args)
    except _UsageError as exc:
        print(f"ERROR(usage): {exc}", file=sys.stderr)
        return 1
    except ValidationError as exc:
        print(f"ERROR({exc.kind}): {exc}", file=sys.stderr)
        return 1
    except SubfilterError as exc:
        print(f"ERROR({exc.kind}): {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"ERROR(io): {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
