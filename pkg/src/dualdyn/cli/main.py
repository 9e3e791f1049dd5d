"""Command-line entry point.

    dualdyn run --config scenario.ini [--seed N] [--threads K] [--out DIR]
    dualdyn run --config DIR/<stem>.manifest.json     # replay a previous run
    dualdyn list-scenarios                            # or: dualdyn --list-scenarios
    dualdyn check

Exit codes: 0 success, 1 configuration/validation error, 2 runtime error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
import time
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from .. import __version__
from ..errors import DualDynError
from . import scenarios
from .config import ConfigValidationError, ScenarioConfig, parse_config, validate

log = logging.getLogger("dualdyn")

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME = 0, 1, 2


def _cell(v: Any) -> str:
    # repr round-trips floats exactly
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return repr(v)
    if hasattr(v, "item"):
        return _cell(v.item())
    return str(v)


def _jsonable(v: Any) -> Any:
    if hasattr(v, "item"):
        v = v.item()
    if isinstance(v, float) and not math.isfinite(v):
        return repr(v)
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


def render_csv(table: scenarios.Table) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(table.columns)
    for row in table.rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def build_manifest(cfg: ScenarioConfig, table: scenarios.Table, duration: float, outputs: List[str]) -> Dict[str, Any]:
    return {
        "tool": "dualdyn",
        "version": __version__,
        "scenario": cfg.scenario,
        "seed": cfg.seed,
        "config": cfg.raw,
        "wall_clock_seconds": duration,
        "provenance": _jsonable(table.provenance),
        "summary": _jsonable(table.summary),
        "outputs": outputs,
    }


def run_scenario(cfg: ScenarioConfig, out_dir: Path, threads: int = 1) -> Dict[str, Any]:
    """Run one scenario and write its table and manifest into ``out_dir``."""
    start = time.perf_counter()
    table = scenarios.run(cfg, threads)
    duration = time.perf_counter() - start
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest_path = out_dir / f"{cfg.stem}.manifest.json"
    if cfg.format == "csv":
        data_path = out_dir / f"{cfg.stem}.csv"
        data_path.write_text(render_csv(table), encoding="utf-8")
    else:
        data_path = out_dir / f"{cfg.stem}.json"
    manifest = build_manifest(cfg, table, duration, [data_path.name, manifest_path.name])
    if cfg.format == "json":
        body = {
            "columns": table.columns,
            "rows": [[_jsonable(v) for v in r] for r in table.rows],
            "summary": manifest["summary"],
            # timing lives only in the manifest file so this file is reproducible
            "manifest": {k: v for k, v in manifest.items() if k not in ("summary", "wall_clock_seconds")},
        }
        data_path.write_text(json.dumps(body, indent=2) + "\n", encoding="utf-8")
    manifest_path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return manifest


def load_config(path: Path) -> ScenarioConfig:
    text = path.read_text(encoding="utf-8")
    if path.suffix == ".json":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigValidationError([("<document>", f"invalid JSON manifest: {exc}")]) from None
        if not isinstance(doc, dict) or "config" not in doc:
            raise ConfigValidationError([("config", "manifest has no config section")])
        return validate(doc["config"])
    return parse_config(text)


def _cmd_run(args) -> int:
    try:
        cfg = load_config(Path(args.config))
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
    except ConfigValidationError as exc:
        for key, msg in exc.problems:
            print(f"error: {key}: {msg}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: cannot read config {args.config}: {exc.strerror}", file=sys.stderr)
        return EXIT_VALIDATION
    out_dir = Path(args.out) if args.out else Path(".")
    try:
        manifest = run_scenario(cfg, out_dir, threads=args.threads)
    except DualDynError as exc:
        print(f"error: {cfg.scenario}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"error: cannot write to {exc.filename or out_dir}: {exc.strerror}", file=sys.stderr)
        return EXIT_RUNTIME
    for name in manifest["outputs"]:
        print(out_dir / name)
    for k, v in manifest["summary"].items():
        print(f"{k} = {v}")
    return EXIT_OK


def _cmd_list(_args=None) -> int:
    for name in scenarios.scenario_names():
        print(f"{name:20s} {scenarios.DESCRIPTIONS[name]}")
    return EXIT_OK


def _cmd_check(_args=None) -> int:
    from . import selfcheck

    ok = True
    for name, passed, detail in selfcheck.run_checks():
        print(f"{'PASS' if passed else 'FAIL'} {name}: {detail}")
        ok &= passed
    return EXIT_OK if ok else EXIT_RUNTIME


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dualdyn", description="Dual Kolmogorov dynamics and chameleon measurement models")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("--list-scenarios", action="store_true", help="list scenarios and exit")
    sub = ap.add_subparsers(dest="command")
    r = sub.add_parser("run", help="run a scenario from a config file or manifest")
    r.add_argument("--config", required=True)
    r.add_argument("--seed", type=int, default=None, help="override the config seed")
    r.add_argument("--threads", type=int, default=1, help="worker threads for Monte Carlo blocks")
    r.add_argument("--out", default=None, help="output directory (default: current)")
    sub.add_parser("list-scenarios", help="list available scenarios")
    sub.add_parser("check", help="run the oracle self-test suite")
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.list_scenarios or args.command == "list-scenarios":
        return _cmd_list()
    if args.command == "run":
        if args.threads < 1:
            print("error: --threads must be >= 1", file=sys.stderr)
            return EXIT_VALIDATION
        if args.seed is not None and not 0 <= args.seed < 2**64:
            print("error: --seed must be a 64-bit unsigned integer", file=sys.stderr)
            return EXIT_VALIDATION
        return _cmd_run(args)
    if args.command == "check":
        return _cmd_check()
    ap.print_help()
    return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
