"""Command-line entry point: besselharm <command> [--config INI] [--out DIR] ...

Config files are INI.  A [grid] section sets lam, grid_decades,
points_per_decade and time_margin_decades; a section named after the command
(for example [scan-t11]) sets that command's fields.  List values are comma
separated; weight pairs are written b1:b2; per-operator kernels use keys
kernel.maximal, kernel.square and kernel.variation.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import dataclasses
import json
import logging
import sys
from pathlib import Path

from . import experiments as ex

COMMANDS = {
    "scan-t11": (ex.ScanT11Config, ex.cmd_scan_t11),
    "scan-t12": (ex.ScanT12Config, ex.cmd_scan_t12),
    "kernel-report": (ex.KernelReportConfig, ex.cmd_kernel_report),
    "sparse-demo": (ex.SparseDemoConfig, ex.cmd_sparse_demo),
    "corollaries": (ex.CorollaryConfig, ex.cmd_corollaries),
}


class ConfigError(ValueError):
    pass


def _coerce(text: str, default, name: str):
    text = text.strip()
    try:
        if isinstance(default, bool):
            return text.lower() in ("1", "true", "yes", "on")
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
        if isinstance(default, tuple):
            items = [s.strip() for s in text.split(",") if s.strip()]
            if default and isinstance(default[0], tuple):
                return tuple(tuple(float(v) for v in s.split(":")) for s in items)
            if default and isinstance(default[0], (int, float)):
                return tuple(float(s) for s in items)
            return tuple(items)
        if default is None:
            try:
                return float(text)
            except ValueError:
                return text
        return text
    except ValueError as e:
        raise ConfigError(f"bad value for {name!r}: {text!r}") from e


def _apply(obj, items: dict, section: str):
    fields = {f.name for f in dataclasses.fields(obj)}
    for key, raw in items.items():
        if key.startswith("kernel.") and "kernels" in fields:
            obj.kernels[key.split(".", 1)[1]] = raw.strip()
            continue
        if key not in fields or key == "grid":
            raise ConfigError(f"unknown key {key!r} in [{section}]")
        setattr(obj, key, _coerce(raw, getattr(obj, key), key))


def load_config(command: str, path: str | None, overrides: dict):
    cls, _ = COMMANDS[command]
    cfg = cls()
    parser = configparser.ConfigParser(interpolation=None)
    if path:
        if not parser.read(path):
            raise ConfigError(f"cannot read config {path}")
    grid = getattr(cfg, "grid", None)
    if parser.has_section("grid"):
        target = grid if grid is not None else cfg
        items = dict(parser.items("grid"))
        if grid is None:
            # commands without a grid (kernel-report) only take lam here
            items = {k: v for k, v in items.items() if k == "lam"}
        _apply(target, items, "grid")
    if parser.has_section(command):
        _apply(cfg, dict(parser.items(command)), command)
    if grid is not None:
        if overrides.get("grid_decades") is not None:
            grid.grid_decades = overrides["grid_decades"]
        if overrides.get("points_per_decade") is not None:
            grid.points_per_decade = overrides["points_per_decade"]
    if overrides.get("jobs") is not None and hasattr(cfg, "jobs"):
        cfg.jobs = overrides["jobs"]
    return cfg


def write_report(rep, out: Path, cfg):
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "report.csv", "w", newline="") as fh:
        fh.write(f"# besselharm {rep.command} schema={ex.SCHEMA_VERSION}; {ex.CONSTANT_NOTE}\n")
        w = csv.writer(fh)
        w.writerow(rep.columns)
        for row in rep.rows:
            w.writerow([_plain(v) for v in row])
    summary = dict(rep.summary)
    summary["config"] = dataclasses.asdict(cfg)
    (out / "summary.json").write_text(json.dumps(_jsonable(summary), indent=2, sort_keys=True) + "\n")
    fam = getattr(rep, "family", None)
    if fam is not None:
        fam.dump_jsonl(out / "sparse.jsonl", ex.LambdaSpace(cfg.grid.lam), rep.f)


def _plain(v):
    if hasattr(v, "item"):
        return v.item()
    return v


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if hasattr(obj, "item"):
        return obj.item()
    if isinstance(obj, float) and obj != obj:
        return None
    return obj


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="besselharm", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", help="INI config file")
    ap.add_argument("--out", default="runs/out", help="output directory")
    ap.add_argument("--grid-decades", type=float, help="decades spanned by the x grid (centred at 1)")
    ap.add_argument("--points-per-decade", type=float, help="x grid density")
    ap.add_argument("--jobs", type=int, help="worker processes")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    logger = logging.getLogger("besselharm")
    logger.setLevel(logging.INFO)
    handler = logging.FileHandler(out / "run.log", mode="w")
    handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(message)s"))
    logger.addHandler(handler)
    console = logging.StreamHandler(sys.stderr)
    console.setFormatter(logging.Formatter("%(message)s"))
    logger.addHandler(console)
    try:
        try:
            cfg = load_config(args.command, args.config, {"grid_decades": args.grid_decades,
                                                         "points_per_decade": args.points_per_decade,
                                                         "jobs": args.jobs})
        except ConfigError as e:
            logger.error("config error: %s", e)
            return 2
        logger.info("%s: %s", args.command, ex.CONSTANT_NOTE)
        _, run = COMMANDS[args.command]
        try:
            rep = run(cfg)
        except ValueError as e:
            logger.error("%s failed: %s", args.command, e)
            return 2
        write_report(rep, out, cfg)
        logger.info("%s %s", args.command, "PASS" if rep.passed else "FAIL")
        return 0 if rep.passed else 1
    finally:
        logger.removeHandler(handler)
        logger.removeHandler(console)
        handler.close()


if __name__ == "__main__":
    sys.exit(main())
