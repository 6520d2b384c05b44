"""Benchmark command line: price, greeks, and sweep (bench) subcommands.

Precedence for every knob: command-line flag > config-file value > default.
The config file is flat ``key = value`` text (``#`` comments); keys are the
long flag names with ``-`` replaced by ``_``.  A manifest recording every
resolved setting is emitted alongside the results: as comment lines in table
mode, on stderr in csv mode (keeping stdout machine-clean), and flattened
into each row in jsonl mode.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import asdict, dataclass

import numpy as np

from . import __version__, engine
from .errors import (ConfigInvalid, HestonError, InvalidParams,
                     UnsupportedProduct, UsageError, ValidationError)
from .model import DEFAULT_PARAMS, HestonParams, McSummary, OptionSpec, SimConfig
from .rng import root_key, sobol_points, uniforms_at

CSV_HEADER = "scheme,sampler,paths,steps,runs,mean,std,wall_ms_mean"

_DEFAULTS = dict(
    scheme="exact", sampler="pseudo", product="european", right="call",
    paths=2048, steps=128, runs=30, seed=0, parallelism="auto",
    sobol_highdim_ack=False, s0=100.0, strike=100.0, maturity=1.0,
    averaging_times="0.25,0.5,0.75,1", format="table", emit_points=None,
    **DEFAULT_PARAMS,
)

_USAGE_ERRORS = (UsageError, ValidationError, ConfigInvalid, InvalidParams,
                 UnsupportedProduct)


@dataclass
class RunManifest:
    """Every resolved setting of one invocation (the reproducibility record)."""

    params: HestonParams
    spec: OptionSpec
    config: SimConfig
    version: str
    timestamp: str
    out_format: str
    emit_points: str | None = None

    def flat(self) -> dict:
        d = {}
        d.update(asdict(self.params))
        d.update({k: (list(v) if isinstance(v, tuple) else v)
                  for k, v in asdict(self.spec).items()})
        d.update(asdict(self.config))
        d["version"] = self.version
        d["timestamp"] = self.timestamp
        d["format"] = self.out_format
        return d


def _add_common_flags(p: argparse.ArgumentParser, lists: bool = False):
    sc = p.add_argument
    if lists:
        sc("--scheme", help="comma list of exact|euler|milstein")
        sc("--paths", help="comma list of path counts")
        sc("--steps", help="comma list of step counts")
    else:
        sc("--scheme", choices=("exact", "euler", "milstein"))
        sc("--paths", type=int)
        sc("--steps", type=int)
    sc("--sampler", choices=("pseudo", "sobol"))
    sc("--sobol-highdim-ack", action="store_const", const=True, default=None)
    sc("--product", choices=("european", "asian"))
    sc("--right", choices=("call", "put"))
    sc("--runs", type=int)
    sc("--seed", type=int)
    sc("--parallelism")
    for name in ("kappa", "theta", "sigma", "rho", "r", "v0",
                 "s0", "strike", "maturity"):
        sc(f"--{name}", type=float)
    sc("--averaging-times", help="comma-separated dates, e.g. 0.25,0.5,0.75,1")
    sc("--format", choices=("table", "csv", "jsonl"))
    sc("--emit-points", metavar="FILE",
       help="dump 2-D pseudo-vs-sobol sample points to FILE (csv)")
    sc("--config", metavar="FILE", help="flat key = value settings file")


def _read_config_file(path: str) -> dict:
    values = {}
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}")
    for lineno, line in enumerate(lines, 1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        if "=" not in text:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        key, _, raw = text.partition("=")
        key = key.strip().replace("-", "_")
        if key not in _DEFAULTS:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = raw.strip()
    return values


_BOOL_KEYS = {"sobol_highdim_ack"}
_INT_KEYS = {"paths", "steps", "runs", "seed"}
_FLOAT_KEYS = {"kappa", "theta", "sigma", "rho", "r", "v0",
               "s0", "strike", "maturity"}


def _coerce(key: str, raw):
    if not isinstance(raw, str):
        return raw
    try:
        if key in _BOOL_KEYS:
            if raw.lower() in ("true", "1", "yes"):
                return True
            if raw.lower() in ("false", "0", "no"):
                return False
            raise ValueError(raw)
        if key in _INT_KEYS:
            return int(raw)
        if key in _FLOAT_KEYS:
            return float(raw)
    except ValueError:
        raise UsageError(f"bad value for {key}: {raw!r}")
    return raw


def _resolve(args: argparse.Namespace, lists: bool = False) -> dict:
    """flags > config file > defaults, with type coercion for file values."""
    merged = dict(_DEFAULTS)
    if args.config:
        for key, raw in _read_config_file(args.config).items():
            merged[key] = raw if lists and key in ("scheme", "paths", "steps") \
                else _coerce(key, raw)
    for key in _DEFAULTS:
        flag = getattr(args, key, None)
        if flag is not None:
            merged[key] = flag
    return merged


def _parse_times(raw) -> tuple[float, ...]:
    if isinstance(raw, (tuple, list)):
        return tuple(float(t) for t in raw)
    try:
        return tuple(float(t) for t in str(raw).split(",") if t.strip())
    except ValueError:
        raise UsageError(f"bad averaging times {raw!r}")


def _parallelism(raw):
    if raw in (None, "auto"):
        return "auto"
    try:
        return int(raw)
    except (TypeError, ValueError):
        raise UsageError(f"parallelism must be 'auto' or an integer, got {raw!r}")


def build_manifest(merged: dict, out_format: str | None = None) -> RunManifest:
    params = HestonParams(kappa=merged["kappa"], theta=merged["theta"],
                          sigma=merged["sigma"], rho=merged["rho"],
                          r=merged["r"], v0=merged["v0"])
    asian = merged["product"] == "asian"
    spec = OptionSpec(
        style="asian_arithmetic" if asian else "european",
        right=merged["right"], strike=merged["strike"],
        maturity=merged["maturity"], spot=merged["s0"],
        averaging_times=_parse_times(merged["averaging_times"]) if asian else ())
    config = SimConfig(scheme=merged["scheme"], sampler=merged["sampler"],
                       n_paths=merged["paths"], n_steps=merged["steps"],
                       n_runs=merged["runs"], seed=merged["seed"],
                       max_parallelism=_parallelism(merged["parallelism"]),
                       sobol_highdim_ack=bool(merged["sobol_highdim_ack"]))
    return RunManifest(params=params, spec=spec, config=config,
                       version=__version__,
                       timestamp=time.strftime("%Y-%m-%dT%H:%M:%S"),
                       out_format=out_format or merged["format"],
                       emit_points=merged.get("emit_points"))


def parse_config(argv: list[str]) -> tuple[str, RunManifest, dict]:
    """argv -> (subcommand, fully resolved manifest)."""
    parser = _build_parser()
    args = parser.parse_args(argv)
    lists = args.command == "bench"
    merged = _resolve(args, lists=lists)
    if lists:
        merged["_sweep"] = _sweep_lists(merged)
        single = merged["_sweep"][0]
        merged = {**merged, "scheme": single[0], "paths": single[1],
                  "steps": single[2]}
    return args.command, build_manifest(merged), merged


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hestonmc",
        description="Heston Monte Carlo pricing benchmark")
    parser.add_argument("--version", action="version",
                        version=f"hestonmc {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, lists in (("price", False), ("greeks", False), ("bench", True)):
        p = sub.add_parser(name)
        _add_common_flags(p, lists=lists)
    return parser


def _sweep_lists(merged: dict) -> list[tuple[str, int, int]]:
    def split(key, cast):
        raw = merged[key]
        if isinstance(raw, (int, float)):
            return [cast(raw)]
        return [cast(tok) for tok in str(raw).split(",") if tok.strip()]

    try:
        schemes = split("scheme", str)
        paths = split("paths", int)
        steps = split("steps", int)
    except ValueError as exc:
        raise UsageError(f"bad sweep value: {exc}")
    for s in schemes:
        if s not in ("exact", "euler", "milstein"):
            raise UsageError(f"unknown scheme {s!r}")
    return [(s, p, k) for s in schemes for p in paths for k in steps]


# -- output -----------------------------------------------------------------


def _fmt(x: float) -> str:
    return f"{x:.10g}"


def _emit_manifest(manifest: RunManifest, stream):
    payload = json.dumps(manifest.flat(), sort_keys=True)
    print(f"# manifest {payload}", file=stream)


def _emit_rows(manifest: RunManifest, rows: list[tuple[str, McSummary]]):
    """rows: (quantity name, summary) pairs."""
    fmt = manifest.out_format
    c = manifest.config
    if fmt == "table":
        _emit_manifest(manifest, sys.stdout)
        for name, s in rows:
            print(f"{name:6s} | {s.estimate:.6f} ({s.std_error:.6f}) "
                  f"| wall_ms {s.wall_ms:.1f}")
    elif fmt == "csv":
        _emit_manifest(manifest, sys.stderr)
        header = CSV_HEADER if len(rows) == 1 else "quantity," + CSV_HEADER
        print(header)
        for name, s in rows:
            cells = [c.scheme, c.sampler, str(c.n_paths), str(c.n_steps),
                     str(c.n_runs), _fmt(s.estimate), _fmt(s.std_error),
                     _fmt(s.wall_ms)]
            if len(rows) > 1:
                cells.insert(0, name)
            print(",".join(cells))
    else:  # jsonl
        base = manifest.flat()
        for name, s in rows:
            row = dict(base)
            row.update(quantity=name, mean=s.estimate, std=s.std_error,
                       wall_ms_mean=s.wall_ms)
            print(json.dumps(row, sort_keys=True))


def _emit_points(path: str, manifest: RunManifest):
    """2-D sample scatter data: pseudo pairs vs the first two Sobol dims."""
    n = min(manifest.config.n_paths, 1024)
    key = root_key(manifest.config.seed)
    pseudo = uniforms_at(key, 0, 2 * n).reshape(n, 2)
    sobol = sobol_points(2, 1, n)
    with open(path, "w") as fh:
        fh.write("sampler,x,y\n")
        for x, y in pseudo:
            fh.write(f"pseudo,{_fmt(x)},{_fmt(y)}\n")
        for x, y in sobol:
            fh.write(f"sobol,{_fmt(x)},{_fmt(y)}\n")


# -- subcommands -------------------------------------------------------------


def cmd_price(manifest: RunManifest) -> int:
    summary = engine.price(manifest.params, manifest.spec, manifest.config)
    _emit_rows(manifest, [("price", summary)])
    return 0


def cmd_greeks(manifest: RunManifest) -> int:
    res = engine.greeks(manifest.params, manifest.spec, manifest.config)
    _emit_rows(manifest, [(k, res[k]) for k in ("price", "delta", "rho")])
    return 0


def cmd_bench(manifest: RunManifest, merged: dict) -> int:
    grid = []
    for scheme, paths, steps in merged["_sweep"]:
        grid.append(SimConfig(
            scheme=scheme, sampler=manifest.config.sampler, n_paths=paths,
            n_steps=steps, n_runs=manifest.config.n_runs,
            seed=manifest.config.seed,
            max_parallelism=manifest.config.max_parallelism,
            sobol_highdim_ack=manifest.config.sobol_highdim_ack))
    rows = engine.run_experiment(grid, manifest.params, manifest.spec)
    _emit_manifest(manifest, sys.stderr)
    print(CSV_HEADER)
    for row in rows:
        s = row["summaries"]["price"]
        print(",".join([row["scheme"], manifest.config.sampler,
                        str(row["paths"]), str(row["steps"]),
                        str(row["runs"]), _fmt(s.estimate),
                        _fmt(s.std_error), _fmt(s.wall_ms)]))
    if manifest.emit_points:
        _emit_points(manifest.emit_points, manifest)
    return 0


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        command, manifest, merged = parse_config(argv)
        if command == "price":
            return cmd_price(manifest)
        if command == "greeks":
            return cmd_greeks(manifest)
        return cmd_bench(manifest, merged)
    except _USAGE_ERRORS as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except HestonError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}",
              file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
