"""Command-line batch front-end.

Runs configured sweeps and writes one CSV per (metric, strategy) curve plus
a ``manifest.json`` that can be fed back as ``--config`` to replay the run,
or runs the built-in verification suites with ``--verify``.

Values given as flags override those read from the config file.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import subprocess
import sys
import time
from pathlib import Path
from typing import Any, Mapping

import yaml

from .montecarlo import CHUNK_SIZE, CSV_HEADER, InsufficientData, estimate_ber, estimate_outage, fit_diversity_order
from .strategies import Kind, NoDisjointPath, PowerModel, SearchSpace, StrategySpec, UnsupportedTopology
from .topology import TopologyError, validate

__all__ = ["ConfigError", "load_config", "resolve_config", "run_sweep", "run_verify", "main"]

log = logging.getLogger("eeas")

MANIFEST_SCHEMA = "eeas-run-manifest/1"
METRICS = ("outage", "ber")

DEFAULTS: dict[str, Any] = {
    "strategies": ["fd-af"],
    "search": "all",
    "power_model": "per-node",
    "metrics": ["outage"],
    "trials": 100_000,
    "symbols_per_trial": 2,
    "rate_bits": 1.0,
    "multiplexing_gain": None,
    "min_events": None,
    "workers": 1,
    "chunk_size": CHUNK_SIZE,
    "fit_window": None,
}
KNOWN_KEYS = set(DEFAULTS) | {"seed", "topology", "snr_db"}


class ConfigError(ValueError):
    """Invalid run configuration; ``kind`` and ``field`` go into the error report."""

    def __init__(self, message: str, field: str | None = None, kind: str = "invalid-config"):
        super().__init__(message)
        self.field = field
        self.kind = kind

    def report(self) -> dict:
        return {"error": self.kind, "field": self.field, "message": str(self)}


# --------------------------------------------------------------------------
# Configuration
# --------------------------------------------------------------------------

def load_config(path: str | Path) -> dict:
    """Read a YAML (or JSON) config. A run manifest is accepted as well."""
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", "config") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}", "config") from exc
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping", "config")
    if data.get("schema") == MANIFEST_SCHEMA:
        data = data["config"]
    return data


def _strategy_list(raw, search: str, power_model: str) -> list[StrategySpec]:
    if isinstance(raw, (str, dict)):
        raw = [raw]
    if not isinstance(raw, list) or not raw:
        raise ConfigError("'strategies' must be a non-empty list", "strategies")
    out = []
    for item in raw:
        if isinstance(item, str):
            item = {"kind": item}
        if not isinstance(item, dict) or "kind" not in item:
            raise ConfigError(f"bad strategy entry {item!r}", "strategies")
        try:
            out.append(
                StrategySpec.parse(item["kind"], item.get("search", search), item.get("power_model", power_model))
            )
        except ValueError as exc:
            raise ConfigError(f"bad strategy entry {item!r}: {exc}", "strategies") from exc
    return out


def _number(cfg, key, kind=float, minimum=None):
    value = cfg[key]
    if isinstance(value, bool):
        raise ConfigError(f"{key}: expected a number, got {value!r}", key)
    try:
        num = kind(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{key}: expected a number, got {value!r}", key) from exc
    if kind is int and num != float(value):
        raise ConfigError(f"{key}: expected an integer, got {value!r}", key)
    if minimum is not None and num < minimum:
        raise ConfigError(f"{key}: must be >= {minimum}, got {value!r}", key)
    return num


def resolve_config(raw: Mapping[str, Any]) -> dict:
    """Fill defaults, validate everything and return a plain, re-runnable dict."""
    unknown = set(raw) - KNOWN_KEYS
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)}", sorted(unknown)[0])
    cfg = dict(DEFAULTS)
    cfg.update(raw)

    if cfg.get("seed") is None:
        raise ConfigError("no master seed given (use --seed or 'seed:'); runs are never seeded from the clock",
                          "seed", "missing-seed")
    seed = _number(cfg, "seed", int, 0)
    if seed >= 2**64:
        raise ConfigError("seed must fit in 64 unsigned bits", "seed")

    if "topology" not in cfg or not isinstance(cfg["topology"], dict):
        raise ConfigError("missing 'topology' mapping (hops, stage_antennas)", "topology")
    try:
        topology = validate(cfg["topology"])
    except TopologyError as exc:
        raise ConfigError(str(exc), f"topology.{exc.field}" if exc.field else "topology") from exc

    grid = cfg.get("snr_db")
    if not isinstance(grid, dict) or not {"start", "stop", "step"} <= set(grid):
        raise ConfigError("'snr_db' needs start, stop and step", "snr_db")
    start, stop, step = (_number(grid, k) for k in ("start", "stop", "step"))
    if step <= 0 or stop < start:
        raise ConfigError("snr_db: need step > 0 and stop >= start", "snr_db")

    metrics = cfg["metrics"]
    if isinstance(metrics, str):
        metrics = [metrics]
    if not metrics or any(m not in METRICS for m in metrics):
        raise ConfigError(f"metrics must be a subset of {list(METRICS)}, got {metrics!r}", "metrics")

    for key, enum in (("search", SearchSpace), ("power_model", PowerModel)):
        try:
            enum(cfg[key])
        except ValueError as exc:
            raise ConfigError(f"{key}: unknown value {cfg[key]!r}", key) from exc
    strategies = _strategy_list(cfg["strategies"], cfg["search"], cfg["power_model"])
    for spec in strategies:
        try:
            spec.check(topology)
        except (UnsupportedTopology, NoDisjointPath) as exc:
            raise ConfigError(str(exc), "strategies", "unsupported-combination") from exc

    trials = _number(cfg, "trials", int, 1)
    symbols = _number(cfg, "symbols_per_trial", int, 1)
    if "outage" in metrics and trials < 10**4:
        raise ConfigError("outage sweeps need at least 1e4 trials per point", "trials")
    if "ber" in metrics:
        if symbols % 2 and any(s.kind is Kind.DSTBC_ALAMOUTI for s in strategies):
            raise ConfigError("the Alamouti baseline needs an even symbols_per_trial", "symbols_per_trial")
        if symbols < 2 and any(s.kind is Kind.HD_ALTERNATING for s in strategies):
            raise ConfigError("half-duplex alternation needs symbols_per_trial >= 2", "symbols_per_trial")
    mux = cfg["multiplexing_gain"]
    rate = _number(cfg, "rate_bits")
    if mux is None and rate <= 0:
        raise ConfigError("rate_bits must be positive", "rate_bits")
    fit_window = cfg["fit_window"]
    if fit_window is not None:
        if not (isinstance(fit_window, list) and len(fit_window) == 2 and 0 < fit_window[0] < fit_window[1]):
            raise ConfigError("fit_window must be [low, high] with 0 < low < high", "fit_window")
        fit_window = [float(x) for x in fit_window]

    return {
        "seed": seed,
        "topology": topology.to_config(),
        "strategies": [s.to_dict() for s in strategies],
        "metrics": list(metrics),
        "snr_db": {"start": start, "stop": stop, "step": step},
        "trials": trials,
        "symbols_per_trial": symbols,
        "rate_bits": rate,
        "multiplexing_gain": None if mux is None else _number(cfg, "multiplexing_gain"),
        "min_events": None if cfg["min_events"] is None else _number(cfg, "min_events", int, 1),
        "workers": _number(cfg, "workers", int, 1),
        "chunk_size": _number(cfg, "chunk_size", int, 1),
        "fit_window": fit_window,
        "search": cfg["search"],
        "power_model": cfg["power_model"],
    }


def snr_grid(cfg: Mapping[str, Any]) -> list[float]:
    g = cfg["snr_db"]
    n = int(math.floor((g["stop"] - g["start"]) / g["step"] + 1e-9))
    return [round(g["start"] + k * g["step"], 10) for k in range(n + 1)]


def _build_id() -> dict:
    from . import __version__ as version

    try:
        rev = subprocess.run(
            ["git", "rev-parse", "--short", "HEAD"],
            cwd=Path(__file__).resolve().parent,
            capture_output=True,
            text=True,
            timeout=5,
        )
        git = rev.stdout.strip() or None
    except (OSError, subprocess.SubprocessError):
        git = None
    return {"package_version": version, "git": git}


# --------------------------------------------------------------------------
# Operations
# --------------------------------------------------------------------------

def run_sweep(config: Mapping[str, Any] | str | Path, output_dir: str | Path, progress=None) -> dict:
    """Execute every (metric, strategy) sweep of ``config`` and write the artifacts.

    Returns the manifest, which is also written to ``output_dir/manifest.json``.
    """
    raw = load_config(config) if isinstance(config, (str, Path)) else config
    cfg = resolve_config(raw)
    topology = validate(cfg["topology"])
    grid = snr_grid(cfg)
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)

    t0 = time.perf_counter()
    outputs, fits = {}, {}
    for metric in cfg["metrics"]:
        for sdict in cfg["strategies"]:
            spec = StrategySpec.parse(sdict["kind"], sdict["search"], sdict["power_model"])
            label = f"{metric}_{spec.name}"
            if sum(1 for s in cfg["strategies"] if s["kind"] == spec.name) > 1:
                label += f"_{spec.search_space.value}_{spec.power_model.value}"
            log.info("running %s on %s", label, topology)
            common = dict(
                workers=cfg["workers"], min_events=cfg["min_events"], chunk_size=cfg["chunk_size"], progress=progress
            )
            if metric == "outage":
                curve = estimate_outage(
                    topology, spec, cfg["rate_bits"], grid, cfg["trials"], cfg["seed"],
                    multiplexing_gain=cfg["multiplexing_gain"], **common,
                )
            else:
                curve = estimate_ber(
                    topology, spec, grid, cfg["symbols_per_trial"], cfg["trials"], cfg["seed"], **common
                )
            fname = f"{label}.csv"
            with open(out / fname, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(CSV_HEADER)
                w.writerows(curve.csv_rows())
            outputs[label] = fname
            try:
                fit = fit_diversity_order(curve, prob_window=cfg["fit_window"])
                fits[label] = {
                    "order": fit.order_estimate,
                    "stderr": fit.stderr,
                    "window_db": list(fit.window),
                    "n_points": fit.n_points,
                }
            except InsufficientData as exc:
                fits[label] = {"order": None, "reason": str(exc)}

    manifest = {
        "schema": MANIFEST_SCHEMA,
        "config": cfg,
        "master_seed": cfg["seed"],
        "topology": str(topology),
        "snr_grid_db": grid,
        "snr_axis": "10*log10(P), unit noise variance per stage; P read per power model",
        "build": _build_id(),
        "outputs": outputs,
        "fitted_orders": fits,
        "wall_time_s": round(time.perf_counter() - t0, 3),
    }
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def run_verify(level: str = "fast", workers: int = 1, report=print) -> bool:
    """Run a verification suite, reporting one line per criterion; True if all pass."""
    from .verify import run_suite

    results = run_suite(level, workers=workers, report=report)
    failed = [r.key for r in results if not r.passed]
    report(f"{len(results) - len(failed)}/{len(results)} criteria passed" + (f"; failed: {failed}" if failed else ""))
    return not failed


# --------------------------------------------------------------------------
# Entry point
# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="eeas",
        description="Monte Carlo sweeps of end-to-end antenna selection over multi-hop AF relay channels.",
    )
    p.add_argument("--config", help="YAML/JSON config file or a previous manifest.json")
    p.add_argument("--out", default="runs/latest", help="output directory (default: %(default)s)")
    p.add_argument("--seed", type=int, help="master seed (required unless the config has one)")
    p.add_argument("--strategy", action="append", choices=[k.value for k in Kind],
                   help="strategy to run; repeat for several (replaces the config list)")
    p.add_argument("--power-model", choices=[m.value for m in PowerModel])
    p.add_argument("--search", choices=[s.value for s in SearchSpace])
    p.add_argument("--antennas", help="stage antennas, e.g. 1,2,1 (replaces the config topology)")
    p.add_argument("--metric", action="append", choices=list(METRICS), help="repeat for several")
    p.add_argument("--snr-start", type=float)
    p.add_argument("--snr-stop", type=float)
    p.add_argument("--snr-step", type=float)
    p.add_argument("--trials", type=int, help="trials (fading blocks) per SNR point")
    p.add_argument("--symbols", type=int, help="4-QAM symbols per trial for BER")
    p.add_argument("--rate", type=float, help="outage rate in bits per channel use")
    p.add_argument("--min-events", type=int, help="stop a point early once it has this many events")
    p.add_argument("--workers", type=int)
    p.add_argument("--verify", choices=["fast", "full"], help="run a verification suite instead of a sweep")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    return p


def _overrides(args: argparse.Namespace) -> dict:
    over: dict[str, Any] = {}
    simple = {
        "seed": args.seed,
        "power_model": args.power_model,
        "search": args.search,
        "trials": args.trials,
        "symbols_per_trial": args.symbols,
        "rate_bits": args.rate,
        "min_events": args.min_events,
        "workers": args.workers,
        "strategies": args.strategy,
        "metrics": args.metric,
    }
    over.update({k: v for k, v in simple.items() if v is not None})
    if args.antennas is not None:
        try:
            m = [int(x) for x in args.antennas.split(",")]
        except ValueError as exc:
            raise ConfigError(f"--antennas: expected comma-separated integers, got {args.antennas!r}", "topology") from exc
        over["topology"] = {"hops": len(m) - 1, "stage_antennas": m}
    return over


def _fail(err: ConfigError) -> int:
    print(json.dumps(err.report()), file=sys.stderr)
    return 2


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    progress = log.info if args.verbose else None

    if args.verify:
        ok = run_verify(args.verify, workers=args.workers or 1)
        return 0 if ok else 1

    try:
        raw = load_config(args.config) if args.config else {}
        # Power model and search flags must reach strategies given as mappings, too.
        over = _overrides(args)
        if isinstance(raw.get("strategies"), list) and ("power_model" in over or "search" in over):
            raw = dict(raw)
            raw["strategies"] = [
                {k: v for k, v in s.items() if k not in over} if isinstance(s, dict) else s for s in raw["strategies"]
            ]
        merged = dict(raw)
        merged.update(over)
        grid = dict(merged.get("snr_db") or {})
        for key, val in (("start", args.snr_start), ("stop", args.snr_stop), ("step", args.snr_step)):
            if val is not None:
                grid[key] = val
        if grid:
            merged["snr_db"] = grid
        manifest = run_sweep(merged, args.out, progress=progress)
    except ConfigError as err:
        return _fail(err)

    print(json.dumps({"outputs": manifest["outputs"], "fitted_orders": manifest["fitted_orders"],
                      "manifest": str(Path(args.out) / "manifest.json")}, indent=2))
    return 0


if __name__ == "__main__":
    sys.exit(main())
