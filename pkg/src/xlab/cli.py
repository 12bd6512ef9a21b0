"""Command-line runner: ``xlab list`` and ``xlab run --config <path>``.

A config is a JSON object::

    {
      "experiment": "projection-narrow",
      "seed": 0,
      "output_dir": "out/projection",
      "params": {"t_values": [1, 2, 4, 6]},
      "tolerances": {"narrow_ratio": 0.5},
      "budget_seconds": 120
    }

Only ``experiment`` is required. Unknown keys, unknown parameters and
values whose type differs from the catalog default are rejected.
"""

import argparse
import json
import os
import sys
from typing import List, Optional

from . import experiments, report
from .errors import ValidationError

TOP_KEYS = {"experiment", "seed", "output_dir", "params", "tolerances", "budget_seconds"}
EXIT_FAIL, EXIT_CONFIG = 1, 2


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _check_value(where: str, value, default):
    if isinstance(default, bool):
        ok = isinstance(value, bool)
    elif isinstance(default, int):
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif isinstance(default, float):
        ok = _is_number(value)
    elif isinstance(default, str):
        ok = isinstance(value, str)
    elif isinstance(default, list):
        if not isinstance(value, list) or not value:
            raise ValidationError(f"{where}: expected a non-empty list")
        if all(isinstance(d, str) for d in default):
            bad = [v for v in value if v not in default]
            if bad:
                raise ValidationError(f"{where}: unknown entries {bad}, allowed {default}")
            return
        if not all(_is_number(v) for v in value):
            raise ValidationError(f"{where}: expected a list of numbers")
        if where.endswith(("_range", "scales")) and len(value) != len(default):
            raise ValidationError(f"{where}: expected {len(default)} numbers")
        return
    else:
        ok = True
    if not ok:
        raise ValidationError(f"{where}: expected {type(default).__name__}, got {type(value).__name__}")


def validate_config(cfg) -> dict:
    """Check a config against the catalog schema and fill defaults."""
    if not isinstance(cfg, dict):
        raise ValidationError("config must be a JSON object")
    unknown = sorted(set(cfg) - TOP_KEYS)
    if unknown:
        raise ValidationError(f"unknown config keys {unknown}")
    name = cfg.get("experiment")
    if name not in experiments.BY_NAME:
        raise ValidationError(f"unknown experiment {name!r}")
    exp = experiments.BY_NAME[name]
    seed = cfg.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise ValidationError("seed must be a non-negative integer")
    budget = cfg.get("budget_seconds")
    if budget is not None and (not _is_number(budget) or budget <= 0):
        raise ValidationError("budget_seconds must be a positive number")
    out = cfg.get("output_dir", os.path.join("xlab-out", name))
    if not isinstance(out, str) or not out:
        raise ValidationError("output_dir must be a non-empty string")
    sections = {}
    for key, defaults in (("params", exp.params), ("tolerances", exp.tolerances)):
        given = cfg.get(key, {})
        if not isinstance(given, dict):
            raise ValidationError(f"{key} must be an object")
        bad = sorted(set(given) - set(defaults))
        if bad:
            raise ValidationError(f"unknown {key} for {name}: {bad}")
        for k, v in given.items():
            _check_value(f"{key}.{k}", v, defaults[k])
        sections[key] = dict(defaults, **given)
    return {"experiment": name, "seed": seed, "output_dir": out, "budget_seconds": budget, **sections}


def run(cfg: dict) -> experiments.ExperimentResult:
    """Run a validated config and write results.csv, report.json and plots.svg."""
    exp = experiments.BY_NAME[cfg["experiment"]]
    res = experiments.run_experiment(cfg["experiment"], cfg["params"], cfg["tolerances"], cfg["seed"], cfg["budget_seconds"])
    out = cfg["output_dir"]
    os.makedirs(out, exist_ok=True)
    recorded = {k: v for k, v in cfg.items() if k != "output_dir"}
    with open(os.path.join(out, "results.csv"), "w", encoding="utf-8", newline="") as f:
        f.write(report.results_csv(res))
    with open(os.path.join(out, "report.json"), "w", encoding="utf-8", newline="\n") as f:
        f.write(report.report_json(res, recorded, exp.anchor))
    with open(os.path.join(out, "plots.svg"), "w", encoding="utf-8", newline="\n") as f:
        f.write(report.plots_svg(res.plots))
    return res


def list_experiments() -> List[str]:
    return [f"{e.name:24s} {e.anchor}" for e in experiments.catalog()]


def main(argv: Optional[List[str]] = None) -> int:
    parser = argparse.ArgumentParser(prog="xlab", description="Run named SL(3,R) experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("list", help="show the experiment catalog")
    p_run = sub.add_parser("run", help="run one experiment from a JSON config")
    p_run.add_argument("--config", required=True, help="path to the JSON config")
    args = parser.parse_args(argv)
    if args.command == "list":
        print("\n".join(list_experiments()))
        return 0
    try:
        with open(args.config, encoding="utf-8") as f:
            cfg = validate_config(json.load(f))
    except (OSError, json.JSONDecodeError, ValidationError) as e:
        print(f"xlab: config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    res = run(cfg)
    for c in res.checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name}: {c.value:.6g} ({c.threshold})")
    if res.partial:
        print("PARTIAL  budget exhausted; report flagged", file=sys.stderr)
    print(f"wrote {cfg['output_dir']}")
    return 0 if res.passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
