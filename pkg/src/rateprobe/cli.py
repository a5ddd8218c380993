"""Command-line entry point: ``rateprobe {gen,run,sweep,budget,report}``."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import fields
from pathlib import Path

import yaml

from .budget import RateModel, days_needed, feasible_users
from .generator import GenConfig, generate_dataset, write_dataset
from .harness import DEFAULT_GRID, BudgetError, ExperimentConfig, load_truth, run_experiment, sweep, validate_budget
from .metrics import REPORT_COLUMNS, summarize, write_summary

__all__ = ["main", "build_parser"]

INT_COLUMNS = {"seed", "k", "t", "n_probed", "n_inferred"}
FLOAT_COLUMNS = set(REPORT_COLUMNS) - INT_COLUMNS - {"strategy", "target"}


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rateprobe", description="Rate-limited influence tracking experiments.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="synthesize a dataset directory")
    g.add_argument("--out", required=True, help="output directory")
    g.add_argument("--config", help="YAML with generator fields (or an experiment config with data.generate)")
    g.add_argument("--seed", type=int, help="generator seed (overrides the config)")
    g.add_argument("--n", type=int)
    g.add_argument("--m0", type=int)
    g.add_argument("--periods", type=int)
    g.add_argument("--no-tweets", action="store_true", help="skip tweets and dictionaries")

    r = sub.add_parser("run", help="run one experiment")
    r.add_argument("config", help="experiment YAML")
    r.add_argument("--seed", type=int, help="run only this seed")
    r.add_argument("--output", help="output directory (overrides the config)")
    r.add_argument("--workers", type=int, default=1)

    s = sub.add_parser("sweep", help="run a theta/beta/capacity grid")
    s.add_argument("config", help="experiment YAML")
    s.add_argument("--thetas", type=_floats, default=list(DEFAULT_GRID["theta"]))
    s.add_argument("--betas", type=_floats, default=list(DEFAULT_GRID["beta"]))
    s.add_argument("--capacities", type=_floats, default=list(DEFAULT_GRID["capacity"]))
    s.add_argument("--seed", type=int, help="run only this seed")
    s.add_argument("--output", help="output directory (overrides the config)")
    s.add_argument("--workers", type=int, default=1)

    b = sub.add_parser("budget", help="check probing feasibility against the API rate limits")
    b.add_argument("--users", type=int, help="users to refresh every period")
    b.add_argument("--kind", choices=("relations", "tweets"), default="relations")
    b.add_argument("--period-days", type=float, help="probing period in days")
    b.add_argument("--config", help="validate every capacity of this experiment config instead")

    rep = sub.add_parser("report", help="aggregate report CSVs into a summary table")
    rep.add_argument("reports", nargs="+", help="report.csv files")
    rep.add_argument("--out", help="write the summary CSV here (default: stdout)")
    return p


def _gen(args) -> int:
    raw = {}
    if args.config:
        loaded = yaml.safe_load(Path(args.config).read_text()) or {}
        raw = loaded.get("data", {}).get("generate", loaded) if "data" in loaded else loaded
        known = {f.name for f in fields(GenConfig)}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown generator keys: {sorted(unknown)}")
    for key in ("n", "m0", "periods"):
        if getattr(args, key) is not None:
            raw[key] = getattr(args, key)
    if args.seed is not None:
        raw["rng_seed"] = args.seed
    ds = generate_dataset(GenConfig(**raw), with_tweets=not args.no_tweets)
    out = write_dataset(ds, args.out)
    print(f"wrote {ds.periods + 1} snapshots ({ds.n} vertices) to {out}")
    return 0


def _load(args) -> ExperimentConfig:
    cfg = ExperimentConfig.from_yaml(args.config)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    return cfg


def _run(args) -> int:
    cfg = _load(args)
    res = run_experiment(cfg, args.output, workers=args.workers)
    print(f"wrote {len(res.reports)} report rows to {res.output / 'report.csv'}")
    return 0


def _sweep(args) -> int:
    cfg = _load(args)
    res = sweep(cfg, args.thetas, args.betas, args.capacities, args.output, workers=args.workers)
    print(f"wrote {len(res.summary)} summary rows to {res.output / 'summary.csv'}")
    return 0


def _budget(args) -> int:
    if args.config:
        cfg = ExperimentConfig.from_yaml(args.config)
        for seed in cfg.seeds:
            for line in validate_budget(cfg, load_truth(cfg, seed)):
                print(f"seed {seed}: {line}")
        return 0
    if args.users is None or args.period_days is None:
        raise ValueError("budget needs --users and --period-days (or --config)")
    rates = RateModel()
    cap = feasible_users(rates, args.period_days, args.kind)
    if cap >= args.users:
        print(f"feasible ({cap} >= {args.users})")
        return 0
    print(f"infeasible ({cap} < {args.users}); {args.kind} probing of every user needs "
          f"{days_needed(rates, args.users, args.kind)} days")
    return 1


def _read_report(path: str) -> list[dict]:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"report file not found: {p}")
    with p.open(newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(REPORT_COLUMNS) - set(reader.fieldnames or [])
        if missing:
            raise ValueError(f"{p} is missing report columns: {sorted(missing)}")
        rows = []
        for row in reader:
            for c in INT_COLUMNS:
                row[c] = int(row[c])
            for c in FLOAT_COLUMNS:
                row[c] = float(row[c])
            rows.append(row)
    return rows


def _report(args) -> int:
    rows = [r for path in args.reports for r in _read_report(path)]
    summary = summarize(rows)
    if args.out:
        write_summary(args.out, summary)
        print(f"wrote {len(summary)} summary rows to {args.out}")
    else:
        write_summary(sys.stdout, summary)
    return 0


COMMANDS = {"gen": _gen, "run": _run, "sweep": _sweep, "budget": _budget, "report": _report}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ValueError, FileNotFoundError, BudgetError, yaml.YAMLError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
