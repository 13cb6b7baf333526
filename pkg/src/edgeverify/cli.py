"""Command-line front end.

Exit codes: 0 success, 1 configuration error, 2 scenario invariant violation.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import yaml

from .contract import (ContractError, CostModel, detection_probability, is_honesty_dominant,
                       payoff_matrix)
from .kernels import detection_rate_mc
from .simnet import (ConfigError, ScenarioError, THREAT_IDS, THREATS, run_scenario,
                     run_threat_suite, scenario_from_dict)

EXIT_OK, EXIT_CONFIG, EXIT_INVARIANT = 0, 1, 2

_RUN_KEYS = {"seed", "reps", "out", "format"}
_TOP_KEYS = {"scenario", "run", "threats", "overrides"}


@dataclass
class RunConfig:
    scenario: dict
    seed: int | None = None      # None keeps the scenario's own seed
    reps: int = 1
    out: str | None = None       # None writes to stdout
    format: str = "jsonl"        # jsonl | table
    threats: tuple = THREAT_IDS
    overrides: dict | None = None


def load_config(path: str | None, args: argparse.Namespace, default_reps: int = 1) -> RunConfig:
    raw: dict = {}
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            raw = yaml.safe_load(p.read_text(encoding="utf-8")) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"malformed config: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config must be a mapping")
    unknown = set(raw) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    run = raw.get("run") or {}
    if not isinstance(run, dict) or set(run) - _RUN_KEYS:
        raise ConfigError(f"run section accepts only: {', '.join(sorted(_RUN_KEYS))}")
    scenario = raw.get("scenario") or {}
    if not isinstance(scenario, dict):
        raise ConfigError("scenario section must be a mapping")
    cfg = RunConfig(scenario=scenario, seed=run.get("seed"), reps=run.get("reps", default_reps),
                    out=run.get("out"), format=run.get("format", "jsonl"))
    if "threats" in raw:
        threats = raw["threats"]
        if not isinstance(threats, list) or not threats:
            raise ConfigError("threats must be a non-empty list")
        cfg.threats = tuple(str(t) for t in threats)
    if "overrides" in raw:
        if not isinstance(raw["overrides"], dict):
            raise ConfigError("overrides must map threat ids to scenario keys")
        cfg.overrides = raw["overrides"]
    for name in ("seed", "reps", "out", "format"):
        value = getattr(args, name, None)
        if value is not None:
            setattr(cfg, name, value)
    if cfg.format not in ("jsonl", "table"):
        raise ConfigError(f"unknown format {cfg.format!r}")
    if not isinstance(cfg.reps, int) or cfg.reps < 1:
        raise ConfigError("reps must be a positive integer")
    return cfg


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _table(header: list[str], rows: list[list[str]]) -> str:
    widths = [max(len(str(r[i])) for r in [header] + rows) for i in range(len(header))]
    line = lambda r: "  ".join(str(c).ljust(w) for c, w in zip(r, widths)).rstrip()
    sep = "  ".join("-" * w for w in widths)
    return "\n".join([line(header), sep] + [line(r) for r in rows]) + "\n"


def _pct(x: float) -> str:
    return f"{100 * x:.2f}%"


# -- subcommands ------------------------------------------------------------

def cmd_run(cfg: RunConfig) -> int:
    base = dict(cfg.scenario)
    start = cfg.seed if cfg.seed is not None else int(base.get("seed", 0))
    reports = []
    for k in range(cfg.reps):
        base["seed"] = start + k
        reports.append(run_scenario(scenario_from_dict(base)))
    if cfg.format == "jsonl":
        text = "".join(r.to_json() + "\n" for r in reports)
    else:
        rows = [[r.threat, r.seed, r.outcome, r.convicted or "-", r.mechanism or "-",
                 r.accusations, "yes" if r.conserved else "NO"] for r in reports]
        text = _table(["threat", "seed", "outcome", "convicted", "mechanism", "accusations",
                       "conserved"], rows)
    _emit(text, cfg.out)
    broken = [r for r in reports if not r.conserved or r.honest_fined]
    if broken:
        print(f"invariant violated in {len(broken)} run(s)", file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


def cmd_threat_matrix(cfg: RunConfig) -> int:
    seed = cfg.seed if cfg.seed is not None else 0
    try:
        rows = run_threat_suite(seed, cfg.reps, cfg.threats, overrides=cfg.overrides)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if cfg.format == "jsonl":
        text = "".join(r.to_json() + "\n" for r in rows)
    else:
        table = []
        for r in rows:
            conf = _pct(r.rate)
            if r.analytic is not None:
                conf += f" (analytic {_pct(r.analytic)})"
            if r.threat == "T7":
                conf += " dominant" if r.honesty_dominant else " NOT dominant"
            mech = ", ".join(f"{k}:{v}" for k, v in sorted(r.mechanisms.items())) or "-"
            table.append([r.threat, r.description, r.technique, conf, mech, r.runs])
        text = _table(["threat", "violation", "technique", "confidence", "convicting mechanism",
                       "runs"], table)
    _emit(text, cfg.out)
    if any(not r.conserved or r.honest_fined for r in rows):
        print("invariant violated: currency not conserved or honest party fined",
              file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


def cmd_incentives(r, c_h, c_d, q, f, b, fmt: str = "table") -> int:
    if r < 0:
        raise ConfigError("reward must be non-negative")
    m = payoff_matrix(r, CostModel(c_h, c_d, q), f, b)
    dominant = is_honesty_dominant(m)
    if fmt == "jsonl":
        print(json.dumps({"kind": "payoff", "dd": m.dd, "dD": m.dD, "Dd": m.Dd, "DD": m.DD,
                          "dominant": dominant}, sort_keys=True))
        return EXIT_OK
    g = lambda v: f"{v:g}"
    print(_table(["", "other honest (d)", "other dishonest (D)"],
                 [["honest (d)", g(m.dd), g(m.dD)], ["dishonest (D)", g(m.Dd), g(m.DD)]]), end="")
    print("verdict: honesty is dominant" if dominant else "verdict: not dominant")
    return EXIT_OK


def cmd_sampling_table(rates, intervals, fmt: str = "table", mc: int = 0, seed: int = 0) -> int:
    """Analytic detection probability per (c, i); ``mc > 0`` adds a Monte-Carlo estimate."""
    if fmt == "jsonl":
        for c in rates:
            for i in intervals:
                rec = {"kind": "sampling", "c": c, "i": i, "p": detection_probability(c, i)}
                if mc:
                    rec["p_mc"] = detection_rate_mc(c, i, 1, mc, seed)
                print(json.dumps(rec, sort_keys=True))
        return EXIT_OK
    rows = []
    for c in rates:
        cells = []
        for i in intervals:
            cell = f"{detection_probability(c, i):.4f}"
            if mc:
                cell += f" / {detection_rate_mc(c, i, 1, mc, seed):.4f}"
            cells.append(cell)
        rows.append([f"{c:g}"] + cells)
    print(_table(["c \\ i"] + [str(i) for i in intervals], rows), end="")
    if mc:
        print(f"cells: analytic / simulated over {mc} contracts")
    return EXIT_OK


# -- argument parsing ---------------------------------------------------------

def _float_list(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="edgeverify", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config_required: bool):
        if config_required:
            sp.add_argument("config", help="YAML scenario file")
        else:
            sp.add_argument("config", nargs="?", help="optional YAML file")
        sp.add_argument("--seed", type=int, help="first seed (overrides the config)")
        sp.add_argument("--reps", type=int, help="runs per scenario or threat")
        sp.add_argument("--out", help="write the report here instead of stdout")
        sp.add_argument("--format", choices=("jsonl", "table"))

    common(sub.add_parser("run", help="run one scenario config"), True)
    common(sub.add_parser("threat-matrix", help="per-threat detection table"), False)

    inc = sub.add_parser("incentives", help="payoff matrix and dominance verdict")
    for name in ("r", "c_h", "c_d", "q", "f", "b"):
        inc.add_argument(name, type=float)
    inc.add_argument("--format", choices=("jsonl", "table"), default="table")

    st = sub.add_parser("sampling-table", help="detection probability over a c x i grid")
    st.add_argument("--rates", type=_float_list, default=[0.01, 0.05, 0.1, 0.2, 0.5])
    st.add_argument("--intervals", type=_int_list, default=[1, 5, 10, 22, 44, 100])
    st.add_argument("--format", choices=("jsonl", "table"), default="table")
    st.add_argument("--mc", type=int, default=0, help="also simulate this many contracts per cell")
    st.add_argument("--seed", type=int, default=0)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(load_config(args.config, args))
        if args.command == "threat-matrix":
            return cmd_threat_matrix(load_config(args.config, args, default_reps=200))
        if args.command == "incentives":
            return cmd_incentives(args.r, args.c_h, args.c_d, args.q, args.f, args.b,
                                  args.format)
        return cmd_sampling_table(args.rates, args.intervals, args.format, args.mc, args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ScenarioError, ContractError) as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
