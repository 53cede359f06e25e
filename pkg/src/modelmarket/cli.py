"""Command-line entry points: run, verify, scenario, oracle-check.

Exit codes: 0 success, 1 invalid config, 2 simulation aborted,
3 property failure, 4 scenario pattern violated.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .domain import load_config, validate_config
from .errors import ConfigError, SimulationAborted
from .fuzz import random_problem
from .graph import MAX_BRUTE_FORCE, brute_force_row, check_local_opt, learn_row, phi
from .market import replay_problems, run
from .report import write_reports
from .scenarios import SCENARIOS, run_scenario
from .verify import SUITES, gap_histogram, run_suites

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_ABORT = 2
EXIT_PROPERTY = 3
EXIT_PATTERN = 4


@dataclass
class RunManifest:
    command: str
    config: Optional[Path] = None
    seed: Optional[int] = None
    out: Path = Path("out")
    suites: list = field(default_factory=list)
    scenario: Optional[str] = None
    instances: int = 1000
    max_m: int = 10


def _err(msg: str) -> None:
    print(msg, file=sys.stderr)


def _load(manifest: RunManifest):
    """Load and validate the manifest's config; returns (config, None) or (None, exit code)."""
    try:
        config = load_config(manifest.config)
        if manifest.seed is not None:
            config = config.with_seed(manifest.seed)
        return validate_config(config), None
    except ConfigError as exc:
        _err(f"invalid config {manifest.config}:")
        for v in exc.violations:
            _err(f"  {v.code}: {v.message}")
    except (OSError, ValueError, KeyError, TypeError) as exc:
        _err(f"cannot read config {manifest.config}: {exc}")
    return None, EXIT_CONFIG


def cmd_run(manifest: RunManifest) -> int:
    config, code = _load(manifest)
    if config is None:
        return code
    try:
        result = run(config)
    except SimulationAborted as exc:
        _err(f"simulation aborted: {exc}")
        return EXIT_ABORT
    write_reports(manifest.out, config, result)
    util = float(np.mean(result.cumulative_utilities))
    acc = float(np.mean(result.final_accuracies))
    base = float(np.mean(result.local_baseline_accuracies))
    print(f"mean utility {util:.4f} | mean accuracy {acc:.4f} vs baseline {base:.4f} ({acc - base:+.4f}) "
          f"| {len(result.rounds)} rounds, reports in {manifest.out}")
    return EXIT_OK


def cmd_verify(manifest: RunManifest) -> int:
    names = manifest.suites or list(SUITES)
    ok = run_suites(names, seed=manifest.seed or 0)
    return EXIT_OK if ok else EXIT_PROPERTY


def cmd_scenario(manifest: RunManifest) -> int:
    reports = run_scenario(manifest.scenario, seed=manifest.seed or 0)
    lines = [line for rep in reports for line in rep.lines()]
    for line in lines:
        print(line)
    out = Path(manifest.out)
    out.mkdir(parents=True, exist_ok=True)
    doc = [{"name": r.name, "ok": r.ok, "checks": r.checks, "metrics": r.metrics} for r in reports]
    (out / f"scenario_{manifest.scenario}.json").write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")
    return EXIT_OK if all(r.ok for r in reports) else EXIT_PATTERN


def _oracle_problems(manifest: RunManifest, config):
    """Random problems, or every row of every round of ``config`` when one is given."""
    if config is None:
        rng = np.random.default_rng([manifest.seed or 0, 9])
        for _ in range(manifest.instances):
            yield random_problem(rng, int(rng.integers(2, manifest.max_m + 1)))
        return
    result = run(config, baseline=False)
    for problems in replay_problems(config, result):
        yield from problems


def cmd_oracle_check(manifest: RunManifest) -> int:
    """Greedy rows against exhaustive enumeration; prints the optimality gap histogram."""
    config = None
    if manifest.config is not None:
        config, code = _load(manifest)
        if config is None:
            return code
        if config.m > MAX_BRUTE_FORCE:
            _err(f"config has {config.m} clients; the exact oracle handles at most {MAX_BRUTE_FORCE}")
            return EXIT_CONFIG
    total = local_fail = worse = 0
    gaps = []
    for prob in _oracle_problems(manifest, config):
        row = learn_row(prob)
        _, best = brute_force_row(prob)
        gap = phi(prob, row) - best
        total += 1
        local_fail += not check_local_opt(prob, row)
        worse += gap < -1e-9
        gaps.append(gap)
    if total == 0:
        return EXIT_CONFIG
    gaps = np.array(gaps)
    print(f"[{'PASS' if local_fail == 0 else 'FAIL'}] local optimality: {total - local_fail}/{total}")
    print(f"[{'PASS' if worse == 0 else 'FAIL'}] phi(greedy) >= phi(optimum): {total - worse}/{total}")
    print(f"median gap {np.median(gaps):.3e}, max gap {gaps.max():.3e}, greedy optimal in {np.mean(gaps <= 1e-12):.1%}")
    for line in gap_histogram(gaps):
        print(f"    {line}")
    return EXIT_OK if local_fail == 0 and worse == 0 else EXIT_PROPERTY


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="modelmarket", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=False):
        p.add_argument("--config", type=Path, required=config_required, help="JSON config file")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", type=Path, default=Path("out"), help="output directory")

    p = sub.add_parser("run", help="simulate a config and write report files")
    common(p, config_required=True)

    p = sub.add_parser("verify", help="run the property suites")
    common(p)
    for name in SUITES:
        p.add_argument(f"--{name}", action="append_const", const=name, dest="suites")
    p.add_argument("--all", action="store_const", const=list(SUITES), dest="all_suites")

    p = sub.add_parser("scenario", help="run a preset market and check its pattern")
    p.add_argument("name", choices=SCENARIOS)
    common(p)

    p = sub.add_parser("oracle-check", help="compare greedy rows with exhaustive search")
    common(p)
    p.add_argument("--instances", type=int, default=1000, help="random instances when no config is given")
    p.add_argument("--max-m", type=int, default=10, help="largest random market size")
    return parser


def manifest_from_args(args: argparse.Namespace) -> RunManifest:
    suites = list(getattr(args, "all_suites", None) or getattr(args, "suites", None) or [])
    return RunManifest(
        command=args.command,
        config=args.config,
        seed=args.seed,
        out=args.out,
        suites=list(dict.fromkeys(suites)),
        scenario=getattr(args, "name", None),
        instances=getattr(args, "instances", 1000),
        max_m=getattr(args, "max_m", 10),
    )


COMMANDS = {"run": cmd_run, "verify": cmd_verify, "scenario": cmd_scenario, "oracle-check": cmd_oracle_check}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    manifest = manifest_from_args(args)
    return COMMANDS[manifest.command](manifest)


if __name__ == "__main__":
    sys.exit(main())
