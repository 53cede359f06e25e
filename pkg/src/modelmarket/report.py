"""Report files for a finished run: rounds.csv, graph_<t>.csv, ledger.csv, result.json.

Floats are written with ``repr`` so every file round-trips exactly and two
runs with the same config and seed produce identical bytes.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .domain import SimConfig, config_to_dict
from .market import SimulationResult


def _num(x):
    """JSON-safe float: infinities and NaN become strings, everything else stays numeric."""
    x = float(x)
    if math.isfinite(x):
        return x
    return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")


def _vec(a) -> list:
    return [_num(v) for v in np.asarray(a, dtype=float).ravel()]


def _mat(a) -> list:
    return [_vec(r) for r in np.asarray(a, dtype=float)]


def result_dict(config: SimConfig, result: SimulationResult) -> dict:
    rounds = []
    for r in result.rounds:
        rounds.append({
            "round": r.round,
            "graph": np.asarray(r.graph, dtype=int).tolist(),
            "remittances": _mat(r.ledger.remittances),
            "net_bills": _vec(r.ledger.net_bills),
            "utilities": _vec(r.utilities),
            "gains": _vec(r.gains),
            "accuracies": _vec(r.accuracies),
            "quit": [bool(q) for q in r.quit_flags],
            "social_welfare": _num(r.social_welfare),
        })
    base = result.local_baseline_accuracies
    return {
        "config": config_to_dict(config),
        "rounds": rounds,
        "cumulative": {"paid": _mat(result.cumulative.paid), "net": _vec(result.cumulative.net)},
        "cumulative_utilities": _vec(result.cumulative_utilities),
        "warmup_accuracies": _vec(result.warmup_accuracies),
        "final_accuracies": _vec(result.final_accuracies),
        "local_baseline_accuracies": None if base is None else _vec(base),
        "active": [bool(a) for a in result.active],
    }


def result_json(config: SimConfig, result: SimulationResult) -> str:
    return json.dumps(result_dict(config, result), indent=1, sort_keys=True) + "\n"


def round_rows(result: SimulationResult) -> list[list]:
    """One row per client per market round."""
    rows = []
    for r in result.rounds:
        indeg = r.graph.sum(axis=0)
        outdeg = r.graph.sum(axis=1)
        for i in range(len(r.utilities)):
            rows.append([r.round, i, repr(float(r.utilities[i])), repr(float(r.gains[i])), int(indeg[i]),
                         int(outdeg[i]), repr(float(r.ledger.net_bills[i])), repr(float(r.accuracies[i]))])
    return rows


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def write_reports(out_dir, config: SimConfig, result: SimulationResult) -> list[Path]:
    """Write every report file into ``out_dir`` (created if missing) and return their paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    path = out / "rounds.csv"
    _write_csv(path, ["round", "id", "utility", "gain", "in_degree", "out_degree", "bill", "accuracy"],
               round_rows(result))
    written.append(path)

    for r in result.rounds:
        path = out / f"graph_{r.round}.csv"
        m = r.graph.shape[0]
        _write_csv(path, ["importer"] + [str(j) for j in range(m)],
                   [[i] + [int(v) for v in r.graph[i]] for i in range(m)])
        written.append(path)

    path = out / "ledger.csv"
    paid = result.cumulative.paid
    _write_csv(path, ["payer", "payee", "amount"],
               [[int(i), int(j), repr(float(paid[i, j]))] for i, j in zip(*np.nonzero(paid))])
    written.append(path)

    path = out / "result.json"
    path.write_text(result_json(config, result), encoding="utf-8")
    written.append(path)
    return written
