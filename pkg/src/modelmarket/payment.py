"""Per-edge remittances, net bills and the running ledger."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .domain import BALANCE_TOL, PaymentLedger
from .errors import GraphProblemMismatch, PaymentConsistencyError, UnbalancedLedger
from .gain import marginal_gain
from .graph import GraphProblem


def net_bills(remittances: np.ndarray) -> np.ndarray:
    """p_i = paid out minus received."""
    return remittances.sum(axis=1) - remittances.sum(axis=0)


def pairwise_payment(graph: np.ndarray, problems: Sequence[GraphProblem]) -> PaymentLedger:
    """Each importer pays every chosen seller its marginal gain less the similarity charge.

    Seller costs never enter the amount; they only decide whether the edge exists.
    """
    graph = np.asarray(graph)
    m = graph.shape[0]
    if graph.shape != (m, m) or len(problems) != m:
        raise GraphProblemMismatch(f"graph {graph.shape} does not match {len(problems)} problems")
    R = np.zeros((m, m))
    for i, prob in enumerate(problems):
        if prob.importer != i or prob.m != m:
            raise GraphProblemMismatch(f"problem {i} is for importer {prob.importer} over {prob.m} clients")
        row = graph[i]
        if row[i] != 0:
            raise GraphProblemMismatch(f"graph has a self edge at {i}")
        sizes = np.asarray(prob.sizes, dtype=float)
        own = sizes[i]
        for j in np.flatnonzero(row):
            r = marginal_gain(prob.gain_params, row, sizes, j) - prob.lam * (sizes[j] / own) * prob.model_distances[j]
            if r < 0:
                raise PaymentConsistencyError(f"negative remittance {r} from {i} to {j}; graph is not locally optimal")
            R[i, j] = r
    return PaymentLedger(R, net_bills(R))


def restrict(ledger: PaymentLedger, keep: np.ndarray) -> PaymentLedger:
    """Drop every remittance touching a client outside ``keep``."""
    keep = np.asarray(keep, dtype=bool)
    R = ledger.remittances * np.outer(keep, keep)
    return PaymentLedger(R, net_bills(R))


def check_balance(ledger: PaymentLedger, tol: float = BALANCE_TOL) -> float:
    total = float(np.sum(ledger.net_bills))
    if abs(total) > tol:
        raise UnbalancedLedger(f"net bills sum to {total}")
    return total


@dataclass(frozen=True)
class CumulativeLedger:
    paid: np.ndarray
    net: np.ndarray

    @classmethod
    def zeros(cls, m: int) -> "CumulativeLedger":
        return cls(np.zeros((m, m)), np.zeros(m))

    @property
    def received(self) -> np.ndarray:
        return self.paid.sum(axis=0)


def settle(ledger: PaymentLedger, cumulative: CumulativeLedger) -> CumulativeLedger:
    check_balance(ledger)
    return CumulativeLedger(cumulative.paid + ledger.remittances, cumulative.net + ledger.net_bills)


def ledger_rows(ledger: PaymentLedger, round_: int) -> list[tuple[int, int, int, float]]:
    R = ledger.remittances
    return [(round_, int(i), int(j), float(R[i, j])) for i, j in zip(*np.nonzero(R))]


def write_ledger_csv(path, rows: Iterable[tuple[int, int, int, float]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["round", "payer", "payee", "amount"])
        for r, i, j, amount in rows:
            w.writerow([r, i, j, repr(amount)])
