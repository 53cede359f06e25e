"""Collaborator selection: per-importer threshold greedy plus exact oracles.

Each importer ``i`` minimises

    phi(a) = lam * sum_j a_j (N_j / N_i) d_ij + sum_j a_j c_j - G_i(a)

over binary rows with ``a_i = 0``. The greedy admits sellers in decreasing
order of their threshold and keeps scanning after a rejection, so that on exit
no unselected seller could lower ``phi`` (the plain break-on-first-failure
variant can leave a cheaper small seller unexamined).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import GraphProblemMismatch, LengthMismatch, SelfEdge, TooManyClients
from .gain import GainParams, eval_G, solve_thresholds

MAX_BRUTE_FORCE = 20


@dataclass(frozen=True)
class GraphProblem:
    importer: int
    model_distances: np.ndarray
    sizes: np.ndarray
    costs: np.ndarray
    gain_params: GainParams
    lam: float

    def __post_init__(self):
        m = len(self.sizes)
        if len(self.model_distances) != m or len(self.costs) != m:
            raise LengthMismatch("distances, sizes and costs must have equal length")
        if not 0 <= self.importer < m:
            raise ValueError(f"importer {self.importer} out of range for {m} clients")
        d = np.asarray(self.model_distances, dtype=float)
        if not (np.all(np.isfinite(d)) and np.all(d >= 0)):
            raise ValueError("model distances must be finite and non-negative")
        if d[self.importer] != 0:
            raise ValueError("distance of the importer to itself must be 0")

    @property
    def m(self) -> int:
        return len(self.sizes)


def unit_prices(problem: GraphProblem) -> np.ndarray:
    """c_j + lam (N_j / N_i) d_ij for every j; the importer's own entry is +inf."""
    sizes = np.asarray(problem.sizes, dtype=float)
    d = np.asarray(problem.model_distances, dtype=float)
    own = sizes[problem.importer]
    prices = np.asarray(problem.costs, dtype=float) + problem.lam * (sizes / own) * d
    prices[problem.importer] = np.inf
    return prices


def row_thresholds(problem: GraphProblem) -> np.ndarray:
    gp = problem.gain_params
    t = solve_thresholds(gp.eagerness, gp.own_size, problem.sizes, unit_prices(problem))
    t[problem.importer] = 0.0
    return t


def phi(problem: GraphProblem, row) -> float:
    row = np.asarray(row)
    if row.shape != (problem.m,):
        raise LengthMismatch(f"row must have length {problem.m}")
    if row[problem.importer] != 0:
        raise SelfEdge(f"client {problem.importer} cannot import its own model")
    sel = row == 1
    costs = np.asarray(problem.costs, dtype=float)
    if np.any(np.isinf(costs[sel])):
        return float("inf")
    sizes = np.asarray(problem.sizes, dtype=float)
    d = np.asarray(problem.model_distances, dtype=float)
    own = sizes[problem.importer]
    similarity = problem.lam * float(np.sum((sizes[sel] / own) * d[sel]))
    return similarity + float(np.sum(costs[sel])) - eval_G(problem.gain_params, row, sizes)


def greedy_row(problem: GraphProblem, thresholds: np.ndarray) -> np.ndarray:
    """Run the admission loop against precomputed thresholds."""
    sizes = np.asarray(problem.sizes, dtype=float)
    row = np.zeros(problem.m, dtype=np.int8)
    # decreasing threshold, lowest index first among equals (inf sorts first)
    order = sorted((j for j in range(problem.m) if j != problem.importer), key=lambda j: (-thresholds[j], j))
    n = 0.0
    for k in order:
        if thresholds[k] == 0:
            break
        if n + sizes[k] < thresholds[k]:
            row[k] = 1
            n += sizes[k]
    return row


def learn_row(problem: GraphProblem) -> np.ndarray:
    return greedy_row(problem, row_thresholds(problem))


def learn_graph(problems: Sequence[GraphProblem]) -> np.ndarray:
    """Stack ``learn_row`` over all importers.

    Thresholds for every pair are solved in one vectorized call; the bisection
    is elementwise so each row is identical to a standalone ``learn_row``.
    """
    m = len(problems)
    for i, p in enumerate(problems):
        if p.importer != i or p.m != m:
            raise GraphProblemMismatch(f"problem {i} has importer {p.importer} over {p.m} clients, expected {m}")
    graph = np.zeros((m, m), dtype=np.int8)
    if m == 0:
        return graph
    K = np.array([p.gain_params.eagerness for p in problems])[:, None]
    own = np.array([p.gain_params.own_size for p in problems])[:, None]
    sizes = np.stack([np.asarray(p.sizes, dtype=float) for p in problems])
    prices = np.stack([unit_prices(p) for p in problems])
    thresholds = solve_thresholds(K, own, sizes, prices)
    np.fill_diagonal(thresholds, 0.0)
    for i, p in enumerate(problems):
        graph[i] = greedy_row(p, thresholds[i])
    return graph


def check_local_opt(problem: GraphProblem, row) -> bool:
    """True iff dropping any selected seller raises phi and adding any other does not lower it."""
    row = np.asarray(row, dtype=np.int8)
    base = phi(problem, row)
    for j in range(problem.m):
        if j == problem.importer:
            continue
        flipped = row.copy()
        flipped[j] = 1 - flipped[j]
        other = phi(problem, flipped)
        if row[j] == 1 and not other > base:
            return False
        if row[j] == 0 and not other >= base:
            return False
    return True


def _subset_matrix(m: int, importer: int) -> np.ndarray:
    others = [j for j in range(m) if j != importer]
    k = len(others)
    codes = np.arange(2**k, dtype=np.int64)
    bits = (codes[:, None] >> np.arange(k - 1, -1, -1)) & 1  # first column = lowest other index
    rows = np.zeros((2**k, m), dtype=np.int8)
    rows[:, others] = bits
    return rows  # ascending lexicographic order


def brute_force_row(problem: GraphProblem) -> tuple[np.ndarray, float]:
    """Exact minimiser of phi by enumeration; ties go to the lexicographically smallest row."""
    m = problem.m
    if m > MAX_BRUTE_FORCE:
        raise TooManyClients(f"brute force is limited to {MAX_BRUTE_FORCE} clients, got {m}")
    rows = _subset_matrix(m, problem.importer)
    sizes = np.asarray(problem.sizes, dtype=float)
    costs = np.asarray(problem.costs, dtype=float)
    d = np.asarray(problem.model_distances, dtype=float)
    own = sizes[problem.importer]
    finite_cost = np.where(np.isinf(costs), 0.0, costs)
    has_inf = (rows[:, np.isinf(costs)] == 1).any(axis=1)
    gp = problem.gain_params
    imported = rows @ sizes
    gains = np.where(imported > 0, np.sqrt(gp.eagerness / own) - np.sqrt(gp.eagerness / (own + imported)), 0.0)
    values = problem.lam * (rows @ ((sizes / own) * d)) + rows @ finite_cost - gains
    values = np.where(has_inf, np.inf, values)
    best = values.min()
    # rescore near-minimal rows with the scalar objective so comparisons with phi() are exact
    cand = np.flatnonzero(values <= best + 1e-9 * max(1.0, abs(best))) if np.isfinite(best) else np.array([0])
    scored = [(phi(problem, rows[c]), c) for c in cand]
    top = min(s for s, _ in scored)
    c = min(c for s, c in scored if s == top)
    return rows[c].copy(), float(top)
