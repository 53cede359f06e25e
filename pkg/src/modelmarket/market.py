"""Round orchestration: upload, graph learning, billing, aggregation, training.

The mechanism only ever sees reported sizes and costs and the uploaded
models. Utilities are scored with each client's true cost, which is what
lets misreporting show up as lost utility.
"""

from __future__ import annotations

import copy
import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .domain import INF, ClientProfile, PaymentLedger, Role, RoundReport, SimConfig, validate_config
from .errors import MarketError, SimulationAborted
from .gain import GainParams, eval_G
from .graph import GraphProblem, learn_graph
from .payment import CumulativeLedger, pairwise_payment, restrict, settle
from .training import (
    SyntheticDataset,
    apply_attack,
    attack_rng,
    distance_matrix,
    evaluate,
    gen_data,
    local_train,
    prox_center,
)

log = logging.getLogger(__name__)


@dataclass
class ClientState:
    profile: ClientProfile
    data: SyntheticDataset
    params: np.ndarray
    prev_params: np.ndarray  # model at the start of the last training step
    best_params: np.ndarray
    best_accuracy: float
    accuracy: float
    active: bool = True
    cumulative_utility: float = 0.0
    accuracy_trace: list = field(default_factory=list)


@dataclass(frozen=True)
class SimulationResult:
    rounds: list
    cumulative: CumulativeLedger
    warmup_accuracies: np.ndarray
    final_accuracies: np.ndarray
    local_baseline_accuracies: Optional[np.ndarray]
    active: np.ndarray

    @property
    def cumulative_utilities(self) -> np.ndarray:
        if not self.rounds:
            return np.zeros(len(self.final_accuracies))
        return np.sum([r.utilities for r in self.rounds], axis=0)


def reported_profile(state: ClientState) -> tuple[float, float]:
    """(reported size, reported cost), fixed for the whole run."""
    return declared(state.profile)


def declared(p: ClientProfile) -> tuple[float, float]:
    size, cost = p.data_size, p.cost
    if p.dishonesty is not None:
        if p.dishonesty.target == "data_size":
            size = p.dishonesty.ratio * size
        elif p.dishonesty.target == "cost":
            cost = p.dishonesty.ratio * cost
    return size, cost


def suffered_costs(graph: np.ndarray, true_costs: np.ndarray) -> np.ndarray:
    """In-degree times own cost; a client nobody imports suffers nothing, even at infinite cost."""
    indeg = graph.sum(axis=0)
    return np.where(indeg > 0, indeg * np.where(np.isinf(true_costs), 0.0, true_costs), 0.0)


def utilities(graph: np.ndarray, ledger: PaymentLedger, gains: np.ndarray, true_costs: np.ndarray) -> np.ndarray:
    return np.asarray(gains, dtype=float) - suffered_costs(graph, true_costs) - ledger.net_bills


def compute_utility(i: int, state: ClientState, graph: np.ndarray, ledger: PaymentLedger, gains) -> float:
    """Gain minus suffered cost minus net bill for client ``i``."""
    indeg = int(graph[:, i].sum())
    suffered = indeg * state.profile.cost if indeg else 0.0
    return float(gains[i]) - suffered - float(ledger.net_bills[i])


def row_gains(graph: np.ndarray, problems: Sequence[GraphProblem]) -> np.ndarray:
    return np.array([eval_G(p.gain_params, graph[i], p.sizes) for i, p in enumerate(problems)])


def social_welfare(graph: np.ndarray, problems: Sequence[GraphProblem], true_costs) -> float:
    """Total gain minus total suffered cost; payments cancel out."""
    true_costs = np.asarray(true_costs, dtype=float)
    total = 0.0
    for i, p in enumerate(problems):
        sel = graph[i] == 1
        total += eval_G(p.gain_params, graph[i], p.sizes) - float(np.sum(true_costs[sel]))
    return total


def quit_decision(state: ClientState, bill: float, utility: float, config: SimConfig, t: int) -> bool:
    """True means the client pays its bill and stays."""
    cid = state.profile.id
    if cid in config.forced_quits and t >= config.forced_quits[cid]:
        return False
    if state.profile.role is Role.ATTACKER:
        return True
    if config.quit_policy == "myopic":
        return utility >= 0
    return True


def default_eta(config: SimConfig, sizes: np.ndarray, active: np.ndarray, i: int) -> float:
    if config.eta is not None:
        return config.eta
    total = float(np.sum(sizes[active]))
    return 0.5 * sizes[i] / max(1.0, total)


def build_problems(uploads, states, config: SimConfig, cost_override: Optional[float] = None):
    m = len(states)
    active = np.array([s.active for s in states])
    reps = [reported_profile(s) for s in states]
    sizes = np.array([r[0] for r in reps], dtype=float)
    costs = np.array([r[1] for r in reps], dtype=float)
    if cost_override is not None:
        costs[:] = cost_override
    costs[~active] = INF
    D = distance_matrix(uploads, config.distance_normalized)
    problems = []
    for i, s in enumerate(states):
        K = s.profile.eagerness if s.active else 0.0
        problems.append(GraphProblem(i, D[i].copy(), sizes, costs, GainParams(K, sizes[i]), config.lam))
    return problems, sizes, D


def replay_problems(config: SimConfig, result: "SimulationResult") -> list[list[GraphProblem]]:
    """Rebuild each market round's graph problems from the recorded distances.

    A client is active in a round unless it quit in an earlier one; this
    mirrors :func:`build_problems` without re-running training.
    """
    m = config.m
    reps = [declared(p) for p in config.clients]
    sizes = np.array([r[0] for r in reps], dtype=float)
    active = np.ones(m, dtype=bool)
    out = []
    for rep in result.rounds:
        costs = np.array([r[1] for r in reps], dtype=float)
        costs[~active] = INF
        out.append([
            GraphProblem(i, rep.distances[i].copy(), sizes, costs,
                         GainParams(p.eagerness if active[i] else 0.0, sizes[i]), config.lam)
            for i, p in enumerate(config.clients)
        ])
        active = active & ~np.asarray(rep.quit_flags, dtype=bool)
    return out


def run_round(states: Sequence[ClientState], config: SimConfig, t: int,
              cost_override: Optional[float] = None) -> tuple[RoundReport, list[ClientState]]:
    states = [copy.copy(s) for s in states]
    m = len(states)
    active = np.array([s.active for s in states])
    if not active.any():
        raise MarketError("no active clients left")

    for s in states:
        if s.active and s.profile.role is Role.ATTACKER and config.attack is not None:
            s.params = apply_attack(s.prev_params, s.params, config.attack, attack_rng(config.seed, s.profile.id, t))
    uploads = [s.params for s in states]

    problems, sizes, D = build_problems(uploads, states, config, cost_override)
    graph = learn_graph(problems)
    ledger = pairwise_payment(graph, problems)
    true_costs = np.array([s.profile.cost for s in states], dtype=float)
    gains = row_gains(graph, problems)
    utils = utilities(graph, ledger, gains, true_costs)

    quits = np.zeros(m, dtype=bool)
    for i, s in enumerate(states):
        if s.active and not quit_decision(s, float(ledger.net_bills[i]), float(utils[i]), config, t):
            quits[i] = True
    paying = active & ~quits
    if quits.any():
        # nothing is charged or delivered to or from a client that walks away
        graph = (graph * np.outer(paying, paying)).astype(np.int8)
        ledger = restrict(ledger, paying)
        gains = row_gains(graph, problems)
        utils = utilities(graph, ledger, gains, true_costs)
    sw = social_welfare(graph, problems, true_costs)

    for i, s in enumerate(states):
        if paying[i]:
            eta = default_eta(config, sizes, paying, i)
            center = prox_center(uploads[i], graph[i], uploads, sizes, eta, sizes[i], config.distance_normalized)
            new = local_train(uploads[i], center, s.data, config.learner, config.lam, eta)
            s.prev_params = uploads[i]
            s.params = new
            s.accuracy = evaluate(new, s.data, config.learner)
            s.accuracy_trace = s.accuracy_trace + [s.accuracy]
            if s.accuracy > s.best_accuracy:
                s.best_accuracy, s.best_params = s.accuracy, new
        elif quits[i]:
            log.info("round %d: client %d quits", t, i)
            s.active = False
            s.params = s.best_params
            s.accuracy = s.best_accuracy
        s.cumulative_utility += float(utils[i])

    report = RoundReport(
        round=t,
        graph=graph,
        ledger=ledger,
        utilities=utils,
        social_welfare=sw,
        gains=gains,
        accuracies=np.array([s.accuracy for s in states]),
        quit_flags=quits,
        distances=D,
    )
    return report, states


def warmup(config: SimConfig, datasets: Sequence[SyntheticDataset]) -> list[ClientState]:
    """Round 0: every client trains from the shared initial model, regularized toward it."""
    theta0 = np.zeros(config.learner.dim)
    sizes = np.array([declared(p)[0] for p in config.clients], dtype=float)
    states = []
    everyone = np.ones(len(sizes), dtype=bool)
    for i, (p, data) in enumerate(zip(config.clients, datasets)):
        eta = default_eta(config, sizes, everyone, i)
        theta1 = local_train(theta0, theta0, data, config.learner, config.lam, eta)
        acc = evaluate(theta1, data, config.learner)
        states.append(ClientState(
            profile=p, data=data, params=theta1, prev_params=theta0,
            best_params=theta1, best_accuracy=acc, accuracy=acc, accuracy_trace=[acc],
        ))
    return states


def simulate(config: SimConfig, datasets=None, cost_override: Optional[float] = None) -> SimulationResult:
    """Warmup plus ``rounds - 1`` market rounds, without the matched baseline."""
    if datasets is None:
        datasets = gen_data(config.data, config.clients, config.seed)
    states = warmup(config, datasets)
    warm = np.array([s.accuracy for s in states])
    m = config.m
    cumulative = CumulativeLedger.zeros(m)
    reports = []
    for t in range(1, config.rounds):
        try:
            report, states = run_round(states, config, t, cost_override)
            cumulative = settle(report.ledger, cumulative)
        except MarketError as exc:
            partial = SimulationResult(reports, cumulative, warm, np.array([s.accuracy for s in states]), None,
                                       np.array([s.active for s in states]))
            raise SimulationAborted(f"round {t} failed: {exc}", partial) from exc
        reports.append(report)
        if not any(s.active for s in states):
            break
    return SimulationResult(
        rounds=reports,
        cumulative=cumulative,
        warmup_accuracies=warm,
        final_accuracies=np.array([s.accuracy for s in states]),
        local_baseline_accuracies=None,
        active=np.array([s.active for s in states]),
    )


def run(config: SimConfig, baseline: bool = True) -> SimulationResult:
    """Validated simulation plus, optionally, the local-only baseline on identical data.

    The baseline is the same code path with every reported cost forced to
    +inf, so no edge can ever form.
    """
    validate_config(config)
    datasets = gen_data(config.data, config.clients, config.seed)
    result = simulate(config, datasets)
    if not baseline:
        return result
    local = simulate(config, datasets, cost_override=INF)
    return SimulationResult(
        rounds=result.rounds,
        cumulative=result.cumulative,
        warmup_accuracies=result.warmup_accuracies,
        final_accuracies=result.final_accuracies,
        local_baseline_accuracies=local.final_accuracies,
        active=result.active,
    )
