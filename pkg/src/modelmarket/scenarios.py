"""Preset markets and the qualitative patterns each one must show.

Every checker returns a :class:`ScenarioReport`; ``ok`` is the conjunction
of its named checks.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .domain import (
    INF,
    AttackSpec,
    ClientProfile,
    DataSpec,
    Dishonesty,
    LearnerSpec,
    Role,
    SimConfig,
)
from .market import SimulationResult, run
from .training import gen_data

ACC_SLACK = 0.02
ATTACK_KINDS = ("shuffle", "sign_flip", "constant", "gaussian")
ATTACK_MAGNITUDE = {"shuffle": 0.0, "sign_flip": 0.0, "constant": 1.0, "gaussian": 1.0}
COST_LIE_RATIOS = (2.0, 5.0, 10.0)
LIARS_ETA = 0.12


def _learner() -> LearnerSpec:
    return LearnerSpec(classes=4, feature_dim=20, steps=20, learn_rate=0.5, l2=0.0)


def _data(clusters=None, n_clusters=2) -> DataSpec:
    return DataSpec(mode="cluster", classes=4, features=20, beta=10.0, n_clusters=n_clusters,
                    class_sep=0.7, noise=1.0, test_size=200, clusters=clusters)


def two_cluster(seed: int = 0, rounds: int = 10) -> SimConfig:
    """Eight honest traders split into two clusters of four."""
    clients = tuple(ClientProfile(i, 15.0, 0.01, 10.0) for i in range(8))
    return SimConfig(clients, lam=0.1, rounds=rounds, seed=seed, learner=_learner(), data=_data())


def with_attacker(base: SimConfig, kind: str, magnitude: Optional[float] = None) -> SimConfig:
    """Append one attacker (sharing cluster 0's distribution) to ``base``."""
    m = base.m
    attacker = ClientProfile(m, 15.0, 0.0, 0.0, Role.ATTACKER)
    clusters = tuple(i * base.data.n_clusters // m for i in range(m)) + (0,)
    mag = ATTACK_MAGNITUDE[kind] if magnitude is None else magnitude
    return replace(
        base,
        clients=base.clients + (attacker,),
        data=replace(base.data, clusters=clusters),
        attack=AttackSpec(kind, mag),
    )


def market_roles(seed: int = 0, rounds: int = 10) -> SimConfig:
    """Twelve clients: traders, buyers, sellers and one attacker across two clusters."""
    rng = np.random.default_rng([seed, 7])
    roles = [Role.TRADER, Role.TRADER, Role.BUYER, Role.BUYER, Role.SELLER] * 2 + [Role.TRADER, Role.ATTACKER]
    clusters = (0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 1, 0)
    clients = []
    for i, role in enumerate(roles):
        if role is Role.TRADER:
            p = ClientProfile(i, 15.0, float(rng.uniform(0.005, 0.02)), float(rng.uniform(5.0, 15.0)))
        elif role is Role.BUYER:
            p = ClientProfile(i, 10.0, INF, float(rng.uniform(5.0, 15.0)), Role.BUYER)
        elif role is Role.SELLER:
            p = ClientProfile(i, 30.0, 0.0, 0.0, Role.SELLER)
        else:
            p = ClientProfile(i, 15.0, 0.0, 0.0, Role.ATTACKER)
        clients.append(p)
    return SimConfig(tuple(clients), lam=0.1, rounds=rounds, seed=seed, learner=_learner(),
                     data=_data(clusters), attack=AttackSpec("gaussian", 1.0))


def liars_base(seed: int = 0, rounds: int = 10) -> SimConfig:
    """Two-cluster market plus a third cluster holding a selling trader and its buyer.

    Client 0 is the data-size liar candidate. Client 8 is a trader with
    negligible eagerness whose only customer is buyer 9. The buyer's largest
    possible marginal gain from 8 is sqrt(63) * (1/sqrt(60) - 1/sqrt(120)),
    about 0.30; the honest cost 0.165 sits below it, while any overstatement
    of 2x or more exceeds it. A single market-wide eta makes the aggregation
    weights scale with reported size, so understating size distorts the
    liar's own aggregate.
    """
    base = two_cluster(seed, rounds)
    seller = ClientProfile(8, 60.0, 0.165, 1e-4)
    buyer = ClientProfile(9, 60.0, INF, 63.0, Role.BUYER)
    clusters = (0, 0, 0, 0, 1, 1, 1, 1, 2, 2)
    return replace(base, clients=base.clients + (seller, buyer), eta=LIARS_ETA,
                   data=replace(base.data, n_clusters=3, clusters=clusters))


DATA_LIAR = 0
COST_LIAR = 8


def lie(config: SimConfig, client: int, target: str, ratio: float) -> SimConfig:
    clients = list(config.clients)
    clients[client] = replace(clients[client], dishonesty=Dishonesty(target, ratio))
    return replace(config, clients=tuple(clients))


@dataclass
class ScenarioReport:
    name: str
    checks: dict = field(default_factory=dict)
    metrics: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(self.checks.values())

    def lines(self) -> list[str]:
        out = [f"[{'PASS' if v else 'FAIL'}] {self.name}: {k}" for k, v in self.checks.items()]
        out += [f"    {k} = {v}" for k, v in self.metrics.items()]
        return out


def edge_fractions(result: SimulationResult, clusters) -> tuple[float, float]:
    """Mean over rounds of the fraction of possible intra- and inter-cluster edges present."""
    clusters = np.asarray(clusters)
    same = clusters[:, None] == clusters[None, :]
    np.fill_diagonal(same, False)
    cross = clusters[:, None] != clusters[None, :]
    intra = [r.graph[same].mean() for r in result.rounds]
    inter = [r.graph[cross].mean() for r in result.rounds]
    return float(np.mean(intra)), float(np.mean(inter))


def check_personalization(config: Optional[SimConfig] = None) -> ScenarioReport:
    config = config or two_cluster()
    res = run(config)
    clusters = [d.cluster for d in gen_data(config.data, config.clients, config.seed)]
    intra, inter = edge_fractions(res, clusters)
    fin, base = res.final_accuracies, res.local_baseline_accuracies
    rep = ScenarioReport("personalization")
    rep.checks["every client >= baseline - 0.02"] = bool(np.all(fin >= base - ACC_SLACK))
    rep.checks["mean accuracy above baseline"] = bool(fin.mean() > base.mean())
    rep.checks["intra-cluster edge fraction > inter"] = intra > inter
    rep.metrics.update(mean_accuracy=round(float(fin.mean()), 4), mean_baseline=round(float(base.mean()), 4),
                       intra_fraction=round(intra, 4), inter_fraction=round(inter, 4))
    return rep


def check_market_roles(config: Optional[SimConfig] = None) -> ScenarioReport:
    config = config or market_roles()
    res = run(config)
    roles = np.array([p.role.value for p in config.clients])
    net = res.cumulative.net
    received = res.cumulative.received
    util = res.cumulative_utilities
    gain = res.final_accuracies - res.local_baseline_accuracies
    sellers, buyers = roles == Role.SELLER.value, roles == Role.BUYER.value
    traders, attackers = roles == Role.TRADER.value, roles == Role.ATTACKER.value
    per_round_traders = np.array([r.utilities[traders] for r in res.rounds])
    rep = ScenarioReport("market_roles")
    # net bill p is paid minus received, so a seller's income is -net
    rep.checks["sellers earn (net income > 0)"] = bool(np.all(-net[sellers] > 0))
    rep.checks["buyers pay (net income < 0)"] = bool(np.all(-net[buyers] < 0))
    rep.checks["buyers beat their local baseline"] = bool(np.all(gain[buyers] > 0))
    rep.checks["traders keep non-negative utility"] = bool(np.all(per_round_traders >= -1e-9))
    rep.checks["attacker receives ~0"] = bool(np.all(np.abs(received[attackers]) <= 1e-9))
    rep.metrics.update(
        seller_income=np.round(-net[sellers], 4).tolist(),
        buyer_income=np.round(-net[buyers], 4).tolist(),
        buyer_accuracy_gain=np.round(gain[buyers], 4).tolist(),
        trader_utility=np.round(util[traders], 4).tolist(),
        attacker_received=np.round(received[attackers], 6).tolist(),
    )
    return rep


def check_liars(config: Optional[SimConfig] = None) -> ScenarioReport:
    config = config or liars_base()
    honest = run(config, baseline=False)
    rep = ScenarioReport("liars")
    honest_cost = honest.cumulative_utilities[COST_LIAR]
    honest_rounds = np.array([r.utilities[COST_LIAR] for r in honest.rounds])
    rep.metrics["honest_cost_liar_utility"] = round(float(honest_cost), 6)
    rep.checks["honest seller-trader utility > 0"] = bool(honest_cost > 0)
    for ratio in COST_LIE_RATIOS:
        res = run(lie(config, COST_LIAR, "cost", ratio), baseline=False)
        per_round = np.array([r.utilities[COST_LIAR] for r in res.rounds])
        rep.checks[f"cost x{ratio:g}: per-round utility <= honest"] = bool(np.all(per_round <= honest_rounds + 1e-9))
        rep.checks[f"cost x{ratio:g}: cumulative utility == 0"] = bool(abs(res.cumulative_utilities[COST_LIAR]) <= 1e-9)
        rep.metrics[f"cost_x{ratio:g}_utility"] = round(float(res.cumulative_utilities[COST_LIAR]), 6)
    small = run(lie(config, DATA_LIAR, "data_size", 0.1), baseline=False)
    acc_h, acc_l = honest.final_accuracies[DATA_LIAR], small.final_accuracies[DATA_LIAR]
    rep.checks["size x0.1: liar accuracy < honest"] = bool(acc_l < acc_h)
    rep.metrics["size_honest_accuracy"] = float(acc_h)
    rep.metrics["size_x0.1_accuracy"] = float(acc_l)
    big = run(lie(config, DATA_LIAR, "data_size", 1e6), baseline=False)
    indeg = [int(r.graph[:, DATA_LIAR].sum()) for r in big.rounds]
    rep.checks["size x1e6: in-degree 0 every round"] = all(d == 0 for d in indeg)
    return rep


def check_attack(kind: str, base: Optional[SimConfig] = None) -> ScenarioReport:
    base = base or two_cluster()
    attacked = with_attacker(base, kind)
    clean = replace(attacked, attack=None)
    res_a = run(attacked, baseline=False)
    res_c = run(clean, baseline=False)
    a = attacked.m - 1
    benign = np.arange(attacked.m) != a
    late = [r for r in res_a.rounds if r.round >= 3]
    indeg = [int(r.graph[:, a].sum()) for r in late]
    received_late = float(sum(r.ledger.remittances[:, a].sum() for r in late))
    acc_a = res_a.final_accuracies[benign].mean()
    acc_c = res_c.final_accuracies[benign].mean()
    rep = ScenarioReport(f"attack/{kind}")
    rep.checks["attacker in-degree 0 from round 3"] = bool(late) and all(d == 0 for d in indeg)
    rep.checks["attacker paid nothing from round 3"] = received_late == 0.0
    rep.checks["benign mean accuracy within 0.02 of clean run"] = bool(abs(acc_a - acc_c) <= ACC_SLACK)
    rep.metrics.update(attacked_benign_accuracy=round(float(acc_a), 4), clean_benign_accuracy=round(float(acc_c), 4),
                       attacker_indegree_by_round=[int(r.graph[:, a].sum()) for r in res_a.rounds])
    return rep


SCENARIOS = ("market_roles", "liars", "attacks", "personalization")


def run_scenario(name: str, seed: int = 0) -> list[ScenarioReport]:
    if name == "market_roles":
        return [check_market_roles(market_roles(seed))]
    if name == "liars":
        return [check_liars(liars_base(seed))]
    if name == "attacks":
        return [check_attack(k, two_cluster(seed)) for k in ATTACK_KINDS]
    if name == "personalization":
        return [check_personalization(two_cluster(seed))]
    raise ValueError(f"unknown scenario {name!r}; choose from {', '.join(SCENARIOS)}")
