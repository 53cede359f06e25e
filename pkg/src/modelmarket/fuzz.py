"""Random valid configs and graph problems for the property suites.

Configs are deliberately tiny (few features, short training) so that a
thousand complete simulations fit in well under a minute, while still
covering every role, both quit policies, dishonesty and all attack kinds.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from .domain import (
    ATTACK_KINDS,
    INF,
    AttackSpec,
    ClientProfile,
    DataSpec,
    Dishonesty,
    LearnerSpec,
    Role,
    SimConfig,
)
from .gain import GainParams
from .graph import GraphProblem


_ROLES = (Role.TRADER, Role.BUYER, Role.SELLER, Role.ATTACKER)
_ROLE_P = (0.55, 0.15, 0.15, 0.15)


def _log_uniform(rng: np.random.Generator, lo: float, hi: float) -> float:
    return float(np.exp(rng.uniform(np.log(lo), np.log(hi))))


def random_profile(rng: np.random.Generator, idx: int, role: Role, liar_p: float = 0.0) -> ClientProfile:
    size = float(rng.integers(5, 41))
    if role is Role.TRADER:
        p = ClientProfile(idx, size, _log_uniform(rng, 1e-3, 0.2), _log_uniform(rng, 0.5, 50.0))
    elif role is Role.BUYER:
        p = ClientProfile(idx, size, INF, _log_uniform(rng, 0.5, 50.0), Role.BUYER)
    else:
        p = ClientProfile(idx, size, 0.0, 0.0, role)
    if role is Role.TRADER and rng.random() < liar_p:
        target = "cost" if rng.random() < 0.5 else "data_size"
        ratio = float(rng.choice([0.1, 0.5, 2.0, 5.0, 10.0]))
        p = ClientProfile(p.id, p.data_size, p.cost, p.eagerness, p.role, Dishonesty(target, ratio))
    return p


def random_config(rng: np.random.Generator, m_range: tuple[int, int] = (2, 16), rounds: int = 3,
                  liar_p: float = 0.1, seed: Optional[int] = None) -> SimConfig:
    """A small valid simulation config with ``m`` drawn uniformly from ``m_range`` (inclusive)."""
    m = int(rng.integers(m_range[0], m_range[1] + 1))
    roles = rng.choice(len(_ROLES), size=m, p=_ROLE_P)
    clients = tuple(random_profile(rng, i, _ROLES[r], liar_p) for i, r in enumerate(roles))
    has_attacker = any(p.role is Role.ATTACKER for p in clients)
    features = 4
    n_clusters = int(rng.integers(1, 4))
    data = DataSpec(mode="cluster", classes=3, features=features, beta=float(rng.choice([0.5, 10.0])),
                    n_clusters=n_clusters, class_sep=1.0, noise=1.0, test_size=100)
    learner = LearnerSpec(classes=3, feature_dim=features, steps=3, learn_rate=0.5, l2=0.0)
    attack = None
    if has_attacker:
        kind = str(rng.choice(ATTACK_KINDS))
        attack = AttackSpec(kind, 0.0 if kind in ("shuffle", "sign_flip") else float(rng.uniform(0.1, 2.0)))
    return SimConfig(
        clients=clients,
        lam=_log_uniform(rng, 0.01, 1.0),
        rounds=rounds,
        seed=int(rng.integers(0, 2**31)) if seed is None else seed,
        learner=learner,
        data=data,
        attack=attack,
        quit_policy=str(rng.choice(["solvent", "myopic"])),
    )


def random_problems(rng: np.random.Generator, m: int, buyer_p: float = 0.1,
                    zero_k_p: float = 0.1) -> list[GraphProblem]:
    """One GraphProblem per importer over a shared random market of ``m`` clients."""
    sizes = rng.integers(1, 60, size=m).astype(float)
    costs = np.array([INF if rng.random() < buyer_p else _log_uniform(rng, 1e-3, 1.0) for _ in range(m)])
    eager = np.array([0.0 if rng.random() < zero_k_p else _log_uniform(rng, 0.1, 100.0) for _ in range(m)])
    pts = rng.standard_normal((m, 3)) * rng.uniform(0.05, 1.0)
    D = ((pts[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2)
    np.fill_diagonal(D, 0.0)
    lam = _log_uniform(rng, 1e-3, 1.0)
    return [GraphProblem(i, D[i].copy(), sizes.copy(), costs.copy(), GainParams(float(eager[i]), float(sizes[i])), lam)
            for i in range(m)]


def random_problem(rng: np.random.Generator, m: int) -> GraphProblem:
    """A single-importer problem; the importer is client 0 of a random market."""
    return random_problems(rng, m)[0]
