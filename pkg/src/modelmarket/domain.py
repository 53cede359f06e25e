"""Core value types, config validation and JSON round-tripping.

Costs are plain floats where ``math.inf`` marks a client that never sells.
IEEE arithmetic already gives the ordering we need (``inf`` beats every
finite value, ``x - inf == -inf``); the only care needed is in JSON, which
has no infinity literal, so infinite costs are written as the string ``"inf"``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ConfigError

INF = math.inf
BALANCE_TOL = 1e-9
MIN_TEST_SIZE = 100


class Role(str, Enum):
    TRADER = "trader"
    BUYER = "buyer"
    SELLER = "seller"
    ATTACKER = "attacker"


@dataclass(frozen=True)
class Dishonesty:
    """Misreport applied once, when the client first declares its profile."""

    target: str  # "data_size" or "cost"
    ratio: float


@dataclass(frozen=True)
class ClientProfile:
    id: int
    data_size: float
    cost: float
    eagerness: float
    role: Role = Role.TRADER
    dishonesty: Optional[Dishonesty] = None

    @property
    def honest(self) -> bool:
        return self.dishonesty is None and self.role is not Role.ATTACKER


@dataclass(frozen=True)
class LearnerSpec:
    kind: str = "softmax_linear"
    classes: int = 4
    feature_dim: int = 10
    steps: int = 20
    learn_rate: float = 0.5
    l2: float = 0.0

    @property
    def dim(self) -> int:
        return self.classes * (self.feature_dim + 1)


@dataclass(frozen=True)
class DataSpec:
    """Synthetic data generator settings.

    ``mode="dirichlet"`` splits one shared Gaussian-blob pool by per-client
    Dirichlet label proportions. ``mode="cluster"`` gives each cluster its own
    class means; label proportions inside a client still follow ``beta``.
    """

    mode: str = "cluster"
    classes: int = 4
    features: int = 10
    beta: float = 10.0
    n_clusters: int = 2
    class_sep: float = 1.0
    noise: float = 1.0
    test_size: int = 200
    pool_per_class: Optional[int] = None
    clusters: Optional[tuple[int, ...]] = None


@dataclass(frozen=True)
class AttackSpec:
    kind: str  # shuffle | sign_flip | constant | gaussian
    magnitude: float = 0.0


ATTACK_KINDS = ("shuffle", "sign_flip", "constant", "gaussian")
QUIT_POLICIES = ("solvent", "myopic")


@dataclass(frozen=True)
class SimConfig:
    clients: tuple[ClientProfile, ...]
    lam: float = 1.0
    eta: Optional[float] = None  # None: per-client default inside the stability bound
    rounds: int = 10
    seed: int = 0
    learner: LearnerSpec = field(default_factory=LearnerSpec)
    data: DataSpec = field(default_factory=DataSpec)
    attack: Optional[AttackSpec] = None
    distance_normalized: bool = False
    quit_policy: str = "solvent"
    forced_quits: dict = field(default_factory=dict)  # client id -> round it quits

    @property
    def m(self) -> int:
        return len(self.clients)

    def with_seed(self, seed: int) -> "SimConfig":
        return replace(self, seed=int(seed))


@dataclass(frozen=True)
class Violation:
    code: str
    message: str


@dataclass(frozen=True)
class PaymentLedger:
    """One round of remittances (payer row, payee column) and net bills."""

    remittances: np.ndarray
    net_bills: np.ndarray

    @classmethod
    def zeros(cls, m: int) -> "PaymentLedger":
        return cls(np.zeros((m, m)), np.zeros(m))


@dataclass(frozen=True)
class RoundReport:
    round: int
    graph: np.ndarray
    ledger: PaymentLedger
    utilities: np.ndarray
    social_welfare: float
    gains: np.ndarray
    accuracies: np.ndarray
    quit_flags: np.ndarray
    distances: Optional[np.ndarray] = None


def _profile_violations(p: ClientProfile, idx: int) -> list[Violation]:
    out = []
    tag = f"client {idx}"
    if p.id != idx:
        out.append(Violation("BadId", f"{tag}: id {p.id} does not match position {idx}"))
    if not (p.data_size > 0) or math.isinf(p.data_size):
        out.append(Violation("NonPositiveDataSize", f"{tag}: data_size must be finite and > 0, got {p.data_size}"))
    if math.isnan(p.cost) or p.cost < 0:
        out.append(Violation("NegativeCost", f"{tag}: cost must be >= 0, got {p.cost}"))
    if not (p.eagerness >= 0) or math.isinf(p.eagerness):
        out.append(Violation("NegativeEagerness", f"{tag}: eagerness must be finite and >= 0, got {p.eagerness}"))
    if p.role is Role.BUYER and p.cost != INF:
        out.append(Violation("RoleCostMismatch", f"{tag}: buyers must have infinite cost, got {p.cost}"))
    if p.role is not Role.BUYER and p.cost == INF:
        out.append(Violation("RoleCostMismatch", f"{tag}: only buyers may have infinite cost (role {p.role.value})"))
    if p.role in (Role.SELLER, Role.ATTACKER) and (p.cost != 0 or p.eagerness != 0):
        out.append(Violation("RoleCostMismatch", f"{tag}: {p.role.value}s need cost 0 and eagerness 0"))
    if p.role is Role.TRADER and not (0 < p.cost < INF and p.eagerness > 0):
        out.append(Violation("RoleCostMismatch", f"{tag}: traders need finite cost > 0 and eagerness > 0"))
    d = p.dishonesty
    if d is not None:
        if d.target not in ("data_size", "cost"):
            out.append(Violation("BadDishonesty", f"{tag}: unknown dishonesty target {d.target!r}"))
        if not (d.ratio > 0) or math.isinf(d.ratio):
            out.append(Violation("BadDishonesty", f"{tag}: dishonesty ratio must be finite and > 0"))
    return out


def config_violations(config: SimConfig) -> list[Violation]:
    """Every invariant violation in ``config`` (empty list when valid)."""
    out: list[Violation] = []
    if len(config.clients) == 0:
        out.append(Violation("NoClients", "at least one client is required"))
    for idx, p in enumerate(config.clients):
        out.extend(_profile_violations(p, idx))
    if not (config.lam > 0) or math.isinf(config.lam):
        out.append(Violation("BadLambda", f"lambda must be finite and > 0, got {config.lam}"))
    if config.eta is not None and (not (config.eta > 0) or math.isinf(config.eta)):
        out.append(Violation("BadEta", f"eta must be finite and > 0, got {config.eta}"))
    if config.rounds < 1:
        out.append(Violation("BadRounds", f"rounds must be >= 1, got {config.rounds}"))
    lr, ds = config.learner, config.data
    if lr.kind != "softmax_linear":
        out.append(Violation("BadLearner", f"unknown learner kind {lr.kind!r}"))
    if lr.classes < 2 or lr.feature_dim < 1:
        out.append(Violation("BadDimension", "learner needs >= 2 classes and >= 1 feature"))
    if lr.classes != ds.classes or lr.feature_dim != ds.features:
        out.append(Violation(
            "BadDimension",
            f"learner shape ({lr.classes} classes, {lr.feature_dim} features) does not match data "
            f"({ds.classes} classes, {ds.features} features)",
        ))
    if lr.steps < 1 or not (lr.learn_rate > 0) or lr.l2 < 0:
        out.append(Violation("BadLearner", "learner needs steps >= 1, learn_rate > 0, l2 >= 0"))
    if ds.mode not in ("dirichlet", "cluster"):
        out.append(Violation("BadData", f"unknown data mode {ds.mode!r}"))
    if not (ds.beta > 0) or ds.test_size < MIN_TEST_SIZE or ds.n_clusters < 1:
        out.append(Violation("BadData", f"data needs beta > 0, test_size >= {MIN_TEST_SIZE}, n_clusters >= 1"))
    if ds.clusters is not None:
        if len(ds.clusters) != len(config.clients) or any(not 0 <= c < ds.n_clusters for c in ds.clusters):
            out.append(Violation("BadData", "explicit cluster list must give one valid cluster per client"))
    if config.attack is not None:
        if config.attack.kind not in ATTACK_KINDS:
            out.append(Violation("BadAttack", f"unknown attack kind {config.attack.kind!r}"))
        if not math.isfinite(config.attack.magnitude):
            out.append(Violation("BadAttack", "attack magnitude must be finite"))
    if config.quit_policy not in QUIT_POLICIES:
        out.append(Violation("BadPolicy", f"unknown quit policy {config.quit_policy!r}"))
    for cid in config.forced_quits:
        if not 0 <= int(cid) < len(config.clients):
            out.append(Violation("BadPolicy", f"forced quit names unknown client {cid}"))
    return out


def validate_config(config: SimConfig) -> SimConfig:
    """Return ``config`` unchanged if valid, else raise ConfigError listing all violations."""
    violations = config_violations(config)
    if violations:
        raise ConfigError(violations)
    return config


# --- JSON ---------------------------------------------------------------

def _encode_float(x: float):
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def _decode_float(x) -> float:
    if isinstance(x, str):
        return float(x)  # float() accepts "inf"
    return float(x)


def config_to_dict(config: SimConfig) -> dict:
    clients = []
    for p in config.clients:
        d = {
            "id": p.id,
            "data_size": p.data_size,
            "cost": _encode_float(p.cost),
            "eagerness": p.eagerness,
            "role": p.role.value,
        }
        if p.dishonesty is not None:
            d["dishonesty"] = {"target": p.dishonesty.target, "ratio": p.dishonesty.ratio}
        clients.append(d)
    data = asdict(config.data)
    if data["clusters"] is not None:
        data["clusters"] = list(data["clusters"])
    return {
        "clients": clients,
        "lambda": config.lam,
        "eta": config.eta,
        "rounds": config.rounds,
        "seed": config.seed,
        "learner": asdict(config.learner),
        "data": data,
        "attack": None if config.attack is None else asdict(config.attack),
        "distance_normalized": config.distance_normalized,
        "quit_policy": config.quit_policy,
        "forced_quits": {str(k): v for k, v in sorted(config.forced_quits.items())},
    }


def config_from_dict(doc: dict) -> SimConfig:
    clients = []
    for i, c in enumerate(doc["clients"]):
        dis = c.get("dishonesty")
        clients.append(ClientProfile(
            id=int(c.get("id", i)),
            data_size=float(c["data_size"]),
            cost=_decode_float(c["cost"]),
            eagerness=float(c["eagerness"]),
            role=Role(c.get("role", "trader")),
            dishonesty=None if dis is None else Dishonesty(dis["target"], float(dis["ratio"])),
        ))
    data = dict(doc.get("data", {}))
    if data.get("clusters") is not None:
        data["clusters"] = tuple(int(x) for x in data["clusters"])
    attack = doc.get("attack")
    return SimConfig(
        clients=tuple(clients),
        lam=float(doc.get("lambda", 1.0)),
        eta=None if doc.get("eta") is None else float(doc["eta"]),
        rounds=int(doc.get("rounds", 10)),
        seed=int(doc.get("seed", 0)),
        learner=LearnerSpec(**doc.get("learner", {})),
        data=DataSpec(**data),
        attack=None if attack is None else AttackSpec(attack["kind"], float(attack.get("magnitude", 0.0))),
        distance_normalized=bool(doc.get("distance_normalized", False)),
        quit_policy=doc.get("quit_policy", "solvent"),
        forced_quits={int(k): int(v) for k, v in doc.get("forced_quits", {}).items()},
    )


def load_config(path) -> SimConfig:
    with open(path, encoding="utf-8") as fh:
        return config_from_dict(json.load(fh))


def save_config(config: SimConfig, path) -> None:
    Path(path).write_text(json.dumps(config_to_dict(config), indent=2) + "\n", encoding="utf-8")
