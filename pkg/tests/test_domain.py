import json
import math
from dataclasses import replace

import pytest
from hypothesis import given, strategies as st

from modelmarket.domain import (
    INF,
    ClientProfile,
    DataSpec,
    Dishonesty,
    LearnerSpec,
    Role,
    SimConfig,
    config_from_dict,
    config_to_dict,
    config_violations,
    load_config,
    save_config,
    validate_config,
)
from modelmarket.errors import ConfigError
from modelmarket.fuzz import random_config
from modelmarket.market import declared
from modelmarket.scenarios import liars_base, market_roles, two_cluster

import numpy as np


def codes(config):
    return {v.code for v in config_violations(config)}


def test_presets_are_valid():
    for c in (two_cluster(), market_roles(), liars_base()):
        assert validate_config(c) is c


def test_learner_dim():
    assert LearnerSpec(classes=4, feature_dim=20).dim == 84


def test_honest_flag():
    assert ClientProfile(0, 1, 0.1, 1).honest
    assert not ClientProfile(0, 1, 0.0, 0.0, Role.ATTACKER).honest
    assert not ClientProfile(0, 1, 0.1, 1, dishonesty=Dishonesty("cost", 2)).honest


@pytest.mark.parametrize("profile, code", [
    (ClientProfile(0, 0.0, 0.1, 1.0), "NonPositiveDataSize"),
    (ClientProfile(0, 10.0, -0.1, 1.0), "NegativeCost"),
    (ClientProfile(0, 10.0, 0.1, -1.0), "NegativeEagerness"),
    (ClientProfile(0, 10.0, 0.1, 1.0, Role.BUYER), "RoleCostMismatch"),
    (ClientProfile(0, 10.0, INF, 1.0), "RoleCostMismatch"),
    (ClientProfile(0, 10.0, 0.0, 1.0, Role.SELLER), "RoleCostMismatch"),
    (ClientProfile(3, 10.0, 0.1, 1.0), "BadId"),
    (ClientProfile(0, 10.0, 0.1, 1.0, dishonesty=Dishonesty("age", 2.0)), "BadDishonesty"),
    (ClientProfile(0, 10.0, 0.1, 1.0, dishonesty=Dishonesty("cost", 0.0)), "BadDishonesty"),
])
def test_profile_violations(profile, code):
    base = two_cluster()
    assert code in codes(replace(base, clients=(profile,)))


def test_config_level_violations():
    base = two_cluster()
    assert "NoClients" in codes(replace(base, clients=()))
    assert "BadLambda" in codes(replace(base, lam=0.0))
    assert "BadEta" in codes(replace(base, eta=-1.0))
    assert "BadRounds" in codes(replace(base, rounds=0))
    assert "BadDimension" in codes(replace(base, learner=replace(base.learner, feature_dim=3)))
    assert "BadData" in codes(replace(base, data=replace(base.data, test_size=50)))
    assert "BadPolicy" in codes(replace(base, quit_policy="greedy"))


def test_validate_lists_every_violation():
    bad = replace(two_cluster(), lam=-1.0, rounds=0)
    with pytest.raises(ConfigError) as info:
        validate_config(bad)
    assert {v.code for v in info.value.violations} == {"BadLambda", "BadRounds"}


def test_reported_profile():
    p = ClientProfile(0, 10.0, 0.2, 1.0)
    assert declared(p) == (10.0, 0.2)
    assert declared(replace(p, dishonesty=Dishonesty("data_size", 10.0))) == (100.0, 0.2)
    assert declared(replace(p, dishonesty=Dishonesty("cost", 2.0))) == (10.0, 0.4)


@given(st.integers(0, 2**32 - 1))
def test_json_round_trip(seed):
    config = random_config(np.random.default_rng(seed))
    doc = json.loads(json.dumps(config_to_dict(config)))
    assert config_from_dict(doc) == config


def test_inf_cost_encoded_as_string(tmp_path):
    config = market_roles()
    path = tmp_path / "c.json"
    save_config(config, path)
    raw = json.loads(path.read_text())
    assert "inf" in [c["cost"] for c in raw["clients"]]
    assert "lambda" in raw
    loaded = load_config(path)
    assert loaded == config
    assert any(math.isinf(p.cost) for p in loaded.clients)
