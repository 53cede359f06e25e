"""Model-poisoning transforms applied to a round's update."""

from __future__ import annotations

import numpy as np

from ..domain import AttackSpec
from ..errors import DimensionMismatch

_ATTACK_TAG = 404


def attack_rng(seed: int, client: int, round_: int) -> np.random.Generator:
    return np.random.default_rng([seed, _ATTACK_TAG, client, round_])


def apply_attack(previous, honest_next, spec: AttackSpec, rng: np.random.Generator) -> np.ndarray:
    """Replace the update ``honest_next - previous`` according to ``spec``."""
    previous = np.asarray(previous, dtype=float)
    honest_next = np.asarray(honest_next, dtype=float)
    if previous.shape != honest_next.shape:
        raise DimensionMismatch("previous and next parameters differ in shape")
    delta = honest_next - previous
    if spec.kind == "shuffle":
        bad = delta[rng.permutation(delta.size)]
    elif spec.kind == "sign_flip":
        bad = -delta
    elif spec.kind == "constant":
        bad = np.full_like(delta, spec.magnitude)
    elif spec.kind == "gaussian":
        bad = rng.normal(0.0, spec.magnitude, size=delta.shape)
    else:
        raise ValueError(f"unknown attack kind {spec.kind!r}")
    return previous + bad
