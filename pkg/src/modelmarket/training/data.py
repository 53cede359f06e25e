"""Synthetic heterogeneous client data."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..domain import ClientProfile, DataSpec
from ..errors import InfeasiblePartition

_MEANS_TAG = 101
_CLIENT_TAG = 202
_POOL_TAG = 303


@dataclass(frozen=True)
class SyntheticDataset:
    features: np.ndarray
    labels: np.ndarray
    train_idx: np.ndarray
    test_idx: np.ndarray
    classes: int
    cluster: int = 0

    @property
    def X_train(self) -> np.ndarray:
        return self.features[self.train_idx]

    @property
    def y_train(self) -> np.ndarray:
        return self.labels[self.train_idx]

    @property
    def X_test(self) -> np.ndarray:
        return self.features[self.test_idx]

    @property
    def y_test(self) -> np.ndarray:
        return self.labels[self.test_idx]

    @property
    def n_train(self) -> int:
        return len(self.train_idx)


def apportion(total: int, weights: np.ndarray) -> np.ndarray:
    """Largest-remainder split of ``total`` items by ``weights`` (ties to lower index)."""
    weights = np.asarray(weights, dtype=float)
    raw = total * weights / weights.sum()
    counts = np.floor(raw).astype(np.int64)
    short = total - int(counts.sum())
    if short > 0:
        frac = raw - counts
        order = sorted(range(len(weights)), key=lambda k: (-frac[k], k))
        for k in order[:short]:
            counts[k] += 1
    return counts


def class_means(spec: DataSpec, seed: int, cluster: int) -> np.ndarray:
    rng = np.random.default_rng([seed, _MEANS_TAG, cluster])
    return spec.class_sep * rng.standard_normal((spec.classes, spec.features))


def cluster_of(spec: DataSpec, idx: int, m: int) -> int:
    if spec.mode == "dirichlet":
        return 0
    if spec.clusters is not None:
        return int(spec.clusters[idx])
    return idx * spec.n_clusters // m  # contiguous blocks


def _blob(rng, means, counts, noise):
    labels = np.repeat(np.arange(len(counts)), counts)
    X = means[labels] + noise * rng.standard_normal((len(labels), means.shape[1]))
    return X, labels


def gen_data(spec: DataSpec, profiles: Sequence[ClientProfile], seed: int) -> list[SyntheticDataset]:
    """One dataset per client; train size is the client's true data size.

    Deterministic in ``seed``. Test points are drawn fresh from the client's
    own label mix and class means.
    """
    m = len(profiles)
    sizes = [int(round(p.data_size)) for p in profiles]
    for i, n in enumerate(sizes):
        if n < 1:
            raise InfeasiblePartition(f"client {i} needs at least one training point")
    clusters = [cluster_of(spec, i, m) for i in range(m)]
    means = {c: class_means(spec, seed, c) for c in sorted(set(clusters))}

    mixes, train_counts = [], []
    for i in range(m):
        rng = np.random.default_rng([seed, _CLIENT_TAG, i])
        mix = rng.dirichlet(np.full(spec.classes, spec.beta))
        mixes.append(mix)
        train_counts.append(apportion(sizes[i], mix))

    pool = None
    if spec.mode == "dirichlet":
        per_class = spec.pool_per_class if spec.pool_per_class is not None else sum(sizes)
        prng = np.random.default_rng([seed, _POOL_TAG])
        pool_X, pool_y = _blob(prng, means[0], np.full(spec.classes, per_class), spec.noise)
        pool = [pool_X[pool_y == k] for k in range(spec.classes)]
        cursor = np.zeros(spec.classes, dtype=np.int64)
        if max(sizes) > per_class * spec.classes:
            raise InfeasiblePartition("a client's data size exceeds the whole pool")

    out = []
    for i in range(m):
        rng = np.random.default_rng([seed, _CLIENT_TAG, i, 1])
        mu = means[clusters[i]]
        if pool is not None:
            parts = []
            for k, cnt in enumerate(train_counts[i]):
                if cursor[k] + cnt > len(pool[k]):
                    raise InfeasiblePartition(f"class {k} pool exhausted while serving client {i}")
                parts.append(pool[k][cursor[k]:cursor[k] + cnt])
                cursor[k] += cnt
            X_tr = np.concatenate(parts) if parts else np.zeros((0, spec.features))
            y_tr = np.repeat(np.arange(spec.classes), train_counts[i])
        else:
            X_tr, y_tr = _blob(rng, mu, train_counts[i], spec.noise)
        X_te, y_te = _blob(rng, mu, apportion(spec.test_size, mixes[i]), spec.noise)
        n_tr = len(y_tr)
        out.append(SyntheticDataset(
            features=np.concatenate([X_tr, X_te]),
            labels=np.concatenate([y_tr, y_te]).astype(np.int64),
            train_idx=np.arange(n_tr),
            test_idx=np.arange(n_tr, n_tr + len(y_te)),
            classes=spec.classes,
            cluster=clusters[i],
        ))
    return out


def dump_csv(data: SyntheticDataset, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        f = data.features.shape[1]
        w.writerow(["split"] + [f"x{k}" for k in range(f)] + ["label"])
        for split, idx in (("train", data.train_idx), ("test", data.test_idx)):
            for r in idx:
                w.writerow([split] + [repr(float(v)) for v in data.features[r]] + [int(data.labels[r])])


def load_csv(path, classes: int) -> SyntheticDataset:
    feats, labels, splits = [], [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        next(reader)
        for row in reader:
            splits.append(row[0])
            feats.append([float(v) for v in row[1:-1]])
            labels.append(int(row[-1]))
    splits = np.array(splits)
    return SyntheticDataset(
        features=np.array(feats),
        labels=np.array(labels, dtype=np.int64),
        train_idx=np.flatnonzero(splits == "train"),
        test_idx=np.flatnonzero(splits == "test"),
        classes=classes,
    )
