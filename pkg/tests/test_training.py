import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from modelmarket.domain import AttackSpec, ClientProfile, DataSpec, LearnerSpec
from modelmarket.errors import DimensionMismatch, DivergedLoss, EmptyTestSet, InfeasiblePartition
from modelmarket.training import (
    SyntheticDataset,
    apply_attack,
    attack_rng,
    distance_matrix,
    dump_csv,
    evaluate,
    gen_data,
    load_csv,
    local_loss,
    local_loss_grad,
    local_train,
    model_distance,
    prox_center,
    prox_descent,
    prox_weights,
    softmax_loss_grad,
)
from modelmarket.training.data import apportion
from modelmarket.training.learner import predict, stability_eta

seeds = st.integers(0, 2**32 - 1)


def profiles(sizes):
    return [ClientProfile(i, float(n), 0.1, 1.0) for i, n in enumerate(sizes)]


def central_diff(f, x, step=1e-6):
    out = np.empty_like(x)
    for k in range(x.size):
        e = np.zeros_like(x)
        e[k] = step
        out[k] = (f(x + e) - f(x - e)) / (2 * step)
    return out


# --- data -----------------------------------------------------------------

def test_apportion_sums_and_ties():
    assert apportion(10, np.array([1, 1, 1])).tolist() == [4, 3, 3]
    assert apportion(7, np.array([0.5, 0.25, 0.25])).sum() == 7


def test_train_size_equals_true_size_and_test_floor():
    spec = DataSpec(features=5, test_size=100)
    data = gen_data(spec, profiles([7, 30, 12]), 0)
    assert [d.n_train for d in data] == [7, 30, 12]
    assert all(len(d.test_idx) >= 100 for d in data)
    for d in data:
        assert not set(d.train_idx) & set(d.test_idx)
        assert d.labels.max() < spec.classes


def test_dirichlet_large_beta_is_uniform():
    spec = DataSpec(mode="dirichlet", classes=4, features=3, beta=1e6, test_size=100)
    for d in gen_data(spec, profiles([400] * 5), 3):
        hist = np.bincount(d.y_train, minlength=4) / d.n_train
        assert np.all(np.abs(hist - 0.25) <= 0.05 * 0.25)


def test_dirichlet_reproducible_bit_exact():
    spec = DataSpec(mode="dirichlet", classes=4, features=3, beta=0.1, test_size=100)
    a = gen_data(spec, profiles([20] * 8), 11)
    b = gen_data(spec, profiles([20] * 8), 11)
    for x, y in zip(a, b):
        assert np.array_equal(np.bincount(x.y_train, minlength=4), np.bincount(y.y_train, minlength=4))
        assert np.array_equal(x.features, y.features)


def test_dirichlet_pool_exhaustion():
    spec = DataSpec(mode="dirichlet", classes=2, features=2, beta=1.0, test_size=100, pool_per_class=10)
    with pytest.raises(InfeasiblePartition):
        gen_data(spec, profiles([15, 15]), 0)


def test_cluster_mode_shares_means():
    spec = DataSpec(mode="cluster", classes=3, features=4, beta=1e6, n_clusters=2, noise=1e-9, test_size=120)
    data = gen_data(spec, profiles([30, 30, 30, 30]), 5)
    assert [d.cluster for d in data] == [0, 0, 1, 1]

    def centroids(d):
        return np.array([d.features[d.labels == k].mean(axis=0) for k in range(3)])

    assert np.allclose(centroids(data[0]), centroids(data[1]), atol=1e-6)
    assert not np.allclose(centroids(data[0]), centroids(data[2]), atol=1e-3)


def test_csv_round_trip(tmp_path):
    d = gen_data(DataSpec(features=3, test_size=100), profiles([9]), 0)[0]
    dump_csv(d, tmp_path / "d.csv")
    back = load_csv(tmp_path / "d.csv", d.classes)
    assert np.array_equal(back.features, d.features)
    assert np.array_equal(back.labels, d.labels)
    assert np.array_equal(back.train_idx, d.train_idx)


# --- learner --------------------------------------------------------------

def toy(rng, C=3, f=4, n=20):
    X = rng.standard_normal((n, f))
    y = rng.integers(0, C, n)
    return X, y


def test_zero_weights_loss_is_log_c(rng):
    X, y = toy(rng, C=5)
    loss, _ = softmax_loss_grad(np.zeros(5 * 5), X, y, 5)
    assert loss == pytest.approx(math.log(5), rel=1e-15)


@given(seeds, st.sampled_from([0.0, 0.3]))
def test_gradient_finite_differences(seed, l2):
    rng = np.random.default_rng(seed)
    C, f = int(rng.integers(2, 5)), int(rng.integers(1, 6))
    X, y = toy(rng, C, f, int(rng.integers(2, 25)))
    x0 = rng.standard_normal(C * (f + 1))
    _, g = softmax_loss_grad(x0, X, y, C, l2)
    fd = central_diff(lambda p: softmax_loss_grad(p, X, y, C, l2)[0], x0)
    assert np.linalg.norm(fd - g) <= 1e-5 * max(np.linalg.norm(g), 1e-8)


def test_one_small_step_descends(rng):
    X, y = toy(rng)
    x0 = rng.standard_normal(3 * 5)
    loss, g = softmax_loss_grad(x0, X, y, 3)
    assert softmax_loss_grad(x0 - 1e-3 * g, X, y, 3)[0] < loss


def test_local_loss_dimension_checks(rng):
    d = gen_data(DataSpec(features=4, test_size=100), profiles([10]), 0)[0]
    spec = LearnerSpec(classes=4, feature_dim=3)
    with pytest.raises(DimensionMismatch):
        local_loss(np.zeros(spec.dim), d, spec)
    with pytest.raises(DimensionMismatch):
        local_loss_grad(np.zeros(7), d, LearnerSpec(classes=4, feature_dim=4))


def test_distance_examples():
    assert model_distance([0, 0], [3, 4]) == 25.0
    assert model_distance([0, 0], [3, 4], normalized=True) == 12.5
    assert model_distance([1.5, 2], [1.5, 2]) == 0.0
    with pytest.raises(DimensionMismatch):
        model_distance([0], [0, 1])


@given(seeds)
def test_distance_relaxed_triangle(seed):
    rng = np.random.default_rng(seed)
    a, b, c = rng.standard_normal((3, 6))
    assert model_distance(a, b) <= 2 * model_distance(a, c) + 2 * model_distance(c, b) + 1e-12
    D = distance_matrix([a, b, c])
    assert np.array_equal(D, D.T) and not np.diag(D).any()


def test_prox_center_examples(rng):
    own, other = rng.standard_normal((2, 6))
    sizes = np.array([10.0, 40.0])
    assert np.array_equal(prox_center(own, [0, 0], [own, other], sizes, 0.3, 10.0), own)
    assert np.array_equal(prox_center(own, [0, 1], [own, own], sizes, 0.3, 10.0), own)
    # eta = N_i / (2 N_j) pulls all the way to the collaborator
    full = prox_center(own, [0, 1], [own, other], sizes, 10.0 / 80.0, 10.0)
    assert np.allclose(full, other, atol=1e-15)


def test_prox_center_normalized_divides_by_dim(rng):
    own, other = rng.standard_normal((2, 4))
    raw = prox_center(own, [0, 1], [own, other], [1.0, 1.0], 0.1, 1.0)
    norm = prox_center(own, [0, 1], [own, other], [1.0, 1.0], 0.4, 1.0, normalized=True)
    assert np.allclose(raw, norm, atol=1e-15)


@given(seeds)
def test_prox_center_convex_within_stability_bound(seed):
    rng = np.random.default_rng(seed)
    m = int(rng.integers(2, 8))
    sizes = rng.uniform(1, 50, m)
    row = rng.integers(0, 2, m)
    row[0] = 0
    eta = stability_eta(sizes[0], row, sizes) * rng.uniform(0, 1)
    if not np.isfinite(eta):
        eta = 1.0
    self_w, w = prox_weights(row, sizes, eta, sizes[0])
    assert self_w >= -1e-12 and np.all(w >= 0)
    assert self_w + w.sum() == pytest.approx(1.0, abs=1e-12)
    params = list(rng.standard_normal((m, 5)))
    expected = self_w * params[0] + sum(w[j] * params[j] for j in range(m))
    assert np.allclose(prox_center(params[0], row, params, sizes, eta, sizes[0]), expected, atol=1e-12)


def train_data(seed=0, n=30, f=4):
    return gen_data(DataSpec(features=f, test_size=100), profiles([n]), seed)[0]


def test_huge_prox_weight_pins_to_center(rng):
    spec = LearnerSpec(classes=4, feature_dim=4, steps=20)
    d = train_data()
    center = rng.standard_normal(spec.dim)
    out = local_train(np.zeros(spec.dim), center, d, spec, lam=1e9, eta=1.0)
    assert np.max(np.abs(out - center)) <= 1e-3


def test_zero_lambda_is_plain_gradient_descent():
    spec = LearnerSpec(classes=4, feature_dim=4, steps=10, learn_rate=0.1)
    d = train_data()
    x = np.zeros(spec.dim)
    for _ in range(spec.steps):
        x = x - spec.learn_rate * softmax_loss_grad(x, d.X_train, d.y_train, 4)[1]
    out = local_train(np.zeros(spec.dim), np.ones(spec.dim), d, spec, lam=0.0, eta=1.0)
    assert np.allclose(out, x, rtol=0, atol=1e-14)


def test_local_train_never_increases_objective(rng):
    spec = LearnerSpec(classes=4, feature_dim=4, steps=15, learn_rate=5.0)
    d = train_data(1)
    start, center = rng.standard_normal((2, spec.dim))
    mu = 0.7

    def obj(t):
        diff = t - center
        return local_loss(t, d, spec) + 0.5 * mu * float(diff @ diff)

    out = local_train(start, center, d, spec, lam=0.7, eta=1.0)
    assert obj(out) <= obj(start)


@given(seeds, st.floats(0.05, 5.0))
def test_least_squares_prox_reaches_ridge_solution(seed, mu):
    rng = np.random.default_rng(seed)
    n, k = 30, 4
    A = rng.standard_normal((n, k))
    b = rng.standard_normal(n)
    c = rng.standard_normal(k)

    def vg(x):
        r = A @ x - b
        return 0.5 * float(r @ r) / n, A.T @ r / n

    exact = np.linalg.solve(A.T @ A / n + mu * np.eye(k), A.T @ b / n + mu * c)
    out = prox_descent(vg, np.zeros(k), c, mu, steps=3000, learn_rate=0.5)
    assert np.max(np.abs(out - exact)) <= 1e-4


def test_diverged_loss_on_nonfinite():
    with pytest.raises(DivergedLoss):
        prox_descent(lambda x: (float("nan"), x), np.zeros(2), np.zeros(2), 1.0, 3, 0.1)
    spec = LearnerSpec(classes=4, feature_dim=4)
    with pytest.raises(DivergedLoss):
        local_train(np.full(spec.dim, np.inf), np.zeros(spec.dim), train_data(), spec, 1.0, 1.0)


def test_prox_descent_stationary_returns_start():
    # a constant objective never strictly improves; iterate is already optimal
    out = prox_descent(lambda x: (0.0, np.zeros_like(x)), np.ones(3), np.ones(3), 0.0, 5, 1.0)
    assert np.array_equal(out, np.ones(3))


def test_evaluate_examples():
    X = np.array([[2.0, 0.0], [-2.0, 0.0], [3.0, 1.0], [-3.0, -1.0]])
    y = np.array([0, 1, 0, 1])
    d = SyntheticDataset(X, y, np.arange(0), np.arange(4), classes=2)
    spec = LearnerSpec(classes=2, feature_dim=2)
    sep = np.array([1.0, 0.0, -1.0, 0.0, 0.0, 0.0])
    assert evaluate(sep, d, spec) == 1.0
    # zero weights predict class 0 everywhere
    assert evaluate(np.zeros(6), d, spec) == 0.5
    with pytest.raises(EmptyTestSet):
        evaluate(sep, SyntheticDataset(X, y, np.arange(4), np.arange(0), classes=2), spec)


@given(seeds)
def test_evaluate_matches_recount(seed):
    rng = np.random.default_rng(seed)
    d = train_data(int(rng.integers(100)))
    spec = LearnerSpec(classes=4, feature_dim=4)
    params = rng.standard_normal(spec.dim)
    W, b = params[:16].reshape(4, 4), params[16:]
    hits = 0
    for x, label in zip(d.X_test, d.y_test):
        scores = [float(W[k] @ x + b[k]) for k in range(4)]
        hits += scores.index(max(scores)) == label
    assert evaluate(params, d, spec) == hits / len(d.y_test)
    assert np.array_equal(predict(params, d.X_test, 4), np.argmax(d.X_test @ W.T + b, axis=1))


# --- attacks --------------------------------------------------------------

def test_sign_flip_twice_is_identity(rng):
    prev, nxt = rng.standard_normal((2, 8))
    spec = AttackSpec("sign_flip")
    once = apply_attack(prev, nxt, spec, attack_rng(0, 0, 0))
    twice = apply_attack(prev, once, spec, attack_rng(0, 0, 0))
    assert np.allclose(twice, nxt, atol=1e-15)


def test_constant_zero_returns_previous(rng):
    prev, nxt = rng.standard_normal((2, 8))
    assert np.array_equal(apply_attack(prev, nxt, AttackSpec("constant", 0.0), attack_rng(0, 0, 0)), prev)


@given(seeds)
def test_shuffle_preserves_entries(seed):
    rng = np.random.default_rng(seed)
    prev, nxt = rng.standard_normal((2, 10))
    out = apply_attack(prev, nxt, AttackSpec("shuffle"), attack_rng(seed, 1, 2))
    # out - prev re-rounds each entry, so compare to a few ulps
    assert np.allclose(np.sort(out - prev), np.sort(nxt - prev), rtol=0, atol=1e-14)
    assert np.linalg.norm(out - prev) == pytest.approx(np.linalg.norm(nxt - prev), rel=1e-14)


def test_gaussian_deterministic_and_scaled():
    prev = np.zeros(4000)
    nxt = np.ones(4000)
    a = apply_attack(prev, nxt, AttackSpec("gaussian", 2.0), attack_rng(3, 1, 4))
    b = apply_attack(prev, nxt, AttackSpec("gaussian", 2.0), attack_rng(3, 1, 4))
    assert np.array_equal(a, b)
    assert np.std(a) == pytest.approx(2.0, rel=0.05)


def test_attack_shape_mismatch():
    with pytest.raises(DimensionMismatch):
        apply_attack(np.zeros(2), np.zeros(3), AttackSpec("sign_flip"), attack_rng(0, 0, 0))
