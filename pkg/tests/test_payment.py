import csv

import numpy as np
import pytest
from hypothesis import given, strategies as st

from modelmarket.domain import PaymentLedger
from modelmarket.errors import GraphProblemMismatch, PaymentConsistencyError, UnbalancedLedger
from modelmarket.fuzz import random_problems
from modelmarket.gain import GainParams
from modelmarket.graph import GraphProblem, learn_graph, unit_prices
from modelmarket.payment import (
    CumulativeLedger,
    check_balance,
    ledger_rows,
    net_bills,
    pairwise_payment,
    restrict,
    settle,
    write_ledger_csv,
)

seeds = st.integers(0, 2**32 - 1)


def market(seed, m=None):
    rng = np.random.default_rng(seed)
    problems = random_problems(rng, m or int(rng.integers(2, 12)))
    return problems, learn_graph(problems)


def test_empty_graph_zero_ledger():
    problems, _ = market(0, 4)
    led = pairwise_payment(np.zeros((4, 4), dtype=np.int8), problems)
    assert not led.remittances.any() and not led.net_bills.any()


def test_symmetric_traders():
    sizes = np.array([10.0, 10.0])
    costs = np.array([0.01, 0.01])
    problems = [GraphProblem(i, np.zeros(2), sizes, costs, GainParams(4.0, 10.0), 1.0) for i in range(2)]
    A = learn_graph(problems)
    assert A.tolist() == [[0, 1], [1, 0]]
    led = pairwise_payment(A, problems)
    assert led.remittances[0, 1] == led.remittances[1, 0]
    assert led.net_bills.tolist() == [0.0, 0.0]


@given(seeds)
def test_net_bills_direct_summation(seed):
    problems, A = market(seed, 3)
    led = pairwise_payment(A, problems)
    R = led.remittances
    for i in range(3):
        expected = sum(R[i, j] for j in range(3)) - sum(R[j, i] for j in range(3))
        assert led.net_bills[i] == pytest.approx(expected, abs=1e-15)


@given(seeds)
def test_budget_balance_and_reciprocity(seed):
    problems, A = market(seed)
    led = pairwise_payment(A, problems)
    assert abs(led.net_bills.sum()) <= 1e-9
    for i, p in enumerate(problems):
        prices = unit_prices(p)
        for j in np.flatnonzero(A[i]):
            assert led.remittances[i, j] > p.costs[j] - 1e-9  # seller profits
            assert prices[j] - p.costs[j] >= 0  # buyer keeps the similarity surplus
    assert np.all(led.remittances[A == 0] == 0)


@given(seeds, st.floats(0.0, 5.0))
def test_remittance_independent_of_seller_cost(seed, shift):
    problems, A = market(seed)
    led = pairwise_payment(A, problems)
    costs = problems[0].costs + shift
    moved = [GraphProblem(p.importer, p.model_distances, p.sizes, costs.copy(), p.gain_params, p.lam) for p in problems]
    assert np.array_equal(pairwise_payment(A, moved).remittances, led.remittances)


def test_negative_remittance_raises():
    sizes = np.array([10.0, 10.0])
    problems = [GraphProblem(i, np.array([0.0, 50.0])[::(1 if i == 0 else -1)], sizes, np.zeros(2),
                             GainParams(1.0, 10.0), 1.0) for i in range(2)]
    with pytest.raises(PaymentConsistencyError):
        pairwise_payment(np.array([[0, 1], [1, 0]]), problems)


def test_mismatch_errors():
    problems, A = market(1, 3)
    with pytest.raises(GraphProblemMismatch):
        pairwise_payment(np.zeros((2, 2), dtype=np.int8), problems)
    with pytest.raises(GraphProblemMismatch):
        pairwise_payment(np.eye(3, dtype=np.int8), problems)


def test_settle_identity_and_linearity():
    problems, A = market(7, 5)
    led = pairwise_payment(A, problems)
    zero = CumulativeLedger.zeros(5)
    assert np.array_equal(settle(PaymentLedger.zeros(5), zero).paid, zero.paid)
    cum = zero
    for _ in range(4):
        cum = settle(led, cum)
    assert np.allclose(cum.paid, 4 * led.remittances, rtol=0, atol=1e-14)
    assert np.allclose(cum.net, 4 * led.net_bills, rtol=0, atol=1e-14)


@given(seeds)
def test_cumulative_net_is_rows_minus_columns(seed):
    cum = CumulativeLedger.zeros(6)
    rng = np.random.default_rng(seed)
    for _ in range(int(rng.integers(1, 6))):
        problems, A = market(int(rng.integers(2**31)), 6)
        cum = settle(pairwise_payment(A, problems), cum)
    assert np.allclose(cum.net, cum.paid.sum(axis=1) - cum.paid.sum(axis=0), atol=1e-12)
    assert abs(cum.net.sum()) <= 1e-9


def test_settle_rejects_unbalanced():
    bad = PaymentLedger(np.zeros((2, 2)), np.array([1.0, 0.0]))
    with pytest.raises(UnbalancedLedger):
        settle(bad, CumulativeLedger.zeros(2))
    with pytest.raises(UnbalancedLedger):
        check_balance(bad)


def test_restrict_drops_quitter():
    R = np.array([[0, 1.0, 2.0], [0.5, 0, 0], [0, 3.0, 0]])
    led = restrict(PaymentLedger(R, net_bills(R)), np.array([True, False, True]))
    assert led.remittances[:, 1].sum() == 0 and led.remittances[1].sum() == 0
    assert abs(led.net_bills.sum()) == 0


def test_ledger_csv(tmp_path):
    R = np.array([[0, 0.25], [0.5, 0]])
    rows = ledger_rows(PaymentLedger(R, net_bills(R)), 3)
    path = tmp_path / "ledger.csv"
    write_ledger_csv(path, rows)
    with open(path, newline="") as fh:
        got = list(csv.reader(fh))
    assert got[0] == ["round", "payer", "payee", "amount"]
    assert got[1:] == [["3", "0", "1", "0.25"], ["3", "1", "0", "0.5"]]
