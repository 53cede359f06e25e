"""Executable property suites for the market's incentive guarantees.

Each suite returns a list of :class:`PropertyResult`. ``worst_slack`` is the
smallest margin seen, signed so that a negative value marks a violation.
"""

from __future__ import annotations

import decimal
import time
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .domain import BALANCE_TOL, INF, validate_config
from .fuzz import random_config, random_problem, random_problems
from .gain import GainParams, admission_marginal, marginal_gain, solve_thresholds
from .graph import brute_force_row, check_local_opt, learn_graph, learn_row, phi, row_thresholds, unit_prices
from .market import row_gains, run, simulate, utilities
from .payment import pairwise_payment
from .scenarios import COST_LIAR, COST_LIE_RATIOS, DATA_LIAR, lie, liars_base
from .report import result_json
from .training import softmax_loss_grad

TOL = 1e-9
GRAD_RTOL = 1e-5
ROOT_RTOL = 1e-12


@dataclass
class PropertyResult:
    name: str
    count: int
    failures: int
    worst_slack: float
    notes: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.failures == 0 and self.count > 0

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] {self.name}: {self.count - self.failures}/{self.count} ok, worst slack {self.worst_slack:.3e}"


class _Tally:
    """Running count, failure count and minimum slack for one property."""

    def __init__(self, name: str, tol: float = 0.0):
        self.name, self.tol = name, tol
        self.count = self.failures = 0
        self.worst = INF

    def add(self, slack: float) -> None:
        self.count += 1
        self.worst = min(self.worst, float(slack) + 0.0)  # + 0.0 folds -0.0 into 0.0
        if slack < -self.tol:
            self.failures += 1

    def result(self, notes=None) -> PropertyResult:
        return PropertyResult(self.name, self.count, self.failures, self.worst, list(notes or []))


# --- individual rationality, budget balance, welfare consistency ---------

def suite_ir(n: int = 1000, seed: int = 0) -> list[PropertyResult]:
    """Fuzzed full simulations: IR for honest clients, budget balance and SW == sum U every round."""
    rng = np.random.default_rng([seed, 1])
    ir = _Tally("individual rationality (honest U >= -1e-9)", TOL)
    bal = _Tally("budget balance (|sum p| <= 1e-9)", 0.0)
    sw = _Tally("social welfare equals sum of utilities", 0.0)
    for _ in range(n):
        config = validate_config(random_config(rng))
        honest = np.array([p.honest for p in config.clients])
        for rep in simulate(config).rounds:
            if honest.any():
                ir.add(float(rep.utilities[honest].min()))
            bal.add(BALANCE_TOL - abs(float(rep.ledger.net_bills.sum())))
            sw.add(TOL - abs(rep.social_welfare - float(rep.utilities.sum())))
    return [ir.result([f"{n} fuzzed configs"]), bal.result(), sw.result()]


def _market_with_seller(rng):
    """Random market plus a uniformly chosen client with finite cost."""
    while True:
        problems = random_problems(rng, int(rng.integers(2, 17)))
        finite = np.flatnonzero(np.isfinite(problems[0].costs))
        if finite.size:
            return problems, int(rng.choice(finite))


# --- truthfulness ---------------------------------------------------------

def _round_utility(problems, costs_true, j):
    A = learn_graph(problems)
    led = pairwise_payment(A, problems)
    return float(utilities(A, led, row_gains(A, problems), costs_true)[j])


def suite_truthful(n: int = 1000, seed: int = 0, preset_seed: int = 0) -> list[PropertyResult]:
    """Cost overstatement never pays: one-round counterfactuals plus paired preset runs."""
    rng = np.random.default_rng([seed, 3])
    one = _Tally("cost overstatement, one round (U_lie <= U_honest)", TOL)
    while one.count < n:
        problems, j = _market_with_seller(rng)
        costs = problems[0].costs
        kappa = float(rng.choice(COST_LIE_RATIOS))
        lied = costs.copy()
        lied[j] *= kappa
        liar_problems = [replace(p, costs=lied.copy()) for p in problems]
        one.add(_round_utility(problems, costs, j) - _round_utility(liar_problems, costs, j))

    config = liars_base(preset_seed)
    honest = run(config, baseline=False)
    h_rounds = np.array([r.utilities[COST_LIAR] for r in honest.rounds])
    paired = _Tally("cost liar preset, per round (U_lie <= U_honest)", TOL)
    zero = _Tally("cost liar preset, cumulative utility == 0", TOL)
    notes = []
    for ratio in COST_LIE_RATIOS:
        res = run(lie(config, COST_LIAR, "cost", ratio), baseline=False)
        l_rounds = np.array([r.utilities[COST_LIAR] for r in res.rounds])
        for a, b in zip(h_rounds, l_rounds):
            paired.add(float(a - b))
        zero.add(-abs(float(res.cumulative_utilities[COST_LIAR])))
        notes.append(f"ratio {ratio:g}: cumulative {res.cumulative_utilities[COST_LIAR]:.6g}")
    positive = _Tally("cost liar preset, honest cumulative utility > 0")
    hc = float(honest.cumulative_utilities[COST_LIAR])
    positive.add(hc if hc > 0 else -1.0)
    notes.append(f"honest cumulative {hc:.6g}")
    return [one.result(), paired.result(), zero.result(notes), positive.result()]


# --- robustness to misreported size -------------------------------------

def suite_robust(n: int = 50, seed: int = 0, preset_seed: int = 0) -> list[PropertyResult]:
    rng = np.random.default_rng([seed, 4])
    fuzz = _Tally("size x1e6, fuzzed runs: in-degree 0 every round")
    for _ in range(n):
        config = random_config(rng, rounds=4, liar_p=0.0)
        liar = int(rng.integers(config.m))
        config = lie(config, liar, "data_size", 1e6)
        for rep in simulate(validate_config(config)).rounds:
            fuzz.add(-float(rep.graph[:, liar].sum()))

    config = liars_base(preset_seed)
    big = run(lie(config, DATA_LIAR, "data_size", 1e6), baseline=False)
    preset = _Tally("size x1e6, liars preset: in-degree 0 every round")
    for rep in big.rounds:
        preset.add(-float(rep.graph[:, DATA_LIAR].sum()))

    honest = run(config, baseline=False)
    small = run(lie(config, DATA_LIAR, "data_size", 0.1), baseline=False)
    acc = _Tally("size x0.1, liars preset: liar accuracy < honest")
    gap = float(honest.final_accuracies[DATA_LIAR] - small.final_accuracies[DATA_LIAR])
    acc.add(gap if gap > 0 else -1.0)
    notes = [f"honest {honest.final_accuracies[DATA_LIAR]:.4f}, liar {small.final_accuracies[DATA_LIAR]:.4f}"]
    return [fuzz.result(), preset.result(), acc.result(notes)]


# --- incentive compatibility of cost ------------------------------------

def suite_ic(n: int = 1000, seed: int = 0) -> list[PropertyResult]:
    """Raising one reported cost can only shrink that client's set of importers."""
    rng = np.random.default_rng([seed, 5])
    t = _Tally("raised cost: importers shrink (subset)")
    while t.count < n:
        problems, j = _market_with_seller(rng)
        costs = problems[0].costs.copy()
        costs[j] = costs[j] * float(rng.uniform(1.0, 10.0)) + float(rng.uniform(0.0, 0.1))
        before = learn_graph(problems)[:, j]
        after = learn_graph([replace(p, costs=costs.copy()) for p in problems])[:, j]
        t.add(-float(np.sum(after > before)))
    return [t.result()]


# --- greedy versus the exact oracle -------------------------------------

def gap_histogram(gaps, bins: int = 10) -> list[str]:
    gaps = np.asarray(gaps, dtype=float)
    if gaps.size == 0:
        return ["(no gaps)"]
    zero = int(np.sum(gaps <= 1e-12))
    pos = gaps[gaps > 1e-12]
    lines = [f"gap == 0: {zero}"]
    if pos.size:
        edges = np.logspace(np.log10(pos.min()), np.log10(pos.max()) + 1e-9, bins + 1)
        counts, _ = np.histogram(pos, bins=edges)
        for lo, hi, c in zip(edges[:-1], edges[1:], counts):
            lines.append(f"[{lo:.2e}, {hi:.2e}): {c}")
    return lines


def suite_oracle(n_local: int = 10_000, n_brute: int = 1000, seed: int = 0, max_m: int = 10) -> list[PropertyResult]:
    rng = np.random.default_rng([seed, 6])
    local = _Tally("learn_row is locally optimal")
    safety = _Tally("greedy safety (n_final < threshold of every pick)")
    profit = _Tally("per-edge profitability (marginal > price)", TOL)
    for _ in range(n_local):
        m = int(rng.integers(2, 17))
        prob = random_problem(rng, m)
        th = row_thresholds(prob)
        row = learn_row(prob)
        local.add(0.0 if check_local_opt(prob, row) else -1.0)
        sel = np.flatnonzero(row)
        if sel.size:
            n_final = float(np.dot(row, prob.sizes))
            safety.add(float(np.min(th[sel] - n_final)) if np.all(n_final < th[sel]) else -1.0)
            prices = unit_prices(prob)
            for j in sel:
                profit.add(marginal_gain(prob.gain_params, row, prob.sizes, j) - prices[j])

    brute = _Tally("phi(greedy) >= phi(optimum)", TOL)
    gaps = []
    for _ in range(n_brute):
        m = int(rng.integers(2, max_m + 1))
        prob = random_problem(rng, m)
        g = phi(prob, learn_row(prob))
        _, best = brute_force_row(prob)
        brute.add(g - best)
        gaps.append(g - best)
    gaps = np.array(gaps)
    notes = [f"median gap {np.median(gaps):.3e}, max gap {gaps.max():.3e}, "
             f"greedy optimal in {np.mean(gaps <= 1e-12):.1%}"] + gap_histogram(gaps)
    return [local.result(), safety.result(), profit.result(), brute.result(notes)]


# --- numerical substrate -------------------------------------------------

def _fd_rel_error(f: Callable[[np.ndarray], tuple[float, np.ndarray]], x: np.ndarray, step: float = 1e-6) -> float:
    _, g = f(x)
    fd = np.empty_like(x)
    for k in range(x.size):
        e = np.zeros_like(x)
        e[k] = step
        fd[k] = (f(x + e)[0] - f(x - e)[0]) / (2 * step)
    return float(np.linalg.norm(fd - g) / max(np.linalg.norm(g), 1e-8))


def _h_exact(K: float, N: float, Nj: float, x: float) -> decimal.Decimal:
    with decimal.localcontext() as ctx:
        ctx.prec = 60
        D = decimal.Decimal
        k, n, nj, xx = D(K), D(N), D(Nj), D(x)
        return (k / (n + xx - nj)).sqrt() - (k / (n + xx)).sqrt()


def root_residual(K: float, N: float, Nj: float, price: float) -> float:
    """Relative residual |h(x*) - price| / max(1, price) at the solved threshold, in high precision."""
    x = float(solve_thresholds(K, N, Nj, price))
    if x == 0 or not np.isfinite(x):
        return 0.0
    with decimal.localcontext() as ctx:
        ctx.prec = 60
        r = abs(_h_exact(K, N, Nj, x) - decimal.Decimal(price)) / max(decimal.Decimal(1), decimal.Decimal(price))
        return float(r)


def suite_gradients(n: int = 100, seed: int = 0) -> list[PropertyResult]:
    rng = np.random.default_rng([seed, 7])
    loss = _Tally("local loss gradient vs central differences (rel <= 1e-5)")
    prox = _Tally("prox objective gradient vs central differences (rel <= 1e-5)")
    root = _Tally("threshold root |h(x*) - p| <= 1e-12 max(1, p)")
    for _ in range(n):
        C, f, npts = int(rng.integers(2, 6)), int(rng.integers(1, 8)), int(rng.integers(3, 30))
        X = rng.standard_normal((npts, f))
        y = rng.integers(0, C, size=npts)
        l2 = float(rng.choice([0.0, 0.1]))
        x0 = 0.5 * rng.standard_normal(C * (f + 1))
        center = rng.standard_normal(x0.size)
        mu = float(rng.uniform(0.1, 5.0))

        def vg(p):
            return softmax_loss_grad(p, X, y, C, l2)

        def prox_vg(p):
            v, g = vg(p)
            d = p - center
            return v + 0.5 * mu * float(d @ d), g + mu * d

        loss.add(GRAD_RTOL - _fd_rel_error(vg, x0))
        prox.add(GRAD_RTOL - _fd_rel_error(prox_vg, x0))

    for _ in range(10 * n):
        K = float(np.exp(rng.uniform(np.log(0.1), np.log(100))))
        N = float(rng.integers(1, 100))
        Nj = float(rng.integers(1, 100))
        hmax = admission_marginal(GainParams(K, N), Nj, Nj)
        price = float(hmax * rng.uniform(1e-3, 1.0))
        root.add(ROOT_RTOL - root_residual(K, N, Nj, price))
    return [loss.result(), prox.result(), root.result()]


def suite_determinism(seed: int = 0) -> list[PropertyResult]:
    rng = np.random.default_rng([seed, 8])
    t = _Tally("bit-identical results for identical config and seed")
    for _ in range(5):
        config = validate_config(random_config(rng, rounds=3))
        a = result_json(config, run(config))
        b = result_json(config, run(config))
        t.add(0.0 if a == b else -1.0)
    return [t.result()]


SUITES = {
    "ir": suite_ir,
    "truthful": suite_truthful,
    "robust": suite_robust,
    "ic": suite_ic,
    "oracle": suite_oracle,
    "gradients": suite_gradients,
    "determinism": suite_determinism,
}


def run_suites(names, seed: int = 0, echo: Callable[[str], None] = print) -> bool:
    """Run the named suites, echo one line per property plus notes, return overall pass."""
    ok = True
    for name in names:
        start = time.perf_counter()
        results = SUITES[name](seed=seed)
        for r in results:
            echo(r.line())
            for note in r.notes:
                echo(f"    {note}")
            ok &= r.passed
        echo(f"    ({name}: {time.perf_counter() - start:.1f}s)")
    return ok
