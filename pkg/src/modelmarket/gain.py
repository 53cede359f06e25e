"""Collaboration gain and the per-seller admission threshold.

The gain a client with eagerness ``K`` and own size ``N`` draws from
importing models that together carry ``x`` samples is

    g(x) = sqrt(K / N) - sqrt(K / (N + x))

Both ``g`` and the marginal ``h(x) = g(x) - g(x - Nj)`` are evaluated in a
cancellation-free form so small prices still resolve to full precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import LengthMismatch, NegativeImport, NotACollaborator


@dataclass(frozen=True)
class GainParams:
    eagerness: float
    own_size: float

    def __post_init__(self):
        if not self.own_size > 0:
            raise ValueError(f"own_size must be > 0, got {self.own_size}")
        if not self.eagerness >= 0:
            raise ValueError(f"eagerness must be >= 0, got {self.eagerness}")


_TIE_ULPS = 4


def _g(K, N, x):
    # sqrt(K/N) - sqrt(K/(N+x)) == sqrt(K) * x / (sqrt(N) sqrt(N+x) (sqrt(N) + sqrt(N+x)))
    sn, snx = np.sqrt(N), np.sqrt(N + x)
    return np.sqrt(K) * x / (sn * snx * (sn + snx))


def _h(K, N, Nj, x):
    # g(x) - g(x - Nj) for x >= Nj, same rearrangement as _g
    lo, hi = np.sqrt(N + x - Nj), np.sqrt(N + x)
    return np.sqrt(K) * Nj / (lo * hi * (lo + hi))


def eval_g(params: GainParams, imported_data: float) -> float:
    if imported_data < 0:
        raise NegativeImport(f"imported data must be >= 0, got {imported_data}")
    if params.eagerness == 0 or imported_data == 0:
        return 0.0
    if math.isinf(imported_data):
        return math.sqrt(params.eagerness / params.own_size)
    return float(_g(params.eagerness, params.own_size, imported_data))


def eval_G(params: GainParams, row, sizes) -> float:
    row = np.asarray(row)
    sizes = np.asarray(sizes, dtype=float)
    if row.shape != sizes.shape:
        raise LengthMismatch(f"row has shape {row.shape} but sizes has shape {sizes.shape}")
    return eval_g(params, float(np.dot(row, sizes)))


def marginal_gain(params: GainParams, row, sizes, j: int) -> float:
    """Gain lost if collaborator ``j`` were dropped from ``row``."""
    row = np.asarray(row)
    if row[j] != 1:
        raise NotACollaborator(f"client {j} is not selected in this row")
    without = row.copy()
    without[j] = 0
    return eval_G(params, row, sizes) - eval_G(params, without, sizes)


def admission_marginal(params: GainParams, seller_size: float, total: float) -> float:
    """h(total): marginal gain of a seller of ``seller_size`` inside a set totalling ``total``."""
    if params.eagerness == 0:
        return 0.0
    return float(_h(params.eagerness, params.own_size, seller_size, total))


def solve_thresholds(eagerness, own_size, seller_size, unit_price) -> np.ndarray:
    """Vectorized threshold solve; arguments broadcast against each other.

    Returns, elementwise:
      * 0 when ``eagerness == 0``, the price is infinite, or even the first
        unit of imported data is worth less than the price;
      * ``inf`` when the price is 0 and eagerness is positive;
      * ``seller_size`` on a tie ``h(seller_size) == price`` (to a few ulps);
      * otherwise the root of ``h(x) = price`` found by bracketing bisection,
        carried to floating-point resolution.
    """
    K, N, Nj, p = np.broadcast_arrays(
        np.asarray(eagerness, dtype=float),
        np.asarray(own_size, dtype=float),
        np.asarray(seller_size, dtype=float),
        np.asarray(unit_price, dtype=float),
    )
    out = np.zeros(K.shape)
    with np.errstate(invalid="ignore", divide="ignore"):
        hmax = np.where(K > 0, _h(K, N, Nj, Nj), 0.0)
    live = (K > 0) & np.isfinite(p)
    out[live & (p == 0)] = np.inf
    # a few ulps either way is a tie; both 0 and Nj reject the seller in the greedy
    near = np.abs(hmax - p) <= _TIE_ULPS * np.finfo(float).eps * p
    tie = live & (p > 0) & near
    out[tie] = Nj[tie]
    todo = live & (p > 0) & ~near & (hmax > p)
    if not todo.any():
        return out

    k, n, nj, pr = K[todo], N[todo], Nj[todo], p[todo]
    lo = nj.copy()
    hi = 2.0 * nj
    # expand the upper bracket until h(hi) < price
    for _ in range(2100):
        grow = _h(k, n, nj, hi) >= pr
        if not grow.any():
            break
        hi = np.where(grow, hi * 2.0, hi)
    for _ in range(2100):
        mid = lo + (hi - lo) * 0.5
        stuck = (mid <= lo) | (mid >= hi)
        if stuck.all():
            break
        above = _h(k, n, nj, mid) > pr
        lo = np.where(~stuck & above, mid, lo)
        hi = np.where(~stuck & ~above, mid, hi)
    # lo keeps h(lo) > price, so any admitted total below it is strictly profitable
    out[todo] = lo
    return out


def solve_threshold(params: GainParams, seller_size: float, unit_price: float) -> float:
    if not seller_size > 0:
        raise ValueError(f"seller_size must be > 0, got {seller_size}")
    if not unit_price >= 0:
        raise ValueError(f"unit_price must be >= 0, got {unit_price}")
    return float(solve_thresholds(params.eagerness, params.own_size, seller_size, unit_price))
